#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "cli.hpp"

using namespace fgmperf::cli;

int main(int argc, char** argv) {
  CLI::App app{"Feature-budgeted classifiers trained for multivariate losses"};
  app.require_subcommand(1);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model from SVMlight data");
  train->add_option("--data", tr.data, "Training data (SVMlight)")->required();
  train->add_option("--out", tr.out, "Model file, or manifest path for one-vs-rest")->required();
  train->add_option("--loss", tr.loss, "hamming, fbeta, f1, prec@k, rec@k, prbep")->capture_default_str();
  train->add_option("--beta", tr.beta, "beta for fbeta")->capture_default_str();
  train->add_option("--k", tr.k, "k for prec@k / rec@k, or 2p");
  train->add_option("--B,--budget", tr.budget, "Features per group")->capture_default_str();
  train->add_option("--C-scale", tr.c_scale, "C as a multiple of n")->capture_default_str();
  train->add_option("--C-absolute,--C", tr.c_absolute, "Absolute C (overrides --C-scale)");
  train->add_option("--eps", tr.eps, "Inner-layer gap tolerance")->capture_default_str();
  train->add_option("--max-outer", tr.max_outer, "Outer iteration cap")->capture_default_str();
  train->add_option("--max-cuts", tr.max_cuts, "Cut cap for the inner layer")->capture_default_str();
  train->add_option("--outer-tol", tr.outer_tol, "Relative change that stops the outer layer (0 disables)")
      ->capture_default_str();
  train->add_option("--positive-class", tr.positive_class, "Class token treated as +1 (binary data)");
  train->add_flag("--one-vs-rest", tr.one_vs_rest, "Force one model per class");
  train->add_flag("--parallel-classes", tr.parallel_classes, "Train one-vs-rest classes in parallel");
  train->add_flag("--scale", tr.scale, "Max-abs scale features before training");
  train->add_option("--trace", tr.trace, "Write a key=value trace to this file");
  train->add_option("--seed", tr.seed, "Recorded seed")->capture_default_str();
  train->add_flag("--require-convergence", tr.require_convergence, "Exit 4 if the cut cap is hit");
  train->add_flag("--keep-beta", tr.keep_beta, "Store per-example coefficients in the model");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Score data with a model or manifest");
  predict->add_option("--model", pr.model, "Model file or manifest")->required();
  predict->add_option("--data", pr.data, "Data to score (SVMlight)")->required();
  predict->add_option("--out", pr.out, "Score file (default stdout)");

  EvalArgs ev;
  std::vector<std::string> prec_at, rec_at;
  auto* eval = app.add_subcommand("eval", "Evaluate a score file against labelled data");
  eval->add_option("--scores", ev.scores, "Score file from predict")->required();
  eval->add_option("--data", ev.data, "Labelled data (SVMlight)")->required();
  eval->add_option("--measures", ev.measures, "f1, accuracy, prbep, rec@2p, prec@K, rec@K")->delimiter(',');
  eval->add_option("--prec-at", prec_at, "Add prec@K")->delimiter(',');
  eval->add_option("--rec-at", rec_at, "Add rec@K (K may be 2p)")->delimiter(',');
  eval->add_option("--format", ev.format, "table, tsv or both")->capture_default_str();

  SelfcheckArgs sc;
  auto* selfcheck = app.add_subcommand("selfcheck", "Compare fast oracles with brute force");
  selfcheck->add_option("--n-cap", sc.n_cap, "Largest n for the label oracle")->capture_default_str();
  selfcheck->add_option("--trials", sc.trials, "Random cases per configuration")->capture_default_str();
  selfcheck->add_option("--seed", sc.seed, "RNG seed")->capture_default_str();
  selfcheck->add_flag("--perturb", sc.perturb, "Perturb the fast oracles (the check must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  return run_guarded(
      [&] {
        if (*train) {
          cmd_train(tr, std::cerr);
        } else if (*predict) {
          cmd_predict(pr, std::cerr);
        } else if (*eval) {
          if (!prec_at.empty() || !rec_at.empty()) {
            if (ev.measures.empty()) ev.measures = {"f1", "accuracy", "prbep", "rec@2p"};
            for (const auto& k : prec_at) ev.measures.push_back("prec@" + k);
            for (const auto& k : rec_at) ev.measures.push_back("rec@" + k);
          }
          cmd_eval(ev, std::cout, std::cerr);
        } else if (*selfcheck) {
          cmd_selfcheck(sc, std::cout);
        }
      },
      std::cerr);
}
