#pragma once

// Command implementations behind the fgmperf executable. Each command throws
// on failure; run_guarded() maps exceptions to exit codes.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fgmperf/fgmperf.hpp"
#include "selfcheck.hpp"

namespace fgmperf::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kConvergence = 4,
  kSelfcheck = 5,
};

/// Training stopped at a cap while convergence was required.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class SelfcheckFailure : public Error {
 public:
  using Error::Error;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string loss = "f1";
  double beta = 1.0;
  std::string k;  // integer or "2p"
  std::size_t budget = 10;
  double c_scale = 0.1;
  std::optional<double> c_absolute;
  double eps = 1e-3;
  std::size_t max_outer = 50;
  std::size_t max_cuts = 200;
  double outer_tol = 1e-4;
  std::string positive_class;
  bool one_vs_rest = false;
  bool parallel_classes = false;
  bool scale = false;
  std::string trace;
  std::uint64_t seed = 0;
  bool require_convergence = false;
  bool keep_beta = false;
};

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
};

struct EvalArgs {
  std::string scores;
  std::string data;
  std::vector<std::string> measures;
  std::string format = "both";  // table | tsv | both
};

inline TrainConfig make_config(const TrainArgs& a) {
  TrainConfig cfg;
  std::size_t k = 0;
  if (a.k == "2p") {
    cfg.k_twice_positives = true;
  } else if (!a.k.empty()) {
    auto parsed = text::parse_size(a.k);
    if (!parsed || *parsed == 0) throw ConfigError("--k must be a positive integer or '2p'");
    k = *parsed;
  }
  cfg.loss = parse_loss(a.loss, a.beta, cfg.k_twice_positives ? 1 : k);
  if (cfg.k_twice_positives && !cfg.loss.uses_k()) {
    throw ConfigError("--k 2p only applies to prec@k and rec@k");
  }
  cfg.budget = a.budget;
  cfg.c_scale = a.c_scale;
  cfg.c_absolute = a.c_absolute;
  cfg.eps = a.eps;
  cfg.max_outer = a.max_outer;
  cfg.max_cuts = a.max_cuts;
  cfg.outer_tol = a.outer_tol;
  cfg.seed = a.seed;
  cfg.keep_beta = a.keep_beta;
  cfg.validate();
  return cfg;
}

namespace detail {

struct ClassJob {
  std::string positive;
  std::string negative;
  std::optional<TrainResult> result;
  std::string trace;
  std::string warning;
  std::exception_ptr error;
};

inline void trace_outer(std::ostream& out, const std::string& cls, const OuterTrace& t) {
  using text::format_double;
  out << "layer=outer class=" << cls << " t=" << t.iteration << " groups=" << t.groups
      << " J=" << format_double(t.objective) << " JK=" << format_double(t.lower_bound)
      << " gap=" << format_double(t.gap) << " cuts=" << t.cuts
      << " inner_converged=" << (t.inner_converged ? 1 : 0) << '\n';
}

inline void trace_inner(std::ostream& out, const std::string& cls, const InnerTrace& t) {
  using text::format_double;
  out << "layer=inner class=" << cls << " iter=" << t.iteration
      << " J=" << format_double(t.objective) << " JK=" << format_double(t.lower_bound)
      << " gap=" << format_double(t.gap) << " cuts=" << t.cuts << '\n';
}

/// Weights learned on scaled features, expressed for raw inputs.
inline void unscale(TrainedModel& m, std::span<const double> factors) {
  for (Feature& f : m.weights) {
    if (f.index < factors.size()) f.value /= factors[f.index];
  }
}

inline void run_job(const MulticlassDataset& ds, const TrainConfig& cfg,
                    const std::vector<double>& factors, bool want_trace, ClassJob& job) {
  try {
    SparseDataset bin = binarize(ds, job.positive);
    if (bin.negatives() == 0 || bin.positives() == 0) {
      job.warning = "class '" + job.positive + "' is degenerate; skipped";
      return;
    }
    std::ostringstream trace;
    TrainHooks hooks;
    if (want_trace) {
      hooks.on_inner = [&](const InnerTrace& t) { trace_inner(trace, job.positive, t); };
      hooks.on_outer = [&](const OuterTrace& t) { trace_outer(trace, job.positive, t); };
    }
    TrainResult r = train(bin, cfg, hooks);
    r.model.meta.positive_class = job.positive;
    r.model.meta.negative_class = job.negative;
    if (!factors.empty()) unscale(r.model, factors);
    trace << "layer=final class=" << job.positive << " stop=" << outer_stop_name(r.stop)
          << " converged=" << (r.converged ? 1 : 0) << " objective="
          << text::format_double(r.model.meta.objective) << " groups=" << r.model.groups.size()
          << " selected=" << r.model.selected_count() << " cuts=" << r.cuts
          << " qcqp_failures=" << r.qcqp_failures << '\n';
    job.trace = trace.str();
    job.result = std::move(r);
  } catch (...) {
    job.error = std::current_exception();
  }
}

inline std::string class_file(const std::string& out, std::size_t index) {
  return out + "." + std::to_string(index) + ".model";
}

}  // namespace detail

/// Trains one model (binary data) or one per class plus a manifest.
inline void cmd_train(const TrainArgs& a, std::ostream& log) {
  const TrainConfig cfg = make_config(a);
  if (a.out.empty()) throw ConfigError("--out is required");
  MulticlassDataset raw = load_svmlight(a.data);
  std::vector<double> factors;
  if (a.scale) {
    factors = max_abs_factors(raw.examples(), raw.dimension());
    raw = apply_scaling(raw, factors);
  }
  const auto classes = raw.classes();
  if (classes.size() < 2) throw DataError("degenerate label distribution");

  const bool multiclass = a.one_vs_rest || classes.size() > 2;
  std::vector<detail::ClassJob> jobs;
  if (multiclass) {
    if (!a.positive_class.empty()) {
      throw ConfigError("--positive-class does not apply to one-vs-rest training");
    }
    for (const auto& c : classes) jobs.push_back({c, "rest", {}, {}, {}, {}});
  } else {
    std::string pos = a.positive_class.empty() ? classes.back() : a.positive_class;
    if (!raw.has_class(pos)) throw DataError("unknown class '" + pos + "'");
    std::string neg = pos == classes.front() ? classes.back() : classes.front();
    jobs.push_back({pos, neg, {}, {}, {}, {}});
  }

  const bool want_trace = !a.trace.empty();
  if (a.parallel_classes && jobs.size() > 1) {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(jobs.size(), std::thread::hardware_concurrency()));
    std::mutex m;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t j;
          {
            std::lock_guard<std::mutex> lock(m);
            if (next == jobs.size()) return;
            j = next++;
          }
          detail::run_job(raw, cfg, factors, want_trace, jobs[j]);
        }
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (auto& job : jobs) detail::run_job(raw, cfg, factors, want_trace, job);
  }

  std::ofstream trace;
  if (want_trace) {
    trace.open(a.trace);
    if (!trace) throw DataError("cannot write '" + a.trace + "'");
  }
  for (auto& job : jobs) {
    if (job.error) std::rethrow_exception(job.error);
    if (!job.warning.empty()) log << "warning: " << job.warning << '\n';
    if (want_trace) trace << job.trace;
  }

  bool all_converged = true;
  if (!multiclass) {
    const TrainResult& r = *jobs.front().result;
    save(r.model, a.out);
    all_converged = r.converged;
    log << "trained " << jobs.front().positive << " vs " << jobs.front().negative
        << ": objective " << text::format_double(r.model.meta.objective) << ", "
        << r.model.groups.size() << " groups, " << r.model.selected_count()
        << " features, stop " << outer_stop_name(r.stop) << '\n';
  } else {
    std::vector<ManifestEntry> entries;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (!jobs[j].result) continue;
      const std::string file = detail::class_file(a.out, j);
      save(jobs[j].result->model, file);
      entries.push_back({jobs[j].positive, std::filesystem::path(file).filename().string()});
      all_converged = all_converged && jobs[j].result->converged;
      log << "trained class " << jobs[j].positive << ": "
          << jobs[j].result->model.selected_count() << " features, stop "
          << outer_stop_name(jobs[j].result->stop) << '\n';
    }
    if (entries.empty()) throw DataError("no class could be trained");
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw DataError("cannot write '" + a.out + "'");
    save_manifest(entries, out);
  }
  if (!all_converged) {
    const std::string msg = "inner layer hit the cut cap before reaching eps";
    if (a.require_convergence) throw ConvergenceError(msg);
    log << "warning: " << msg << '\n';
  }
}

struct LoadedPredictor {
  std::vector<std::string> classes;
  std::vector<TrainedModel> models;
  bool multiclass = false;
};

inline LoadedPredictor load_predictor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  LoadedPredictor p;
  if (!is_manifest(in)) {
    p.models.push_back(load_model(in));
    p.classes.push_back(p.models.front().meta.positive_class);
    return p;
  }
  p.multiclass = true;
  const auto dir = std::filesystem::path(path).parent_path();
  for (const auto& e : load_manifest(in)) {
    const auto file = std::filesystem::path(e.path).is_absolute() ? std::filesystem::path(e.path)
                                                                   : dir / e.path;
    if (!std::filesystem::exists(file)) {
      throw DataError("model file for class '" + e.class_token + "' is missing: " + file.string());
    }
    p.classes.push_back(e.class_token);
    p.models.push_back(load_model(file.string()));
  }
  if (p.models.empty()) throw DataError("manifest lists no classes");
  return p;
}

/// Writes a score file: one score per line, or argmax plus per-class scores.
inline void cmd_predict(const PredictArgs& a, std::ostream& log) {
  const LoadedPredictor p = load_predictor(a.model);
  const MulticlassDataset ds = load_svmlight(a.data);
  std::size_t dim = 0;
  for (const auto& m : p.models) dim = std::max(dim, m.meta.dimension);
  if (ds.dimension() > dim) {
    log << "warning: features beyond index " << dim << " are ignored\n";
  }
  if (p.multiclass) {
    for (const auto& c : ds.classes()) {
      if (std::find(p.classes.begin(), p.classes.end(), c) == p.classes.end()) {
        throw DataError("class '" + c + "' is missing from the manifest");
      }
    }
  }
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!a.out.empty() && a.out != "-") {
    file.open(a.out, std::ios::binary);
    if (!file) throw DataError("cannot write '" + a.out + "'");
    out = &file;
  }
  if (!p.multiclass) {
    const TrainedModel& m = p.models.front();
    *out << "# fgmperf-scores binary " << m.meta.positive_class << ' '
         << m.meta.negative_class << '\n';
    for (const auto& x : ds.examples()) *out << text::format_double(m.score(x)) << '\n';
    return;
  }
  *out << "# fgmperf-scores multiclass";
  for (const auto& c : p.classes) *out << ' ' << c;
  *out << '\n';
  for (const auto& x : ds.examples()) {
    std::vector<double> s;
    for (const auto& m : p.models) s.push_back(m.score(x));
    const auto best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    *out << p.classes[best];
    for (double v : s) *out << '\t' << text::format_double(v);
    *out << '\n';
  }
}

struct ScoreFile {
  bool multiclass = false;
  std::vector<std::string> classes;  // binary: {positive, negative}
  std::vector<std::vector<double>> scores;  // per class (binary: one column)
};

inline ScoreFile read_scores(std::istream& in) {
  ScoreFile f;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "empty score file");
  auto head = text::split_ws(line);
  if (head.size() < 3 || head[0] != "#" || head[1] != "fgmperf-scores") {
    throw ParseError(1, "missing score header");
  }
  if (head[2] == "binary") {
    if (head.size() != 5) throw ParseError(1, "binary header needs two class tokens");
    f.classes = {std::string(head[3]), std::string(head[4])};
    f.scores.resize(1);
  } else if (head[2] == "multiclass") {
    f.multiclass = true;
    for (std::size_t i = 3; i < head.size(); ++i) f.classes.emplace_back(head[i]);
    if (f.classes.empty()) throw ParseError(1, "multiclass header lists no classes");
    f.scores.resize(f.classes.size());
  } else {
    throw ParseError(1, "unknown score mode '" + std::string(head[2]) + "'");
  }
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = text::split_ws(line);
    if (tok.empty()) continue;
    const std::size_t want = f.multiclass ? f.classes.size() + 1 : 1;
    if (tok.size() != want) throw ParseError(lineno, "wrong number of fields");
    for (std::size_t c = 0; c < f.scores.size(); ++c) {
      auto v = text::parse_double(tok[f.multiclass ? c + 1 : 0]);
      if (!v || !std::isfinite(*v)) throw ParseError(lineno, "bad score");
      f.scores[c].push_back(*v);
    }
  }
  return f;
}

inline EvalReport cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& log) {
  std::ifstream in(a.scores, std::ios::binary);
  if (!in) throw DataError("cannot open '" + a.scores + "'");
  const ScoreFile sf = read_scores(in);
  const MulticlassDataset ds = load_svmlight(a.data);
  if (sf.scores.front().size() != ds.size()) {
    throw DataError("score file has " + std::to_string(sf.scores.front().size()) +
                    " rows but the data has " + std::to_string(ds.size()));
  }
  std::vector<Measure> measures;
  const std::vector<std::string> names =
      a.measures.empty() ? std::vector<std::string>{"f1", "accuracy", "prbep", "rec@2p"}
                         : a.measures;
  for (const auto& n : names) {
    Measure m = parse_measure(n);
    const bool seen = std::any_of(measures.begin(), measures.end(),
                                  [&](const Measure& o) { return o.name() == m.name(); });
    if (!seen) measures.push_back(m);
  }

  std::vector<std::string> classes;
  std::vector<std::vector<int>> labels;
  if (!sf.multiclass) {
    classes.push_back(sf.classes.front());
  } else {
    classes = sf.classes;
  }
  for (const auto& c : classes) {
    std::vector<int> y;
    for (const auto& r : ds.raw_labels()) y.push_back(r == c ? 1 : -1);
    labels.push_back(std::move(y));
  }
  EvalReport rep = evaluate(measures, classes, sf.scores, labels);
  for (const auto& w : rep.warnings) log << "warning: " << w << '\n';
  if (a.format == "table" || a.format == "both") write_table(out, rep);
  if (a.format == "tsv" || a.format == "both") write_tsv(out, rep);
  if (a.format != "table" && a.format != "tsv" && a.format != "both") {
    throw ConfigError("--format must be table, tsv or both");
  }
  return rep;
}

inline void cmd_selfcheck(const SelfcheckArgs& a, std::ostream& out) {
  if (!run_selfcheck(a, out)) throw SelfcheckFailure("self-check failed");
}

/// Runs `body`, printing the error and returning the matching exit code.
template <class F>
int run_guarded(F&& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kConvergence;
  } catch (const SelfcheckFailure& e) {
    err << "error: " << e.what() << '\n';
    return kSelfcheck;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const QcqpError& e) {
    err << "solver error: " << e.what() << '\n';
    return kConvergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace fgmperf::cli
