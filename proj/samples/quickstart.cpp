// Trains a budgeted F1 model on the bundled sample data and reports test
// measures.  Usage: sample_quickstart [train.svm test.svm]

#include <iostream>
#include <string>

#include "fgmperf/fgmperf.hpp"

int main(int argc, char** argv) {
  const std::string dir = FGMPERF_SAMPLE_DATA;
  const std::string train_path = argc > 2 ? argv[1] : dir + "/binary_train.svm";
  const std::string test_path = argc > 2 ? argv[2] : dir + "/binary_test.svm";
  try {
    const auto train_raw = fgmperf::load_svmlight(train_path);
    const auto test_raw = fgmperf::load_svmlight(test_path);
    const auto train = fgmperf::binarize(train_raw);
    const auto test = fgmperf::binarize(test_raw, train_raw.classes().back());

    fgmperf::TrainConfig cfg;
    cfg.loss = fgmperf::LossSpec::fbeta(1.0);
    cfg.budget = 3;
    const auto result = fgmperf::train(train, cfg);

    std::cout << "groups: " << result.model.groups.size()
              << ", selected features:";
    for (const auto& f : result.model.weights) std::cout << ' ' << f.index + 1;
    std::cout << "\nstop: " << fgmperf::outer_stop_name(result.stop) << '\n';

    std::vector<double> scores;
    for (const auto& x : test.examples()) scores.push_back(result.model.score(x));
    std::cout << "test F1 " << fgmperf::eval_f1(scores, test.labels())
              << ", accuracy " << fgmperf::eval_accuracy(scores, test.labels())
              << ", PRBEP " << fgmperf::eval_prbep(scores, test.labels()) << '\n';
  } catch (const fgmperf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
