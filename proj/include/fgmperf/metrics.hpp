#pragma once

// Test-time measures on the 0-100 scale.
//
// Every measure is 100 minus the matching training loss on the induced
// contingency table, so the 0/0 conventions agree with the losses: recall
// with no positives and precision with nothing predicted and nothing to find
// both count as 100.

#include <algorithm>
#include <cstddef>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgmperf/contingency.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/text.hpp"

namespace fgmperf {

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const int> y) {
  if (scores.size() != y.size()) {
    throw DataError("score and label counts differ");
  }
  if (scores.empty()) throw DataError("no examples to evaluate");
}

/// +1 for the k highest scores (ties by lower index), -1 elsewhere.
inline std::vector<int> top_k_labels(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<int> pred(scores.size(), -1);
  for (std::size_t r = 0; r < k; ++r) pred[order[r]] = 1;
  return pred;
}

inline std::size_t count_positives(std::span<const int> y) {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

}  // namespace detail

struct AtK {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t k = 0;
  ContingencyTable table;
};

inline AtK eval_at_k(std::span<const double> scores, std::span<const int> y,
                     std::size_t k) {
  detail::check_scores(scores, y);
  if (k < 1 || k > y.size()) {
    throw ConfigError("k = " + std::to_string(k) + " is outside [1, " +
                      std::to_string(y.size()) + "]");
  }
  AtK out;
  out.k = k;
  out.table = table_from_labels(y, detail::top_k_labels(scores, k));
  out.precision = 100.0 - loss_value_unchecked(LossSpec::prec_at(k), out.table);
  out.recall = 100.0 - loss_value_unchecked(LossSpec::rec_at(k), out.table);
  return out;
}

/// Recall with k = 2p, clamped to n.
inline AtK eval_rec_at_2p(std::span<const double> scores, std::span<const int> y) {
  detail::check_scores(scores, y);
  const std::size_t p = detail::count_positives(y);
  if (p == 0) throw DataError("Rec@2p is undefined without positives");
  return eval_at_k(scores, y, std::min(2 * p, y.size()));
}

/// Top-p operating point, where precision equals recall.
inline double eval_prbep(std::span<const double> scores, std::span<const int> y) {
  detail::check_scores(scores, y);
  const std::size_t p = detail::count_positives(y);
  if (p == 0) throw DataError("PRBEP is undefined without positives");
  const auto t = table_from_labels(y, detail::top_k_labels(scores, p));
  return 100.0 - loss_value_unchecked(LossSpec::prbep(), t);
}

/// Labels from sign(score), with 0 mapped to +1.
inline std::vector<int> sign_labels(std::span<const double> scores) {
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= 0.0 ? 1 : -1;
  return pred;
}

inline double eval_f1(std::span<const double> scores, std::span<const int> y) {
  detail::check_scores(scores, y);
  const auto t = table_from_labels(y, sign_labels(scores));
  return 100.0 - loss_value_unchecked(LossSpec::fbeta(1.0), t);
}

inline double eval_accuracy(std::span<const double> scores, std::span<const int> y) {
  detail::check_scores(scores, y);
  const auto t = table_from_labels(y, sign_labels(scores));
  return 100.0 * static_cast<double>(t.a + t.d) / static_cast<double>(t.n());
}

// ---------------------------------------------------------------------------
// Reports

enum class MeasureKind { kF1, kAccuracy, kPrecAtK, kRecAtK, kRecAt2p, kPrbep };

struct Measure {
  MeasureKind kind = MeasureKind::kF1;
  std::size_t k = 0;  // @k measures

  std::string name() const {
    switch (kind) {
      case MeasureKind::kF1: return "f1";
      case MeasureKind::kAccuracy: return "accuracy";
      case MeasureKind::kPrecAtK: return "prec@" + std::to_string(k);
      case MeasureKind::kRecAtK: return "rec@" + std::to_string(k);
      case MeasureKind::kRecAt2p: return "rec@2p";
      case MeasureKind::kPrbep: return "prbep";
    }
    return "?";
  }
};

/// "f1", "accuracy", "prbep", "rec@2p", "prec@<k>", "rec@<k>".
inline Measure parse_measure(std::string_view s) {
  if (s == "f1") return {MeasureKind::kF1, 0};
  if (s == "accuracy" || s == "acc") return {MeasureKind::kAccuracy, 0};
  if (s == "prbep") return {MeasureKind::kPrbep, 0};
  if (s == "rec@2p") return {MeasureKind::kRecAt2p, 0};
  for (auto [prefix, kind] : {std::pair{std::string_view("prec@"), MeasureKind::kPrecAtK},
                              std::pair{std::string_view("rec@"), MeasureKind::kRecAtK}}) {
    if (s.substr(0, prefix.size()) == prefix) {
      auto k = text::parse_size(s.substr(prefix.size()));
      if (!k || *k == 0) throw ConfigError("bad k in measure '" + std::string(s) + "'");
      return {kind, *k};
    }
  }
  throw ConfigError("unknown measure '" + std::string(s) + "'");
}

struct EvalRow {
  std::string measure;
  std::string class_token;
  double value = 0.0;
  std::size_t k_used = 0;  // 0 for measures without k
};

struct EvalReport {
  std::vector<std::string> measures;
  /// Classes that were evaluated, in order.
  std::vector<std::string> classes;
  std::vector<EvalRow> rows;
  /// Unweighted mean over `classes`, one entry per measure.
  std::vector<double> macro;
  std::vector<std::string> warnings;

  double value(std::string_view measure, std::string_view cls) const {
    for (const auto& r : rows) {
      if (r.measure == measure && r.class_token == cls) return r.value;
    }
    throw ConfigError("no value for " + std::string(measure) + " / " + std::string(cls));
  }
};

inline EvalRow evaluate_measure(const Measure& m, std::span<const double> scores,
                                std::span<const int> y) {
  EvalRow row;
  row.measure = m.name();
  switch (m.kind) {
    case MeasureKind::kF1: row.value = eval_f1(scores, y); break;
    case MeasureKind::kAccuracy: row.value = eval_accuracy(scores, y); break;
    case MeasureKind::kPrecAtK: {
      const auto r = eval_at_k(scores, y, m.k);
      row.value = r.precision;
      row.k_used = r.k;
      break;
    }
    case MeasureKind::kRecAtK: {
      const auto r = eval_at_k(scores, y, m.k);
      row.value = r.recall;
      row.k_used = r.k;
      break;
    }
    case MeasureKind::kRecAt2p: {
      const auto r = eval_rec_at_2p(scores, y);
      row.value = r.recall;
      row.k_used = r.k;
      break;
    }
    case MeasureKind::kPrbep:
      row.value = eval_prbep(scores, y);
      row.k_used = detail::count_positives(y);
      break;
  }
  return row;
}

/// One binary problem per class: scores[c][i] against y[c][i].
/// Classes without positives are skipped with a warning.
inline EvalReport evaluate(std::span<const Measure> measures,
                           std::span<const std::string> classes,
                           std::span<const std::vector<double>> scores,
                           std::span<const std::vector<int>> labels) {
  if (classes.size() != scores.size() || classes.size() != labels.size()) {
    throw DataError("class, score and label lists differ in length");
  }
  EvalReport rep;
  for (const auto& m : measures) rep.measures.push_back(m.name());
  rep.macro.assign(measures.size(), 0.0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (detail::count_positives(labels[c]) == 0) {
      rep.warnings.push_back("class '" + classes[c] +
                             "' has no positive examples; skipped");
      continue;
    }
    rep.classes.push_back(classes[c]);
    for (std::size_t m = 0; m < measures.size(); ++m) {
      EvalRow row = evaluate_measure(measures[m], scores[c], labels[c]);
      row.class_token = classes[c];
      rep.macro[m] += row.value;
      rep.rows.push_back(std::move(row));
    }
  }
  if (rep.classes.empty()) throw DataError("no class has positive examples");
  for (double& v : rep.macro) v /= static_cast<double>(rep.classes.size());
  return rep;
}

/// Line format: measure<TAB>class<TAB>value, then macro lines.
inline void write_tsv(std::ostream& out, const EvalReport& rep) {
  for (const auto& r : rep.rows) {
    out << r.measure << '\t' << r.class_token << '\t'
        << text::format_double(r.value) << '\n';
  }
  for (std::size_t m = 0; m < rep.measures.size(); ++m) {
    out << rep.measures[m] << "\tmacro\t" << text::format_double(rep.macro[m]) << '\n';
  }
}

inline void write_table(std::ostream& out, const EvalReport& rep) {
  std::size_t width = 5;
  for (const auto& c : rep.classes) width = std::max(width, c.size());
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::left << std::setw(static_cast<int>(width)) << "class";
  for (const auto& m : rep.measures) out << "  " << std::right << std::setw(10) << m;
  out << '\n' << std::fixed << std::setprecision(2);
  std::size_t r = 0;
  for (const auto& c : rep.classes) {
    out << std::left << std::setw(static_cast<int>(width)) << c;
    for (std::size_t m = 0; m < rep.measures.size(); ++m, ++r) {
      out << "  " << std::right << std::setw(10) << rep.rows[r].value;
    }
    out << '\n';
  }
  if (rep.classes.size() > 1) {
    out << std::left << std::setw(static_cast<int>(width)) << "macro";
    for (double v : rep.macro) out << "  " << std::right << std::setw(10) << v;
    out << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace fgmperf
