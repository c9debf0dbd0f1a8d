#pragma once

// Contingency tables and the multivariate losses built on them.
//
// Every loss except Hamming is on the 0-100 scale. Hamming is 2(b+c), the
// scaling under which the multivariate formulation coincides with the
// ordinary hinge-loss SVM. Averaging by n happens in the training layer.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "fgmperf/error.hpp"

namespace fgmperf {

struct ContingencyTable {
  std::int64_t a = 0;  // true positives
  std::int64_t b = 0;  // false positives
  std::int64_t c = 0;  // false negatives
  std::int64_t d = 0;  // true negatives

  std::int64_t n() const { return a + b + c + d; }
  std::int64_t positives() const { return a + c; }
  std::int64_t negatives() const { return b + d; }
  std::int64_t predicted_positives() const { return a + b; }

  friend bool operator==(const ContingencyTable&,
                         const ContingencyTable&) = default;
};

enum class LossKind { kHamming, kFbeta, kPrecAtK, kRecAtK, kPrbep };

struct LossSpec {
  LossKind kind = LossKind::kFbeta;
  double beta = 1.0;   // F-beta only
  std::size_t k = 0;   // Prec@k / Rec@k only

  static LossSpec hamming() { return {LossKind::kHamming, 1.0, 0}; }
  static LossSpec fbeta(double beta = 1.0) {
    return {LossKind::kFbeta, beta, 0};
  }
  static LossSpec prec_at(std::size_t k) { return {LossKind::kPrecAtK, 1.0, k}; }
  static LossSpec rec_at(std::size_t k) { return {LossKind::kRecAtK, 1.0, k}; }
  static LossSpec prbep() { return {LossKind::kPrbep, 1.0, 0}; }

  bool uses_k() const {
    return kind == LossKind::kPrecAtK || kind == LossKind::kRecAtK;
  }

  /// Parameter sanity, independent of any dataset.
  void validate() const {
    if (kind == LossKind::kFbeta && !(beta > 0.0 && std::isfinite(beta))) {
      throw ConfigError("beta must be a positive finite number");
    }
    if (uses_k() && k == 0) throw ConfigError("k must be at least 1");
  }

  /// Checks k against the sample size.
  void validate_for(std::size_t n) const {
    validate();
    if (uses_k() && k > n) {
      throw ConfigError("k = " + std::to_string(k) +
                        " exceeds the number of examples " + std::to_string(n));
    }
  }

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

/// Canonical kind name as used on the command line and in model files.
inline std::string_view kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kHamming: return "hamming";
    case LossKind::kFbeta: return "fbeta";
    case LossKind::kPrecAtK: return "prec@k";
    case LossKind::kRecAtK: return "rec@k";
    case LossKind::kPrbep: return "prbep";
  }
  return "?";
}

/// Accepts "hamming", "f1", "fbeta", "prec@k", "rec@k", "prbep".
inline LossSpec parse_loss(std::string_view name, double beta = 1.0,
                           std::size_t k = 0) {
  LossSpec spec;
  if (name == "hamming") {
    spec = LossSpec::hamming();
  } else if (name == "f1") {
    spec = LossSpec::fbeta(1.0);
  } else if (name == "fbeta") {
    spec = LossSpec::fbeta(beta);
  } else if (name == "prec@k") {
    spec = LossSpec::prec_at(k);
  } else if (name == "rec@k") {
    spec = LossSpec::rec_at(k);
  } else if (name == "prbep") {
    spec = LossSpec::prbep();
  } else {
    throw ConfigError("unknown loss '" + std::string(name) + "'");
  }
  spec.validate();
  return spec;
}

/// a+b = k for the @k losses, b = c for PRBEP, anything otherwise.
inline bool admissible(const LossSpec& spec, const ContingencyTable& t) {
  if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) return false;
  switch (spec.kind) {
    case LossKind::kPrecAtK:
    case LossKind::kRecAtK:
      return t.a + t.b == static_cast<std::int64_t>(spec.k);
    case LossKind::kPrbep:
      return t.b == t.c;
    default:
      return true;
  }
}

// Table values are not checked here; the oracle's inner loop relies on that.
inline double loss_value_unchecked(const LossSpec& spec,
                                   const ContingencyTable& t) {
  const double a = static_cast<double>(t.a);
  const double b = static_cast<double>(t.b);
  const double c = static_cast<double>(t.c);
  switch (spec.kind) {
    case LossKind::kHamming:
      return 2.0 * (b + c);
    case LossKind::kFbeta: {
      const double b2 = spec.beta * spec.beta;
      const double denom = (1.0 + b2) * a + b + b2 * c;
      if (denom == 0.0) return 0.0;  // nothing to find, nothing predicted
      return 100.0 * (1.0 - (1.0 + b2) * a / denom);
    }
    case LossKind::kPrecAtK:
    case LossKind::kPrbep: {
      // PRBEP: b == c, so precision and recall coincide.
      const double pred = a + b;
      if (pred == 0.0) return t.positives() == 0 ? 0.0 : 100.0;
      return 100.0 * (1.0 - a / pred);
    }
    case LossKind::kRecAtK: {
      const double pos = a + c;
      if (pos == 0.0) return 0.0;
      return 100.0 * (1.0 - a / pos);
    }
  }
  return 0.0;
}

inline double loss_value(const LossSpec& spec, const ContingencyTable& t) {
  if (!admissible(spec, t)) {
    throw DataError("contingency table is not admissible for loss '" +
                    std::string(kind_name(spec.kind)) + "'");
  }
  return loss_value_unchecked(spec, t);
}

inline ContingencyTable table_from_labels(std::span<const int> y_true,
                                          std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("label vectors have different lengths");
  }
  ContingencyTable t;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool pos = y_true[i] > 0;
    const bool pred = y_pred[i] > 0;
    if (pos && pred) {
      ++t.a;
    } else if (!pos && pred) {
      ++t.b;
    } else if (pos) {
      ++t.c;
    } else {
      ++t.d;
    }
  }
  return t;
}

}  // namespace fgmperf
