#pragma once

// Sparse labeled datasets and the SVMlight/LibSVM text format.
//
// Feature indices are 1-based in text and 0-based everywhere in memory; the
// parser and writer are the only places that convert.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"
#include "fgmperf/text.hpp"

namespace fgmperf {

struct Feature {
  std::size_t index = 0;  // 0-based
  double value = 0.0;

  friend bool operator==(const Feature&, const Feature&) = default;
};

/// Sparse row: strictly increasing indices, finite non-zero values.
class SparseVector {
 public:
  SparseVector() = default;

  /// Validates ordering and finiteness; explicit zeros are dropped.
  explicit SparseVector(std::vector<Feature> entries) {
    entries_.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const Feature& f = entries[i];
      if (!std::isfinite(f.value)) {
        throw DataError("non-finite feature value");
      }
      if (i > 0 && f.index <= entries[i - 1].index) {
        throw DataError("indices not increasing");
      }
      if (f.value != 0.0) entries_.push_back(f);
    }
  }

  std::span<const Feature> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// One past the largest stored index (0 when empty).
  std::size_t dimension() const {
    return entries_.empty() ? 0 : entries_.back().index + 1;
  }

  /// Dot product with a dense vector; indices beyond it contribute 0.
  double dot(std::span<const double> dense) const {
    double s = 0.0;
    for (const Feature& f : entries_) {
      if (f.index >= dense.size()) break;
      s += f.value * dense[f.index];
    }
    return s;
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<Feature> entries_;
};

using ExampleList = std::vector<SparseVector>;
using SharedExamples = std::shared_ptr<const ExampleList>;

/// Binary view: labels in {-1,+1}; examples are shared, never copied.
class SparseDataset {
 public:
  SparseDataset(SharedExamples examples, std::vector<int> labels,
                std::size_t dimension = 0)
      : examples_(std::move(examples)), labels_(std::move(labels)) {
    if (!examples_ || examples_->empty()) {
      throw DataError("dataset must contain at least one example");
    }
    if (examples_->size() != labels_.size()) {
      throw DataError("example and label counts differ");
    }
    dimension_ = dimension;
    for (const auto& x : *examples_) {
      dimension_ = std::max(dimension_, x.dimension());
    }
    for (int y : labels_) {
      if (y == 1) {
        ++positives_;
      } else if (y != -1) {
        throw DataError("binary labels must be -1 or +1");
      }
    }
  }

  std::size_t size() const { return labels_.size(); }
  /// Number of feature columns m (0-based indices are < m).
  std::size_t dimension() const { return dimension_; }
  const SparseVector& example(std::size_t i) const { return (*examples_)[i]; }
  const ExampleList& examples() const { return *examples_; }
  const SharedExamples& shared_examples() const { return examples_; }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }
  std::size_t positives() const { return positives_; }
  std::size_t negatives() const { return labels_.size() - positives_; }

  /// Training needs both classes present.
  void require_nondegenerate() const {
    if (positives() == 0 || negatives() == 0) {
      throw DataError("degenerate label distribution");
    }
  }

 private:
  SharedExamples examples_;
  std::vector<int> labels_;
  std::size_t dimension_ = 0;
  std::size_t positives_ = 0;
};

namespace detail {

// Numeric order when every token is a number, lexicographic otherwise.
inline void sort_class_tokens(std::vector<std::string>& classes) {
  bool numeric = std::all_of(classes.begin(), classes.end(), [](auto& c) {
    return text::parse_double(c).has_value();
  });
  if (numeric) {
    std::stable_sort(classes.begin(), classes.end(),
                     [](const std::string& a, const std::string& b) {
                       double x = *text::parse_double(a);
                       double y = *text::parse_double(b);
                       return x < y || (x == y && a < b);
                     });
  } else {
    std::sort(classes.begin(), classes.end());
  }
}

}  // namespace detail

/// Dataset with opaque class tokens, as read from disk.
class MulticlassDataset {
 public:
  MulticlassDataset(ExampleList examples, std::vector<std::string> raw_labels,
                    std::size_t dimension = 0)
      : examples_(std::make_shared<const ExampleList>(std::move(examples))),
        raw_labels_(std::move(raw_labels)) {
    if (examples_->empty()) throw DataError("empty dataset");
    if (examples_->size() != raw_labels_.size()) {
      throw DataError("example and label counts differ");
    }
    dimension_ = dimension;
    for (const auto& x : *examples_) {
      dimension_ = std::max(dimension_, x.dimension());
    }
    classes_ = raw_labels_;
    detail::sort_class_tokens(classes_);
    classes_.erase(std::unique(classes_.begin(), classes_.end()),
                   classes_.end());
  }

  std::size_t size() const { return raw_labels_.size(); }
  std::size_t dimension() const { return dimension_; }
  const ExampleList& examples() const { return *examples_; }
  const SharedExamples& shared_examples() const { return examples_; }
  std::span<const std::string> raw_labels() const { return raw_labels_; }
  /// Distinct classes in ascending order (numeric when all tokens are numbers).
  std::span<const std::string> classes() const { return classes_; }

  bool has_class(std::string_view token) const {
    return std::find(classes_.begin(), classes_.end(), token) !=
           classes_.end();
  }

 private:
  SharedExamples examples_;
  std::vector<std::string> raw_labels_;
  std::vector<std::string> classes_;
  std::size_t dimension_ = 0;
};

/// One-vs-rest view: +1 where the raw label equals `positive_class`.
inline SparseDataset binarize(const MulticlassDataset& ds,
                              std::string_view positive_class) {
  if (!ds.has_class(positive_class)) {
    throw DataError("unknown class '" + std::string(positive_class) + "'");
  }
  std::vector<int> labels;
  labels.reserve(ds.size());
  for (const auto& raw : ds.raw_labels()) {
    labels.push_back(raw == positive_class ? 1 : -1);
  }
  return SparseDataset(ds.shared_examples(), std::move(labels),
                       ds.dimension());
}

/// Binary mode: exactly two classes, the larger one (class order) is +1.
inline SparseDataset binarize(const MulticlassDataset& ds) {
  if (ds.classes().size() != 2) {
    throw DataError("binary mode needs exactly two classes, found " +
                    std::to_string(ds.classes().size()));
  }
  return binarize(ds, ds.classes().back());
}

inline MulticlassDataset parse_svmlight(std::istream& in) {
  ExampleList examples;
  std::vector<std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    auto tokens = text::split_ws(view);
    if (tokens.empty()) continue;

    std::vector<Feature> entries;
    entries.reserve(tokens.size() - 1);
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      std::string_view tok = tokens[t];
      if (tok.starts_with("qid:")) continue;
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(lineno, "missing ':' in '" + std::string(tok) + "'");
      }
      auto idx = text::parse_size(tok.substr(0, colon));
      if (!idx || *idx == 0) {
        throw ParseError(lineno,
                         "invalid feature index in '" + std::string(tok) + "'");
      }
      auto val = text::parse_double(tok.substr(colon + 1));
      if (!val) {
        throw ParseError(lineno,
                         "non-numeric value in '" + std::string(tok) + "'");
      }
      if (!std::isfinite(*val)) {
        throw ParseError(lineno,
                         "non-finite value in '" + std::string(tok) + "'");
      }
      std::size_t index = *idx - 1;
      if (!entries.empty() && index <= entries.back().index) {
        throw ParseError(lineno, "indices not increasing");
      }
      entries.push_back({index, *val});
    }
    // Zeros still take part in the ordering check above.
    std::erase_if(entries, [](const Feature& f) { return f.value == 0.0; });
    examples.emplace_back(std::move(entries));
    labels.emplace_back(tokens[0]);
  }
  if (examples.empty()) throw ParseError(lineno, "empty dataset");
  return MulticlassDataset(std::move(examples), std::move(labels));
}

inline MulticlassDataset load_svmlight(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_svmlight(in);
}

inline void write_svmlight(std::ostream& out, const MulticlassDataset& ds) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.raw_labels()[i];
    for (const Feature& f : ds.examples()[i]) {
      out << ' ' << (f.index + 1) << ':' << text::format_double(f.value);
    }
    out << '\n';
  }
}

/// Per-feature max-abs factors (1 for all-zero columns).
inline std::vector<double> max_abs_factors(const ExampleList& examples,
                                           std::size_t dimension) {
  std::vector<double> factors(dimension, 0.0);
  for (const auto& x : examples) {
    for (const Feature& f : x) {
      factors[f.index] = std::max(factors[f.index], std::abs(f.value));
    }
  }
  for (double& s : factors) {
    if (s == 0.0) s = 1.0;
  }
  return factors;
}

/// Divides every value by its column factor; columns past `factors` untouched.
inline MulticlassDataset apply_scaling(const MulticlassDataset& ds,
                                       std::span<const double> factors) {
  ExampleList scaled;
  scaled.reserve(ds.size());
  for (const auto& x : ds.examples()) {
    std::vector<Feature> entries(x.begin(), x.end());
    for (Feature& f : entries) {
      if (f.index < factors.size()) f.value /= factors[f.index];
    }
    scaled.emplace_back(std::move(entries));
  }
  std::vector<std::string> labels(ds.raw_labels().begin(),
                                  ds.raw_labels().end());
  return MulticlassDataset(std::move(scaled), std::move(labels),
                           ds.dimension());
}

/// w^T (x ⊙ d) where `block[p]` is the weight of `group[p]`.
inline double dot_on_group(const SparseVector& x, std::span<const double> block,
                           const FeatureGroup& group) {
  auto members = group.members();
  double s = 0.0;
  std::size_t p = 0;
  for (const Feature& f : x) {
    while (p < members.size() && members[p] < f.index) ++p;
    if (p == members.size()) break;
    if (members[p] == f.index) s += block[p] * f.value;
  }
  return s;
}

}  // namespace fgmperf
