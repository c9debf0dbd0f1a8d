#pragma once

// Final predictor f(x) = <w ⊙ d~, x> with
//   w = sum_i beta_i x_i,  beta_i = (1/n) sum_k alpha_k (y_i - y^k_i),
//   d~ = sum_t mu_t d^t,
// plus the text format used to store it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fgmperf/bundle.hpp"
#include "fgmperf/contingency.hpp"
#include "fgmperf/data.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"
#include "fgmperf/text.hpp"

namespace fgmperf {

inline constexpr std::string_view kModelHeader = "fgmperf-model";
inline constexpr std::string_view kManifestHeader = "fgmperf-manifest";
inline constexpr int kFormatVersion = 1;

struct ModelMeta {
  LossSpec loss;
  std::size_t budget = 0;
  double capacity = 0.0;
  double eps = 0.0;
  bool converged = false;
  double objective = 0.0;
  std::string positive_class = "+1";
  std::string negative_class = "-1";
  std::size_t dimension = 0;

  friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

struct TrainedModel {
  ModelMeta meta;
  std::vector<FeatureGroup> groups;
  std::vector<double> mu;
  /// (w ⊙ d~)_j, sorted by index, zeros omitted.
  std::vector<Feature> weights;
  /// Per-example coefficients, kept only on request.
  std::optional<std::vector<double>> beta;

  double score(const SparseVector& x) const {
    double s = 0.0;
    auto w = weights.begin();
    for (const Feature& f : x) {
      while (w != weights.end() && w->index < f.index) ++w;
      if (w == weights.end()) break;
      if (w->index == f.index) s += w->value * f.value;
    }
    return s;
  }

  /// sign(score) with 0 mapped to +1.
  int label(const SparseVector& x) const { return score(x) >= 0.0 ? 1 : -1; }

  /// Number of features with a non-zero effective weight.
  std::size_t selected_count() const { return weights.size(); }

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

inline double predict_score(const TrainedModel& model, const SparseVector& x) {
  return model.score(x);
}

inline int predict_label(const TrainedModel& model, const SparseVector& x) {
  return model.label(x);
}

/// Builds the model from the bundle's best iterate.
inline TrainedModel assemble(const BundleState& state, const SparseDataset& ds,
                             bool keep_beta = false) {
  const IterateSnapshot& best = state.best;
  if (!std::isfinite(best.objective)) {
    throw ConfigError("bundle has not been run");
  }
  const std::size_t n = ds.size();
  const std::size_t T = state.groups.size();

  TrainedModel model;
  model.groups = state.groups;
  model.mu.assign(T, 0.0);
  for (std::size_t t = 0; t < T && t < static_cast<std::size_t>(best.mu.size()); ++t) {
    model.mu[t] = best.mu(static_cast<Eigen::Index>(t));
  }
  model.meta.dimension = ds.dimension();
  model.meta.converged = state.converged;
  model.meta.objective = best.objective;

  std::vector<double> beta(n, 0.0);
  const auto K = static_cast<std::size_t>(best.alpha.size());
  for (std::size_t k = 0; k < K; ++k) {
    const double a = best.alpha(static_cast<Eigen::Index>(k));
    if (a == 0.0) continue;
    const auto& yk = state.cuts[k].y_config;
    for (std::size_t i = 0; i < n; ++i) {
      beta[i] += a * static_cast<double>(ds.label(i) - yk[i]);
    }
  }
  for (double& b : beta) b /= static_cast<double>(n);

  std::vector<double> mix(ds.dimension(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j : model.groups[t].members()) {
      if (j < mix.size()) mix[j] += model.mu[t];
    }
  }
  std::vector<double> w(ds.dimension(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (beta[i] == 0.0) continue;
    for (const Feature& f : ds.example(i)) {
      if (mix[f.index] != 0.0) w[f.index] += beta[i] * f.value;
    }
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double v = w[j] * mix[j];
    if (v != 0.0) model.weights.push_back({j, v});
  }
  if (keep_beta) model.beta = std::move(beta);
  return model;
}

/// sum_t <w_t, x ⊙ d^t>, the score in the form the inner layer uses.
inline double groupwise_score(std::span<const FeatureGroup> groups,
                              const GroupWeights& weights,
                              const SparseVector& x) {
  double s = 0.0;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    s += dot_on_group(x, weights[t], groups[t]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Text format

inline void save(const TrainedModel& m, std::ostream& out) {
  using text::format_double;
  const ModelMeta& meta = m.meta;
  out << kModelHeader << ' ' << kFormatVersion << '\n';
  out << "loss " << kind_name(meta.loss.kind) << ' '
      << format_double(meta.loss.beta) << ' ' << meta.loss.k << '\n';
  out << "budget " << meta.budget << '\n';
  out << "capacity " << format_double(meta.capacity) << '\n';
  out << "eps " << format_double(meta.eps) << '\n';
  out << "converged " << (meta.converged ? 1 : 0) << '\n';
  out << "objective " << format_double(meta.objective) << '\n';
  out << "classes " << meta.positive_class << ' ' << meta.negative_class << '\n';
  out << "dimension " << meta.dimension << '\n';
  out << "groups " << m.groups.size() << '\n';
  for (std::size_t t = 0; t < m.groups.size(); ++t) {
    out << "group " << format_double(m.mu[t]);
    for (std::size_t j : m.groups[t].members()) out << ' ' << (j + 1);
    out << '\n';
  }
  if (m.beta) {
    out << "beta " << m.beta->size() << '\n';
    for (double b : *m.beta) out << format_double(b) << '\n';
  }
  out << "weights " << m.weights.size() << '\n';
  for (const Feature& f : m.weights) {
    out << (f.index + 1) << ':' << format_double(f.value) << '\n';
  }
  out << "end\n";
}

inline void save(const TrainedModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  save(m, out);
  if (!out) throw DataError("write failed for '" + path + "'");
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next line split on whitespace; throws at end of input.
  std::vector<std::string_view> next() {
    ++line_;
    if (!std::getline(in_, buf_)) fail("unexpected end of file");
    return text::split_ws(buf_);
  }

  /// Next line, which must start with `key` and have `arity` more tokens.
  std::vector<std::string_view> expect(std::string_view key, std::size_t arity) {
    auto tok = next();
    if (tok.empty() || tok[0] != key) fail("expected '" + std::string(key) + "'");
    if (tok.size() != arity + 1) {
      fail("wrong number of fields for '" + std::string(key) + "'");
    }
    return tok;
  }

  double real(std::string_view s) {
    auto v = text::parse_double(s);
    if (!v || !std::isfinite(*v)) fail("bad number '" + std::string(s) + "'");
    return *v;
  }

  std::size_t size(std::string_view s) {
    auto v = text::parse_size(s);
    if (!v) fail("bad count '" + std::string(s) + "'");
    return *v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_, what);
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t line_ = 0;
};

inline void check_header(LineReader& r, std::string_view header) {
  auto tok = r.next();
  if (tok.size() != 2 || tok[0] != header) {
    r.fail("missing '" + std::string(header) + "' header");
  }
  if (tok[1] != std::to_string(kFormatVersion)) {
    r.fail("unsupported format version '" + std::string(tok[1]) + "'");
  }
}

}  // namespace detail

inline TrainedModel load_model(std::istream& in) {
  detail::LineReader r(in);
  detail::check_header(r, kModelHeader);
  TrainedModel m;
  ModelMeta& meta = m.meta;

  auto tok = r.expect("loss", 3);
  try {
    meta.loss = parse_loss(tok[1], r.real(tok[2]), r.size(tok[3]));
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  meta.budget = r.size(r.expect("budget", 1)[1]);
  meta.capacity = r.real(r.expect("capacity", 1)[1]);
  meta.eps = r.real(r.expect("eps", 1)[1]);
  tok = r.expect("converged", 1);
  if (tok[1] != "0" && tok[1] != "1") r.fail("converged must be 0 or 1");
  meta.converged = tok[1] == "1";
  meta.objective = r.real(r.expect("objective", 1)[1]);
  tok = r.expect("classes", 2);
  meta.positive_class = std::string(tok[1]);
  meta.negative_class = std::string(tok[2]);
  meta.dimension = r.size(r.expect("dimension", 1)[1]);

  const std::size_t T = r.size(r.expect("groups", 1)[1]);
  for (std::size_t t = 0; t < T; ++t) {
    tok = r.next();
    if (tok.size() < 2 || tok[0] != "group") r.fail("expected 'group'");
    m.mu.push_back(r.real(tok[1]));
    std::vector<std::size_t> members;
    for (std::size_t p = 2; p < tok.size(); ++p) {
      const std::size_t j = r.size(tok[p]);
      if (j == 0 || j > meta.dimension) r.fail("group member out of range");
      members.push_back(j - 1);
    }
    try {
      m.groups.emplace_back(std::move(members));
    } catch (const DataError& e) {
      r.fail(e.what());
    }
  }

  tok = r.next();
  if (!tok.empty() && tok[0] == "beta") {
    if (tok.size() != 2) r.fail("wrong number of fields for 'beta'");
    const std::size_t n = r.size(tok[1]);
    std::vector<double> beta;
    beta.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = r.next();
      if (v.size() != 1) r.fail("expected one beta value");
      beta.push_back(r.real(v[0]));
    }
    m.beta = std::move(beta);
    tok = r.next();
  }
  if (tok.size() != 2 || tok[0] != "weights") r.fail("expected 'weights'");
  const std::size_t count = r.size(tok[1]);
  for (std::size_t p = 0; p < count; ++p) {
    auto v = r.next();
    if (v.size() != 1) r.fail("expected 'index:weight'");
    const auto colon = v[0].find(':');
    if (colon == std::string_view::npos) r.fail("missing ':'");
    const std::size_t j = r.size(v[0].substr(0, colon));
    if (j == 0 || j > meta.dimension) r.fail("weight index out of range");
    if (!m.weights.empty() && j - 1 <= m.weights.back().index) {
      r.fail("weight indices not increasing");
    }
    m.weights.push_back({j - 1, r.real(v[0].substr(colon + 1))});
  }
  tok = r.next();
  if (tok.size() != 1 || tok[0] != "end") r.fail("expected 'end'");
  return m;
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_model(in);
}

inline std::string to_string(const TrainedModel& m) {
  std::ostringstream out;
  save(m, out);
  return out.str();
}

// ---------------------------------------------------------------------------
// One-vs-rest manifest: one model file per class.

struct ManifestEntry {
  std::string class_token;
  std::string path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline void save_manifest(const std::vector<ManifestEntry>& entries,
                          std::ostream& out) {
  out << kManifestHeader << ' ' << kFormatVersion << '\n';
  out << "classes " << entries.size() << '\n';
  for (const auto& e : entries) out << "class " << e.class_token << ' ' << e.path << '\n';
  out << "end\n";
}

inline std::vector<ManifestEntry> load_manifest(std::istream& in) {
  detail::LineReader r(in);
  detail::check_header(r, kManifestHeader);
  const std::size_t count = r.size(r.expect("classes", 1)[1]);
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto tok = r.expect("class", 2);
    out.push_back({std::string(tok[1]), std::string(tok[2])});
  }
  auto tok = r.next();
  if (tok.size() != 1 || tok[0] != "end") r.fail("expected 'end'");
  return out;
}

/// True when the stream starts with the manifest header.
inline bool is_manifest(std::istream& in) {
  std::string first;
  const auto pos = in.tellg();
  std::getline(in, first);
  in.clear();
  in.seekg(pos);
  const auto tok = text::split_ws(first);
  return tok.size() == 2 && tok[0] == kManifestHeader;
}

}  // namespace fgmperf
