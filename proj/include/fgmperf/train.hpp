#pragma once

// End-to-end training: configuration, the two-layer run and model assembly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fgmperf/contingency.hpp"
#include "fgmperf/data.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/groups.hpp"
#include "fgmperf/model.hpp"

namespace fgmperf {

struct TrainConfig {
  LossSpec loss = LossSpec::fbeta(1.0);
  /// Resolve k as twice the number of positives (clamped to n).
  bool k_twice_positives = false;
  std::size_t budget = 10;
  /// C = c_scale * n unless c_absolute is set.
  double c_scale = 0.1;
  std::optional<double> c_absolute;
  double eps = 1e-3;
  std::size_t max_outer = 50;
  std::size_t max_cuts = 200;
  double outer_tol = 1e-4;
  /// Recorded for reproducibility; training itself is deterministic.
  std::uint64_t seed = 0;
  bool keep_beta = false;

  void validate() const {
    if (budget == 0) throw ConfigError("budget B must be at least 1");
    if (c_absolute) {
      if (!(*c_absolute > 0.0) || !std::isfinite(*c_absolute)) {
        throw ConfigError("C must be positive");
      }
    } else if (!(c_scale > 0.0) || !std::isfinite(c_scale)) {
      throw ConfigError("C scale must be positive");
    }
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (max_outer == 0) throw ConfigError("max_outer must be at least 1");
    if (max_cuts == 0) throw ConfigError("max_cuts must be at least 1");
    if (outer_tol < 0.0) throw ConfigError("outer_tol must be non-negative");
    if (!k_twice_positives) loss.validate();
  }

  double capacity(std::size_t n) const {
    return c_absolute ? *c_absolute : c_scale * static_cast<double>(n);
  }

  LossSpec resolved_loss(const SparseDataset& ds) const {
    LossSpec spec = loss;
    if (k_twice_positives && spec.uses_k()) {
      spec.k = std::min(2 * ds.positives(), ds.size());
    }
    spec.validate_for(ds.size());
    return spec;
  }
};

struct TrainHooks {
  std::function<void(const InnerTrace&)> on_inner;
  std::function<void(const OuterTrace&)> on_outer;
};

struct TrainResult {
  TrainedModel model;
  OuterStop stop = OuterStop::kMaxOuter;
  bool converged = false;
  std::vector<double> history;
  std::size_t cuts = 0;
  std::size_t qcqp_failures = 0;
};

inline TrainResult train(const SparseDataset& ds, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  ds.require_nondegenerate();
  TwoLayerOptions opt;
  opt.budget = cfg.budget;
  opt.capacity = cfg.capacity(ds.size());
  opt.eps = cfg.eps;
  opt.max_outer = cfg.max_outer;
  opt.max_cuts = cfg.max_cuts;
  opt.outer_tol = cfg.outer_tol;
  opt.on_inner = hooks.on_inner;
  opt.on_outer = hooks.on_outer;
  const LossSpec spec = cfg.resolved_loss(ds);
  TwoLayerResult run = run_two_layer(ds, spec, opt);

  TrainResult out;
  out.model = assemble(run.bundle, ds, cfg.keep_beta);
  ModelMeta& meta = out.model.meta;
  meta.loss = spec;
  meta.budget = cfg.budget;
  meta.capacity = opt.capacity;
  meta.eps = cfg.eps;
  meta.converged = run.inner_converged;
  out.stop = run.stop;
  out.converged = run.inner_converged;
  out.history = run.pool.history;
  out.cuts = run.bundle.cuts.size();
  out.qcqp_failures = run.bundle.qcqp_failures;
  return out;
}

}  // namespace fgmperf
