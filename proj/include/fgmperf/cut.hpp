#pragma once

#include <vector>

#include "fgmperf/contingency.hpp"
#include "fgmperf/data.hpp"

namespace fgmperf {

/// One bundle cut, generated from a most violated labeling y^k.
///
/// `difference` is sum_i (y_i - y^k_i) x_i over all features. The subgradient
/// block of group t is p^k_t = -(1/n) * difference restricted to d^t, stored
/// densely over the group's members.
struct Cut {
  std::vector<int> y_config;
  ContingencyTable table;
  std::vector<Feature> difference;
  std::vector<std::vector<double>> blocks;
  double offset = 0.0;  // q^k = loss(y^k, y) / n
};

}  // namespace fgmperf
