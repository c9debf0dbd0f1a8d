#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fgmperf/error.hpp"

namespace fgmperf {

/// A selected feature subset d^t: sorted, duplicate-free, 0-based indices.
class FeatureGroup {
 public:
  FeatureGroup() = default;

  explicit FeatureGroup(std::vector<std::size_t> members)
      : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    if (std::adjacent_find(members_.begin(), members_.end()) !=
        members_.end()) {
      throw DataError("feature group contains a duplicate index");
    }
  }

  std::span<const std::size_t> members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::size_t operator[](std::size_t pos) const { return members_[pos]; }

  bool contains(std::size_t feature) const {
    return std::binary_search(members_.begin(), members_.end(), feature);
  }

  friend bool operator==(const FeatureGroup&, const FeatureGroup&) = default;

 private:
  std::vector<std::size_t> members_;
};

}  // namespace fgmperf
