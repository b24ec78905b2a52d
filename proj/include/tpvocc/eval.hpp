// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tpvocc/head.hpp"

namespace tpvocc {

/// Free-class id meaning "every class is semantic".
inline constexpr std::size_t kNoFreeClass = static_cast<std::size_t>(-1);

/// Confusion counts over visible voxels (rows = truth, cols = prediction).
/// The free class is counted but left out of the mIoU mean.
class EvalReport {
 public:
  explicit EvalReport(std::size_t num_classes = kNumClasses,
                      std::size_t free_class = kFreeClass);

  std::size_t num_classes() const { return num_classes_; }
  std::size_t free_class() const { return free_class_; }
  std::uint64_t count(std::size_t truth, std::size_t pred) const {
    return confusion_[truth * num_classes_ + pred];
  }
  const std::vector<std::uint64_t>& confusion() const { return confusion_; }
  std::uint64_t total() const;

  void accumulate(const Labels& pred, const Labels& truth,
                  const VisibilityMask& mask);
  void merge(const EvalReport& other);

  /// IoU of class c, or nullopt when c has no support in truth or
  /// prediction.
  std::optional<double> iou(std::size_t c) const;

  /// IoU for every class except the free one (if any), in class order.
  std::vector<std::optional<double>> per_class_iou() const;

  /// Mean over semantic classes with support. Throws DataError on an empty
  /// report; NaN when no semantic class has support.
  double miou() const;

  /// {"miou": float, "per_class": {name: iou}, "visible_voxels": int}
  std::string to_json(const std::vector<std::string>& names = {}) const;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;

 private:
  std::size_t num_classes_;
  std::size_t free_class_;
  std::vector<std::uint64_t> confusion_;
};

EvalReport evaluate(const Labels& pred, const Labels& truth,
                    const VisibilityMask& mask,
                    std::size_t num_classes = kNumClasses,
                    std::size_t free_class = kFreeClass);

}  // namespace tpvocc
