// Copyright 2026 The tpvocc Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpvocc/eval.hpp"

#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>

namespace tpvocc {

EvalReport::EvalReport(std::size_t num_classes, std::size_t free_class)
    : num_classes_(num_classes),
      free_class_(free_class),
      confusion_(num_classes * num_classes, 0) {
  if (num_classes < 2) throw ConfigError("evaluation needs at least two classes");
  if (free_class >= num_classes && free_class != kNoFreeClass) {
    throw ConfigError("free class id out of range");
  }
}

std::uint64_t EvalReport::total() const {
  return std::accumulate(confusion_.begin(), confusion_.end(), std::uint64_t{0});
}

void EvalReport::accumulate(const Labels& pred, const Labels& truth,
                            const VisibilityMask& mask) {
  require_shape(pred.shape(), truth.shape(), "evaluate prediction");
  require_shape(mask.visible.shape(), truth.shape(), "evaluate mask");
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (!mask.visible[v]) continue;
    if (truth[v] >= num_classes_ || pred[v] >= num_classes_) {
      throw DataError("evaluate: label out of range at voxel " + std::to_string(v));
    }
    ++confusion_[truth[v] * num_classes_ + pred[v]];
  }
}

void EvalReport::merge(const EvalReport& other) {
  if (other.num_classes_ != num_classes_ || other.free_class_ != free_class_) {
    throw ShapeError("cannot merge reports with different class sets");
  }
  for (std::size_t i = 0; i < confusion_.size(); ++i) confusion_[i] += other.confusion_[i];
}

std::optional<double> EvalReport::iou(std::size_t c) const {
  const std::uint64_t tp = count(c, c);
  std::uint64_t fp = 0, fn = 0;
  for (std::size_t o = 0; o < num_classes_; ++o) {
    if (o == c) continue;
    fn += count(c, o);
    fp += count(o, c);
  }
  const std::uint64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

std::vector<std::optional<double>> EvalReport::per_class_iou() const {
  std::vector<std::optional<double>> out;
  out.reserve(num_classes_);
  for (std::size_t c = 0; c < num_classes_; ++c) {
    if (c != free_class_) out.push_back(iou(c));
  }
  return out;
}

double EvalReport::miou() const {
  if (total() == 0) throw DataError("mIoU of an empty report");
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& v : per_class_iou()) {
    if (v) {
      sum += *v;
      ++present;
    }
  }
  if (present == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(present);
}

std::string EvalReport::to_json(const std::vector<std::string>& names) const {
  nlohmann::json doc;
  const double m = miou();
  doc["miou"] = std::isnan(m) ? nlohmann::json(nullptr) : nlohmann::json(m);
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < num_classes_; ++c) {
    if (c == free_class_) continue;
    std::string name;
    if (c < names.size()) {
      name = names[c];
    } else if (num_classes_ == kNumClasses && c < kClassNames.size()) {
      name = std::string(kClassNames[c]);
    } else {
      name = "class_" + std::to_string(c);
    }
    const auto v = iou(c);
    per[name] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  }
  doc["per_class"] = per;
  doc["visible_voxels"] = total();
  return doc.dump(2);
}

EvalReport evaluate(const Labels& pred, const Labels& truth,
                    const VisibilityMask& mask, std::size_t num_classes,
                    std::size_t free_class) {
  EvalReport r(num_classes, free_class);
  r.accumulate(pred, truth, mask);
  return r;
}

}  // namespace tpvocc
