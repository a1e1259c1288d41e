#pragma once

// HOI detection mean average precision under the Default setting: predictions of a
// class are pooled over every image, a prediction is a true positive when both its
// human and object boxes overlap an unclaimed ground truth of the same class by IoU > 0.5.

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "transhoi/geometry.hpp"
#include "transhoi/kge.hpp"

namespace transhoi {

struct HoiClass {
  int object = 0;
  int verb = 0;

  auto operator<=>(const HoiClass&) const = default;
};

inline constexpr int kRareThreshold = 10;

// Training-instance count per class. The keys are the class list.
struct SplitTable {
  std::map<HoiClass, int> counts;

  bool contains(const HoiClass& c) const { return counts.count(c) > 0; }
  bool is_rare(const HoiClass& c) const;
};

struct HoiPrediction {
  BBox human;
  BBox object;
  int object_label = 0;
  int verb = 0;
  double score = 0;
};

struct HoiInstance {
  BBox human;
  BBox object;
  int object_label = 0;
  int verb = 0;
};

struct ClassResult {
  HoiClass cls;
  double ap = 0;
  int gt_count = 0;
  int predictions = 0;
  bool rare = false;
};

struct EvalReport {
  std::vector<ClassResult> classes;  // only classes that enter the means
  std::optional<double> full;
  std::optional<double> rare;
  std::optional<double> non_rare;
};

// All-points interpolated AP over a ranked list (descending score) of true/false-positive
// flags. Returns nullopt when there is nothing to score (no GT and no predictions).
std::optional<double> average_precision(const std::vector<std::pair<double, bool>>& ranked, int gt_count);

// predictions[i] and ground_truth[i] belong to image i. Predictions whose class is not in the
// split table throw VocabError.
EvalReport evaluate(const std::vector<std::vector<HoiPrediction>>& predictions,
                    const std::vector<std::vector<HoiInstance>>& ground_truth, const SplitTable& splits,
                    double iou_threshold = 0.5);

}  // namespace transhoi
