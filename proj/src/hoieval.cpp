#include "transhoi/hoieval.hpp"

#include <algorithm>
#include <numeric>

#include "transhoi/error.hpp"

namespace transhoi {

bool SplitTable::is_rare(const HoiClass& c) const {
  auto it = counts.find(c);
  return it == counts.end() || it->second < kRareThreshold;
}

std::optional<double> average_precision(const std::vector<std::pair<double, bool>>& ranked, int gt_count) {
  if (gt_count <= 0) return ranked.empty() ? std::nullopt : std::optional<double>(0.0);
  if (ranked.empty()) return 0.0;

  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].second) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
  }
  // Running maximum from the tail turns precision into its interpolated envelope.
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0;
  double prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

EvalReport evaluate(const std::vector<std::vector<HoiPrediction>>& predictions,
                    const std::vector<std::vector<HoiInstance>>& ground_truth, const SplitTable& splits,
                    double iou_threshold) {
  if (predictions.size() != ground_truth.size())
    throw ValidationError("evaluate: predictions and ground truth cover different image counts");

  struct Ref {
    double score;
    std::size_t image;
    std::size_t index;
  };
  std::map<HoiClass, std::vector<Ref>> by_class;
  std::map<HoiClass, int> gt_counts;
  for (std::size_t img = 0; img < predictions.size(); ++img) {
    for (std::size_t i = 0; i < predictions[img].size(); ++i) {
      const auto& p = predictions[img][i];
      const HoiClass c{p.object_label, p.verb};
      if (!splits.contains(c))
        throw VocabError("prediction " + std::to_string(i) + " of image " + std::to_string(img) +
                         " has a class outside the class list");
      by_class[c].push_back({p.score, img, i});
    }
    for (const auto& g : ground_truth[img]) {
      const HoiClass c{g.object_label, g.verb};
      if (!splits.contains(c))
        throw VocabError("ground truth of image " + std::to_string(img) + " has a class outside the class list");
      ++gt_counts[c];
    }
  }

  EvalReport report;
  double sum_full = 0, sum_rare = 0, sum_non_rare = 0;
  int n_full = 0, n_rare = 0, n_non_rare = 0;
  for (const auto& [cls, count] : splits.counts) {
    (void)count;
    std::vector<Ref> refs;
    if (auto it = by_class.find(cls); it != by_class.end()) refs = it->second;
    const int gt_count = gt_counts.count(cls) ? gt_counts.at(cls) : 0;

    std::stable_sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) { return a.score > b.score; });

    std::map<std::size_t, std::vector<bool>> claimed;
    std::vector<std::pair<double, bool>> ranked;
    ranked.reserve(refs.size());
    for (const auto& r : refs) {
      const auto& p = predictions[r.image][r.index];
      const auto& gts = ground_truth[r.image];
      auto& used = claimed[r.image];
      used.resize(gts.size(), false);
      int best = -1;
      double best_overlap = -1;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || gts[g].object_label != cls.object || gts[g].verb != cls.verb) continue;
        const double ih = iou(p.human, gts[g].human);
        const double io = iou(p.object, gts[g].object);
        if (!(ih > iou_threshold) || !(io > iou_threshold)) continue;
        const double overlap = std::min(ih, io);
        if (overlap > best_overlap) {
          best_overlap = overlap;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) used[static_cast<std::size_t>(best)] = true;
      ranked.emplace_back(p.score, best >= 0);
    }

    const auto ap = average_precision(ranked, gt_count);
    if (!ap) continue;
    ClassResult cr{cls, *ap, gt_count, static_cast<int>(refs.size()), splits.is_rare(cls)};
    report.classes.push_back(cr);
    sum_full += cr.ap;
    ++n_full;
    if (cr.rare) {
      sum_rare += cr.ap;
      ++n_rare;
    } else {
      sum_non_rare += cr.ap;
      ++n_non_rare;
    }
  }
  if (n_full) report.full = sum_full / n_full;
  if (n_rare) report.rare = sum_rare / n_rare;
  if (n_non_rare) report.non_rare = sum_non_rare / n_non_rare;
  return report;
}

}  // namespace transhoi
