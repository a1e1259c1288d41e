#pragma once

// Dataset files are JSON documents:
//
// {
//   "format_version": 1,
//   "vocab": {"objects": [...], "verbs": [...], "person": "person"},
//   "feature_dim": D,
//   "split_counts": [{"object": "book", "verb": "read", "count": 12}, ...],   (optional)
//   "scenes": [
//     {"id": "...", "split": "train" | "test", "width": W, "height": H,
//      "detections": [{"box": [x1, y1, x2, y2], "score": s, "label": "cup", "feature": [...]}],
//      "ground_truth": [{"human": [...], "object": [...], "object_label": "cup", "verbs": ["hold"]}]}
//   ]
// }
//
// "split" defaults to "train". Without "split_counts" the class list is every class
// seen in any ground truth, counted over the training scenes.

#include <string>
#include <vector>

#include <json.hpp>

#include "transhoi/graphrep.hpp"
#include "transhoi/hoieval.hpp"
#include "transhoi/kge.hpp"

namespace transhoi {

inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
  Vocab vocab;
  int feature_dim = 0;
  SplitTable splits;
  std::vector<Scene> train;
  std::vector<Scene> test;

  // Scenes used by evaluation: the test split, or everything when there is none.
  const std::vector<Scene>& evaluation_scenes() const { return test.empty() ? train : test; }
};

// (person, verb, object) for every verb of every training annotation, deduplicated.
GoldenSet golden_set(const Dataset& dataset);

// Training-instance counts per class over the given scenes.
std::map<HoiClass, int> count_classes(const std::vector<Scene>& scenes);

Dataset parse_dataset(const std::string& text);
Dataset load_dataset(const std::string& path);

nlohmann::ordered_json dataset_to_json(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

// Expands a scene's annotations into one instance per verb.
std::vector<HoiInstance> expand_ground_truth(const Scene& scene);

}  // namespace transhoi
