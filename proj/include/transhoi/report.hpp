#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "transhoi/dataset.hpp"
#include "transhoi/hoieval.hpp"
#include "transhoi/model.hpp"

namespace transhoi {

// Runs inference with the model's lambda_infer over every scene and scores the result.
// Predictions of classes outside the split table are dropped before scoring.
EvalReport evaluate_model(const Model& model, const std::vector<Scene>& scenes, const SplitTable& splits);

std::vector<HoiPrediction> to_predictions(const std::vector<HoiDetection>& dets);

// Structured report: the run configuration, the three means and every per-class AP.
nlohmann::ordered_json report_to_json(const EvalReport& report, const Vocab& vocab, const RunConfig& config,
                                      std::size_t scenes);

// Fixed-width table with one row per model and the Full / Rare / Non-Rare mAP columns (percent).
struct TableRow {
  std::string name;
  EvalReport report;
};
std::string report_table(const std::vector<TableRow>& rows);

std::string format_map(const std::optional<double>& v);

}  // namespace transhoi
