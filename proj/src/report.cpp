#include "transhoi/report.hpp"

#include <algorithm>
#include <cstdio>

namespace transhoi {

namespace {

using nlohmann::ordered_json;

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string pad(const std::string& s, std::size_t width, bool left) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

std::vector<HoiPrediction> to_predictions(const std::vector<HoiDetection>& dets) {
  std::vector<HoiPrediction> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back({d.human, d.object, d.object_label, d.verb, d.score});
  return out;
}

EvalReport evaluate_model(const Model& model, const std::vector<Scene>& scenes, const SplitTable& splits) {
  std::vector<std::vector<HoiPrediction>> preds;
  std::vector<std::vector<HoiInstance>> gts;
  preds.reserve(scenes.size());
  gts.reserve(scenes.size());
  for (const auto& s : scenes) {
    auto p = to_predictions(infer(model, s, model.config.lambda_infer));
    std::erase_if(p, [&](const HoiPrediction& x) { return !splits.contains({x.object_label, x.verb}); });
    preds.push_back(std::move(p));
    gts.push_back(expand_ground_truth(s));
  }
  return evaluate(preds, gts, splits);
}

std::string format_map(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

ordered_json report_to_json(const EvalReport& report, const Vocab& vocab, const RunConfig& config,
                            std::size_t scenes) {
  ordered_json j;
  j["config"] = to_json(config);
  j["scenes"] = scenes;
  j["map"] = {{"full", optional_json(report.full)},
              {"rare", optional_json(report.rare)},
              {"non_rare", optional_json(report.non_rare)}};
  ordered_json classes = ordered_json::array();
  for (const auto& c : report.classes) {
    classes.push_back({{"object", vocab.object_name(c.cls.object)},
                       {"verb", vocab.verb_name(c.cls.verb)},
                       {"rare", c.rare},
                       {"gt", c.gt_count},
                       {"predictions", c.predictions},
                       {"ap", c.ap}});
  }
  j["classes"] = std::move(classes);
  return j;
}

std::string report_table(const std::vector<TableRow>& rows) {
  const std::vector<std::string> headers{"Full(mAP%)", "Rare(mAP%)", "Non-Rare(mAP%)"};
  std::size_t name_width = 5;
  for (const auto& r : rows) name_width = std::max(name_width, r.name.size());
  std::string out = pad("Model", name_width, true);
  for (const auto& h : headers) out += "  " + h;
  out += "\n" + std::string(out.size() - 1, '-') + "\n";
  for (const auto& r : rows) {
    out += pad(r.name, name_width, true);
    const std::optional<double> cells[] = {r.report.full, r.report.rare, r.report.non_rare};
    for (std::size_t i = 0; i < headers.size(); ++i) out += "  " + pad(format_map(cells[i]), headers[i].size(), false);
    out += "\n";
  }
  return out;
}

}  // namespace transhoi
