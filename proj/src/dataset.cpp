#include "transhoi/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "transhoi/error.hpp"

namespace transhoi {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return field(j, key, where).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

BBox parse_box(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(where + ": box must be [x1, y1, x2, y2]");
  BBox b;
  try {
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } catch (const json::exception&) {
    throw ValidationError(where + ": box coordinates must be numbers");
  }
  validate(b, where);
  return b;
}

void check_inside(const BBox& b, double w, double h, const std::string& where) {
  if (b.x2 > w || b.y2 > h) throw GeometryError(where + ": box extends beyond the image");
}

template <typename F>
auto with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const VocabError& e) {
    throw VocabError(where + ": " + e.what());
  }
}

Scene parse_scene(const json& j, std::size_t index, const Vocab& vocab, int feature_dim, std::string& split) {
  const std::string where = "scene " + std::to_string(index);
  Scene s;
  s.id = j.contains("id") ? get<std::string>(j, "id", where) : std::to_string(index);
  split = j.contains("split") ? get<std::string>(j, "split", where) : "train";
  if (split != "train" && split != "test") throw ValidationError(where + ": split must be 'train' or 'test'");
  s.width = get<double>(j, "width", where);
  s.height = get<double>(j, "height", where);
  if (!(s.width > 0) || !(s.height > 0)) throw ValidationError(where + ": image size must be positive");

  const json& dets = field(j, "detections", where);
  if (!dets.is_array()) throw ValidationError(where + ": detections must be an array");
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const std::string dw = where + " detection " + std::to_string(i);
    Detection d;
    d.box = parse_box(field(dets[i], "box", dw), dw);
    check_inside(d.box, s.width, s.height, dw);
    d.score = get<double>(dets[i], "score", dw);
    if (!(d.score >= 0 && d.score <= 1)) throw ValidationError(dw + ": score must be in [0, 1]");
    d.label = with_context(dw, [&] { return vocab.object_id(get<std::string>(dets[i], "label", dw)); });
    const auto feature = get<std::vector<double>>(dets[i], "feature", dw);
    if (static_cast<int>(feature.size()) != feature_dim)
      throw ValidationError(dw + ": feature length " + std::to_string(feature.size()) + " != feature_dim " +
                            std::to_string(feature_dim));
    d.feature = Eigen::Map<const VectorXr>(feature.data(), static_cast<Eigen::Index>(feature.size()));
    if (!d.feature.allFinite()) throw ValidationError(dw + ": feature contains non-finite values");
    s.detections.push_back(std::move(d));
  }

  const json& gts = field(j, "ground_truth", where);
  if (!gts.is_array()) throw ValidationError(where + ": ground_truth must be an array");
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const std::string gw = where + " ground_truth " + std::to_string(i);
    GtHoi g;
    g.human = parse_box(field(gts[i], "human", gw), gw + " human");
    g.object = parse_box(field(gts[i], "object", gw), gw + " object");
    check_inside(g.human, s.width, s.height, gw + " human");
    check_inside(g.object, s.width, s.height, gw + " object");
    g.object_label = with_context(gw, [&] { return vocab.object_id(get<std::string>(gts[i], "object_label", gw)); });
    for (const auto& name : get<std::vector<std::string>>(gts[i], "verbs", gw))
      g.verbs.push_back(with_context(gw, [&] { return vocab.verb_id(name); }));
    if (g.verbs.empty()) throw ValidationError(gw + ": at least one verb is required");
    std::sort(g.verbs.begin(), g.verbs.end());
    g.verbs.erase(std::unique(g.verbs.begin(), g.verbs.end()), g.verbs.end());
    s.ground_truth.push_back(std::move(g));
  }
  return s;
}

ordered_json box_json(const BBox& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

}  // namespace

std::map<HoiClass, int> count_classes(const std::vector<Scene>& scenes) {
  std::map<HoiClass, int> counts;
  for (const auto& s : scenes)
    for (const auto& g : s.ground_truth)
      for (int v : g.verbs) ++counts[{g.object_label, v}];
  return counts;
}

GoldenSet golden_set(const Dataset& dataset) {
  GoldenSet golden(dataset.vocab);
  for (const auto& s : dataset.train)
    for (const auto& g : s.ground_truth)
      for (int v : g.verbs) golden.insert({dataset.vocab.person(), v, g.object_label});
  return golden;
}

std::vector<HoiInstance> expand_ground_truth(const Scene& scene) {
  std::vector<HoiInstance> out;
  for (const auto& g : scene.ground_truth)
    for (int v : g.verbs) out.push_back({g.human, g.object, g.object_label, v});
  return out;
}

Dataset parse_dataset(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("dataset parse error at " + line_column(text, e.byte) + ": " + e.what());
  }
  const std::string where = "dataset header";
  if (!root.is_object()) throw ValidationError(where + ": expected a JSON object");
  const int version = get<int>(root, "format_version", where);
  if (version != kDatasetFormatVersion)
    throw CompatibilityError("dataset format version " + std::to_string(version) + " is not supported");

  Dataset d;
  const json& vocab = field(root, "vocab", where);
  d.vocab = Vocab(get<std::vector<std::string>>(vocab, "objects", where),
                  get<std::vector<std::string>>(vocab, "verbs", where),
                  vocab.contains("person") ? get<std::string>(vocab, "person", where) : "person");
  d.feature_dim = get<int>(root, "feature_dim", where);
  if (d.feature_dim < 1) throw ValidationError(where + ": feature_dim must be >= 1");

  const json& scenes = field(root, "scenes", where);
  if (!scenes.is_array()) throw ValidationError(where + ": scenes must be an array");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::string split;
    Scene s = parse_scene(scenes[i], i, d.vocab, d.feature_dim, split);
    (split == "test" ? d.test : d.train).push_back(std::move(s));
  }

  if (root.contains("split_counts")) {
    const json& counts = root.at("split_counts");
    if (!counts.is_array()) throw ValidationError(where + ": split_counts must be an array");
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const std::string cw = "split_counts " + std::to_string(i);
      const HoiClass c{with_context(cw, [&] { return d.vocab.object_id(get<std::string>(counts[i], "object", cw)); }),
                       with_context(cw, [&] { return d.vocab.verb_id(get<std::string>(counts[i], "verb", cw)); })};
      const int n = get<int>(counts[i], "count", cw);
      if (n < 0) throw ValidationError(cw + ": count must be >= 0");
      if (!d.splits.counts.emplace(c, n).second) throw ValidationError(cw + ": duplicate class");
    }
    for (const auto* part : {&d.train, &d.test})
      for (const auto& [c, n] : count_classes(*part))
        if (!d.splits.contains(c))
          throw VocabError("ground-truth class (" + d.vocab.object_name(c.object) + ", " + d.vocab.verb_name(c.verb) +
                           ") is missing from split_counts");
  } else {
    for (const auto& [c, n] : count_classes(d.test)) d.splits.counts[c] = 0;
    for (const auto& [c, n] : count_classes(d.train)) d.splits.counts[c] = n;
  }
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

nlohmann::ordered_json dataset_to_json(const Dataset& d) {
  ordered_json root;
  root["format_version"] = kDatasetFormatVersion;
  root["vocab"] = {{"objects", d.vocab.objects()},
                   {"verbs", d.vocab.verbs()},
                   {"person", d.vocab.object_name(d.vocab.person())}};
  root["feature_dim"] = d.feature_dim;
  ordered_json counts = ordered_json::array();
  for (const auto& [c, n] : d.splits.counts)
    counts.push_back({{"object", d.vocab.object_name(c.object)}, {"verb", d.vocab.verb_name(c.verb)}, {"count", n}});
  root["split_counts"] = std::move(counts);

  ordered_json scenes = ordered_json::array();
  const auto emit = [&](const Scene& s, const char* split) {
    ordered_json js;
    js["id"] = s.id;
    js["split"] = split;
    js["width"] = s.width;
    js["height"] = s.height;
    ordered_json dets = ordered_json::array();
    for (const auto& det : s.detections) {
      ordered_json jd;
      jd["box"] = box_json(det.box);
      jd["score"] = det.score;
      jd["label"] = d.vocab.object_name(det.label);
      jd["feature"] = std::vector<double>(det.feature.data(), det.feature.data() + det.feature.size());
      dets.push_back(std::move(jd));
    }
    js["detections"] = std::move(dets);
    ordered_json gts = ordered_json::array();
    for (const auto& g : s.ground_truth) {
      ordered_json jg;
      jg["human"] = box_json(g.human);
      jg["object"] = box_json(g.object);
      jg["object_label"] = d.vocab.object_name(g.object_label);
      std::vector<std::string> verbs;
      for (int v : g.verbs) verbs.push_back(d.vocab.verb_name(v));
      jg["verbs"] = verbs;
      gts.push_back(std::move(jg));
    }
    js["ground_truth"] = std::move(gts);
    scenes.push_back(std::move(js));
  };
  for (const auto& s : d.train) emit(s, "train");
  for (const auto& s : d.test) emit(s, "test");
  root["scenes"] = std::move(scenes);
  return root;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write dataset '" + path + "'");
  out << dataset_to_json(dataset).dump() << '\n';
}

}  // namespace transhoi
