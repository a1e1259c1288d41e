#include "transhoi/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "transhoi/error.hpp"

namespace transhoi {

namespace {

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw ValidationError("config: '" + key + "' " + rule);
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config: '") + key + "' has the wrong type");
  }
}

}  // namespace

void RunConfig::validate() const {
  require(embedding_dim >= 0 && embedding_dim <= 4096, "embedding_dim", "must be in [0, 4096]");
  require(margin > 0, "margin", "must be > 0");
  require(focal_beta >= 0 && focal_beta <= 1, "focal_beta", "must be in [0, 1]");
  require(focal_gamma >= 0, "focal_gamma", "must be >= 0");
  require(lambda_train > 0, "lambda_train", "must be > 0");
  require(lambda_infer > 0, "lambda_infer", "must be > 0");
  require(nms_iou > 0 && nms_iou <= 1, "nms_iou", "must be in (0, 1]");
  require(score_threshold >= 0 && score_threshold <= 1, "score_threshold", "must be in [0, 1]");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(learning_rate > 0, "learning_rate", "must be > 0");
  require(weight_decay >= 0, "weight_decay", "must be >= 0");
  require(node_width >= 1, "node_width", "must be >= 1");
  require(edge_width >= 1, "edge_width", "must be >= 1");
  require(message_iterations >= 0, "message_iterations", "must be >= 0");
  require(kge_pretrain_epochs >= 0, "kge_pretrain_epochs", "must be >= 0");
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["embedding_dim"] = c.embedding_dim;
  j["margin"] = c.margin;
  j["focal_beta"] = c.focal_beta;
  j["focal_gamma"] = c.focal_gamma;
  j["lambda_train"] = c.lambda_train;
  j["lambda_infer"] = c.lambda_infer;
  j["nms_iou"] = c.nms_iou;
  j["score_threshold"] = c.score_threshold;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["node_width"] = c.node_width;
  j["edge_width"] = c.edge_width;
  j["message_iterations"] = c.message_iterations;
  j["seed"] = c.seed;
  j["freeze_kge"] = c.freeze_kge;
  j["orthogonality_penalty"] = c.orthogonality_penalty;
  j["kge_pretrain_epochs"] = c.kge_pretrain_epochs;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> s;
    const auto defaults = to_json(RunConfig{});
    for (const auto& [k, v] : defaults.items()) s.insert(k);
    return s;
  }();
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("config: unknown key '" + k + "'");

  RunConfig c;
  read(j, "embedding_dim", c.embedding_dim);
  read(j, "margin", c.margin);
  read(j, "focal_beta", c.focal_beta);
  read(j, "focal_gamma", c.focal_gamma);
  read(j, "lambda_train", c.lambda_train);
  read(j, "lambda_infer", c.lambda_infer);
  read(j, "nms_iou", c.nms_iou);
  read(j, "score_threshold", c.score_threshold);
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "learning_rate", c.learning_rate);
  read(j, "weight_decay", c.weight_decay);
  read(j, "node_width", c.node_width);
  read(j, "edge_width", c.edge_width);
  read(j, "message_iterations", c.message_iterations);
  read(j, "seed", c.seed);
  read(j, "freeze_kge", c.freeze_kge);
  read(j, "orthogonality_penalty", c.orthogonality_penalty);
  read(j, "kge_pretrain_epochs", c.kge_pretrain_epochs);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void apply_environment(RunConfig& c) {
  const char* s = std::getenv("TMHOI_SEED");
  if (!s || !*s) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw ValidationError("TMHOI_SEED must be a non-negative integer");
  c.seed = v;
}

}  // namespace transhoi
