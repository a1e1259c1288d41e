#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace transhoi {

struct RunConfig {
  int embedding_dim = 50;  // k; 0 removes the translational feature entirely
  double margin = 4.0;
  double focal_beta = 0.5;
  double focal_gamma = 0.2;
  double lambda_train = 1.0;
  double lambda_infer = 2.8;
  double nms_iou = 0.5;
  double score_threshold = 0.2;
  int epochs = 12;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  int node_width = 64;
  int edge_width = 64;
  int message_iterations = 1;
  std::uint64_t seed = 0;
  bool freeze_kge = false;
  bool orthogonality_penalty = false;
  int kge_pretrain_epochs = 0;  // > 0 runs a KGE-only phase before joint training

  // Throws ValidationError naming the offending key.
  void validate() const;
};

inline constexpr double kOrthogonalityEpsilon = 1e-3;
inline constexpr double kOrthogonalityWeight = 1.0;

nlohmann::ordered_json to_json(const RunConfig& c);

// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::string& path);

// Applies TMHOI_SEED when set.
void apply_environment(RunConfig& c);

}  // namespace transhoi
