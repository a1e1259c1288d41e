#pragma once

// Checkpoints are JSON: format version, vocabulary, the RunConfig snapshot, the
// translational parameters, every dense layer and the training metadata. Saving a
// loaded checkpoint reproduces the original bytes.

#include <string>
#include <vector>

#include <json.hpp>

#include "transhoi/model.hpp"

namespace transhoi {

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainingMetadata {
  int epochs = 0;
  std::vector<double> loss_curve;  // mean batch loss per epoch
};

struct Checkpoint {
  Model model;
  TrainingMetadata training;
};

std::vector<DenseLayer<double>*> dense_layers(Model& model);

nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt);
std::string serialize_checkpoint(const Checkpoint& ckpt);

// Throws ParseError on malformed input and CompatibilityError on an unknown version;
// nothing partially built escapes.
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::ordered_json matrix_to_json(const MatrixXr& m);
MatrixXr matrix_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace transhoi
