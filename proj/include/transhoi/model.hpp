#pragma once

#include <optional>
#include <random>
#include <vector>

#include "transhoi/config.hpp"
#include "transhoi/graphrep.hpp"
#include "transhoi/head.hpp"
#include "transhoi/kge.hpp"

namespace transhoi {

// Every trainable part of the second stage plus what is needed to rebuild its shapes.
struct Model {
  Vocab vocab;
  RunConfig config;
  int feature_dim = 0;
  std::optional<TransHParams> kge;  // absent when config.embedding_dim == 0
  EncoderParams encoder;
  HeadParams head;

  ParamRefs<double> params(bool include_kge = true);
  ParamRefs<double> dense_params();
  void zero_grad();
};

// Random initialization seeded from config.seed; entity rows are then constrained.
Model make_model(const Vocab& vocab, int feature_dim, const RunConfig& config);

// Detections surviving the score threshold and NMS.
std::vector<Detection> stage_two_detections(const Scene& scene, const RunConfig& config);

struct SceneLoss {
  double interaction = 0;  // L_W
  double verbs = 0;        // L_V
  std::size_t pairs = 0;
};

// Forward pass over one scene in training mode (prior exponent lambda_train). When
// `accumulate` is set, gradients scaled by `grad_scale` are added to every parameter,
// entity rows included.
SceneLoss scene_loss(Model& model, const Scene& scene, double grad_scale = 1.0, bool accumulate = true);

// Margin loss over the golden set with the given negatives (plus the optional
// orthogonality penalty). Zero when the model has no translational part.
double translational_loss(Model& model, const std::vector<Triplet>& positives, const std::vector<Triplet>& negatives,
                          bool accumulate = true);

struct HoiDetection {
  BBox human;
  BBox object;
  int object_label = 0;
  int verb = 0;
  double score = 0;
};

inline constexpr double kScoreFloor = 1e-4;

// Throws CompatibilityError if the scene does not fit the model's vocabulary or feature size.
void check_compatible(const Model& model, const Scene& scene);

// Full pipeline with prior exponent `lambda`; predictions with score above the floor,
// sorted by descending score and truncated to top_k (0 keeps all).
std::vector<HoiDetection> infer(const Model& model, const Scene& scene, double lambda, std::size_t top_k = 0,
                                double score_floor = kScoreFloor);

std::vector<PairOutput> pair_outputs(const Model& model, const Scene& scene, double lambda,
                                     std::vector<Detection>* kept = nullptr, std::vector<PairIndex>* pairs = nullptr);

}  // namespace transhoi
