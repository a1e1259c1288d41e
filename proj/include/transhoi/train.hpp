#pragma once

#include <functional>
#include <random>
#include <vector>

#include "transhoi/checkpoint.hpp"
#include "transhoi/config.hpp"
#include "transhoi/kge.hpp"
#include "transhoi/model.hpp"

namespace transhoi {

struct BatchLog {
  int epoch = 0;
  int batch = 0;
  double translational = 0;  // L_T
  double interaction = 0;    // L_W, averaged over the batch's scenes
  double verbs = 0;          // L_V, averaged over the batch's scenes
  double total = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0;
  double max_normal_deviation = 0;
};

struct TrainObserver {
  std::function<void(const BatchLog&)> on_batch;
  std::function<void(const EpochLog&, const Model&)> on_epoch;
};

// Joint training: per batch of scenes, L_T over the golden set with freshly sampled
// negatives plus the scene-averaged L_W and L_V, one AdamW step over every parameter,
// then the hyperplane constraint.
Checkpoint train(const RunConfig& config, const Vocab& vocab, int feature_dim, const std::vector<Scene>& scenes,
                 const GoldenSet& golden, const TrainObserver& observer = {});

struct KgeTrainOptions {
  int epochs = 200;
  double learning_rate = 1e-2;
  double weight_decay = 0;
  double margin = kDefaultMargin;
  bool orthogonality_penalty = false;
  std::uint64_t seed = 0;
};

// Margin-ranking training of the translational model alone. Calls `on_epoch` after the
// constraint has been applied at the end of every epoch.
void train_kge(TransHParams& params, const GoldenSet& golden, const KgeTrainOptions& options,
               const std::function<void(int, const TransHParams&)>& on_epoch = {});

}  // namespace transhoi
