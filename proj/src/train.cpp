#include "transhoi/train.hpp"

#include <algorithm>
#include <numeric>

#include "transhoi/error.hpp"

namespace transhoi {

void train_kge(TransHParams& params, const GoldenSet& golden, const KgeTrainOptions& options,
               const std::function<void(int, const TransHParams&)>& on_epoch) {
  if (golden.empty()) throw TrainingError("translational training needs at least one golden triplet");
  std::mt19937_64 rng(options.seed);
  AdamW<double> opt(params.params(), {0.9, 0.999, 1e-8, options.weight_decay});
  const auto positives = golden.members();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    opt.zero_grad();
    const auto negatives = sample_negatives(golden, positives.size(), rng);
    margin_loss_and_grads(params, positives, negatives, options.margin);
    if (options.orthogonality_penalty)
      orthogonality_penalty_and_grads(params, kOrthogonalityEpsilon, kOrthogonalityWeight);
    opt.step(options.learning_rate);
    constrain(params);
    if (on_epoch) on_epoch(epoch, params);
  }
}

Checkpoint train(const RunConfig& config, const Vocab& vocab, int feature_dim, const std::vector<Scene>& scenes,
                 const GoldenSet& golden, const TrainObserver& observer) {
  config.validate();
  if (scenes.empty()) throw TrainingError("training set is empty");

  Checkpoint ckpt;
  ckpt.model = make_model(vocab, feature_dim, config);
  Model& model = ckpt.model;
  for (const auto& s : scenes) check_compatible(model, s);

  // Batch order and negative sampling draw from their own streams so that the ablation
  // without the translational part sees the same batches.
  auto order_rng = derive_stream(config.seed, "batch-order");
  auto negative_rng = derive_stream(config.seed, "negatives");
  const bool train_kge_params = model.kge && !config.freeze_kge;
  const std::vector<Triplet> positives = golden.members();

  if (train_kge_params && config.kge_pretrain_epochs > 0 && !golden.empty()) {
    KgeTrainOptions pre;
    pre.epochs = config.kge_pretrain_epochs;
    pre.learning_rate = config.learning_rate;
    pre.weight_decay = config.weight_decay;
    pre.margin = config.margin;
    pre.orthogonality_penalty = config.orthogonality_penalty;
    pre.seed = derive_stream(config.seed, "kge-pretrain")();
    train_kge(*model.kge, golden, pre);
  }

  AdamW<double> opt(model.params(train_kge_params), {0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    std::size_t epoch_pairs = 0;
    double epoch_loss = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      model.zero_grad();

      BatchLog log;
      log.epoch = epoch;
      log.batch = batches;
      for (std::size_t i = start; i < end; ++i) {
        const SceneLoss sl = scene_loss(model, scenes[order[i]], scale);
        log.interaction += scale * sl.interaction;
        log.verbs += scale * sl.verbs;
        epoch_pairs += sl.pairs;
      }
      if (model.kge && !positives.empty())
        log.translational = translational_loss(model, positives, sample_negatives(golden, positives.size(), negative_rng));
      log.total = total_loss(log.translational, log.interaction, log.verbs);

      opt.step(config.learning_rate);
      if (train_kge_params) constrain(*model.kge);

      epoch_loss += log.total;
      ++batches;
      if (observer.on_batch) observer.on_batch(log);
    }
    if (epoch_pairs == 0) throw TrainingError("epoch " + std::to_string(epoch) + " produced no human-object pairs");

    EpochLog elog{epoch, epoch_loss / batches, model.kge ? max_normal_deviation(*model.kge) : 0.0};
    ckpt.training.loss_curve.push_back(elog.mean_loss);
    ckpt.training.epochs = epoch + 1;
    if (observer.on_epoch) observer.on_epoch(elog, model);
  }
  return ckpt;
}

}  // namespace transhoi
