#include "transhoi/model.hpp"

#include <algorithm>
#include <numeric>

namespace transhoi {

ParamRefs<double> Model::params(bool include_kge) {
  ParamRefs<double> out;
  if (include_kge && kge)
    for (auto* p : kge->params()) out.push_back(p);
  encoder.collect(out);
  head.collect(out);
  return out;
}

ParamRefs<double> Model::dense_params() { return params(false); }

void Model::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

Model make_model(const Vocab& vocab, int feature_dim, const RunConfig& config) {
  config.validate();
  if (feature_dim < 1) throw ValidationError("feature dimension must be >= 1");
  Model m;
  m.vocab = vocab;
  m.config = config;
  m.feature_dim = feature_dim;
  // Separate streams keep the dense initialization identical across embedding sizes.
  if (config.embedding_dim > 0) {
    m.kge = init_transh(vocab.num_objects(), vocab.num_verbs(), config.embedding_dim,
                        derive_stream(config.seed, "kge")());
    constrain(*m.kge);
  }
  auto encoder_rng = derive_stream(config.seed, "encoder");
  auto head_rng = derive_stream(config.seed, "head");
  m.encoder = make_encoder(feature_dim, config.node_width, config.edge_width, config.embedding_dim, encoder_rng);
  m.head = make_head(config.node_width, config.edge_width, vocab.num_verbs(), head_rng);
  return m;
}

std::vector<Detection> stage_two_detections(const Scene& scene, const RunConfig& config) {
  return nms(filter_detections(scene.detections, config.score_threshold), config.nms_iou);
}

SceneLoss scene_loss(Model& model, const Scene& scene, double grad_scale, bool accumulate) {
  const auto& cfg = model.config;
  const auto dets = stage_two_detections(scene, cfg);
  const auto pairs = make_pairs(dets, model.vocab.person());
  SceneLoss out;
  out.pairs = pairs.size();
  if (pairs.empty()) return out;

  TransHParams* kge = model.kge ? &*model.kge : nullptr;
  EncoderTrace enc_trace;
  MessagePassTrace mp_trace;
  PairScoreTrace score_trace;
  const GraphBatch batch = encode_scene(dets, scene.width, scene.height, model.vocab.person(), model.encoder, kge,
                                        accumulate ? &enc_trace : nullptr);
  const RefinedNodes refined =
      message_pass(batch, model.head, cfg.message_iterations, accumulate ? &mp_trace : nullptr);
  const auto scores = pair_scores(refined, batch, model.head, accumulate ? &score_trace : nullptr);
  const Targets targets = assign_targets(dets, pairs, scene.ground_truth, model.vocab.num_verbs());
  HeadLoss loss = head_loss(batch, scores, targets, {cfg.focal_beta, cfg.focal_gamma}, cfg.lambda_train);
  out.interaction = loss.interaction;
  out.verbs = loss.verbs;
  if (!accumulate) return out;

  for (auto& d : loss.d_verbs) d *= grad_scale;
  for (auto& d : loss.d_interactiveness) d *= grad_scale;
  const Eigen::Index f = model.config.node_width;
  RefinedNodes d_refined{MatrixXr::Zero(refined.humans.rows(), f), MatrixXr::Zero(refined.objects.rows(), f)};
  NodeGradients grads;
  grads.edges.assign(batch.pairs.size(), VectorXr::Zero(model.config.edge_width));
  pair_scores_backward(batch, score_trace, model.head, loss.d_verbs, loss.d_interactiveness, d_refined, grads.edges);
  message_pass_backward(batch, mp_trace, model.head, d_refined, grads);
  encode_backward(enc_trace, grads.humans, grads.objects, grads.edges, model.encoder, kge);
  return out;
}

double translational_loss(Model& model, const std::vector<Triplet>& positives, const std::vector<Triplet>& negatives,
                          bool accumulate) {
  if (!model.kge || positives.empty()) return 0;
  double loss = margin_loss_and_grads(*model.kge, positives, negatives, model.config.margin, accumulate);
  if (model.config.orthogonality_penalty)
    loss += orthogonality_penalty_and_grads(*model.kge, kOrthogonalityEpsilon, kOrthogonalityWeight, accumulate);
  return loss;
}

void check_compatible(const Model& model, const Scene& scene) {
  for (std::size_t i = 0; i < scene.detections.size(); ++i) {
    const auto& d = scene.detections[i];
    if (!model.vocab.valid_object(d.label))
      throw CompatibilityError("scene '" + scene.id + "' detection " + std::to_string(i) +
                               " has a label outside the checkpoint vocabulary");
    if (d.feature.size() != model.feature_dim)
      throw CompatibilityError("scene '" + scene.id + "' detection " + std::to_string(i) + " has feature length " +
                               std::to_string(d.feature.size()) + ", checkpoint expects " +
                               std::to_string(model.feature_dim));
  }
}

std::vector<PairOutput> pair_outputs(const Model& model, const Scene& scene, double lambda, std::vector<Detection>* kept,
                                     std::vector<PairIndex>* pair_list) {
  check_compatible(model, scene);
  const auto dets = stage_two_detections(scene, model.config);
  const auto pairs = make_pairs(dets, model.vocab.person());
  if (kept) *kept = dets;
  if (pair_list) *pair_list = pairs;
  std::vector<PairOutput> out;
  if (pairs.empty()) return out;

  const TransHParams* kge = model.kge ? &*model.kge : nullptr;
  const GraphBatch batch = encode_scene(dets, scene.width, scene.height, model.vocab.person(), model.encoder, kge);
  const RefinedNodes refined = message_pass(batch, model.head, model.config.message_iterations);
  const auto scores = pair_scores(refined, batch, model.head);
  out.reserve(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    PairOutput o;
    o.verbs = scores[j].verbs;
    o.interactiveness = scores[j].interactiveness;
    o.prior = pair_prior(batch.pairs[j].human_score, batch.pairs[j].object_score, lambda);
    o.fused = fuse(o.prior, o.verbs);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<HoiDetection> infer(const Model& model, const Scene& scene, double lambda, std::size_t top_k,
                                double score_floor) {
  std::vector<Detection> dets;
  std::vector<PairIndex> pairs;
  const auto outputs = pair_outputs(model, scene, lambda, &dets, &pairs);
  std::vector<HoiDetection> out;
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    const auto& h = dets[static_cast<std::size_t>(pairs[j].human)];
    const auto& o = dets[static_cast<std::size_t>(pairs[j].object)];
    for (Eigen::Index v = 0; v < outputs[j].fused.size(); ++v) {
      const double s = outputs[j].fused[v];
      if (!(s > score_floor)) continue;
      out.push_back({h.box, o.box, o.label, static_cast<int>(v), s});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const HoiDetection& a, const HoiDetection& b) { return a.score > b.score; });
  if (top_k > 0 && out.size() > top_k) out.resize(top_k);
  return out;
}

}  // namespace transhoi
