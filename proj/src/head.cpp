#include "transhoi/head.hpp"

#include <array>
#include <cmath>

namespace transhoi {

void HeadParams::collect(ParamRefs<double>& out) {
  message_to_human.collect(out);
  message_to_object.collect(out);
  update_human.collect(out);
  update_object.collect(out);
  verb_classifier.collect(out);
  interactiveness.collect(out);
}

HeadParams make_head(int node_width, int edge_width, int num_verbs, std::mt19937_64& rng) {
  const Eigen::Index f = node_width;
  const Eigen::Index e = edge_width;
  HeadParams h;
  h.message_to_human = make_dense_layer<double>("message_to_human", f + e, f, Activation::rectifier, rng);
  h.message_to_object = make_dense_layer<double>("message_to_object", f + e, f, Activation::rectifier, rng);
  h.update_human = make_dense_layer<double>("update_human", 2 * f, f, Activation::rectifier, rng);
  h.update_object = make_dense_layer<double>("update_object", 2 * f, f, Activation::rectifier, rng);
  const std::array<Eigen::Index, 3> verbs{2 * f + e, f, num_verbs};
  const std::array<Eigen::Index, 3> inter{2 * f + e, f, 1};
  h.verb_classifier = make_dense_stack<double>("verb_classifier", verbs, Activation::rectifier, Activation::logistic, rng);
  h.interactiveness = make_dense_stack<double>("interactiveness", inter, Activation::rectifier, Activation::logistic, rng);
  return h;
}

namespace {

VectorXr concat(const VectorXr& a, const VectorXr& b) {
  VectorXr x(a.size() + b.size());
  x << a, b;
  return x;
}

VectorXr concat(const VectorXr& a, const VectorXr& b, const VectorXr& c) {
  VectorXr x(a.size() + b.size() + c.size());
  x << a, b, c;
  return x;
}

void check_widths(const GraphBatch& batch, const HeadParams& params) {
  const Eigen::Index f = params.update_human.out();
  if (batch.humans.rows() > 0 && batch.humans.cols() != f) throw ShapeError("message_pass: human node width mismatch");
  if (batch.objects.rows() > 0 && batch.objects.cols() != f) throw ShapeError("message_pass: object node width mismatch");
  for (const auto& p : batch.pairs) {
    if (p.human < 0 || p.human >= batch.humans.rows() || p.object < 0 || p.object >= batch.objects.rows())
      throw ShapeError("message_pass: pair references a missing node");
    if (p.edge.size() + f != params.message_to_human.in()) throw ShapeError("message_pass: edge width mismatch");
  }
}

}  // namespace

RefinedNodes message_pass(const GraphBatch& batch, const HeadParams& params, int iterations, MessagePassTrace* trace) {
  check_widths(batch, params);
  const Eigen::Index f = params.update_human.out();
  const std::size_t num_pairs = batch.pairs.size();

  std::vector<int> human_degree(static_cast<std::size_t>(batch.humans.rows()), 0);
  std::vector<int> object_degree(static_cast<std::size_t>(batch.objects.rows()), 0);
  for (const auto& p : batch.pairs) {
    ++human_degree[static_cast<std::size_t>(p.human)];
    ++object_degree[static_cast<std::size_t>(p.object)];
  }
  if (trace) {
    trace->iterations.assign(static_cast<std::size_t>(std::max(iterations, 0)), {});
    trace->human_degree = human_degree;
    trace->object_degree = object_degree;
  }

  RefinedNodes x{batch.humans, batch.objects};
  for (int it = 0; it < iterations; ++it) {
    MessagePassTrace::Iteration* rec = trace ? &trace->iterations[static_cast<std::size_t>(it)] : nullptr;
    if (rec) {
      rec->humans = x.humans;
      rec->objects = x.objects;
      rec->to_human.resize(num_pairs);
      rec->to_object.resize(num_pairs);
      rec->update_human.resize(human_degree.size());
      rec->update_object.resize(object_degree.size());
    }
    MatrixXr human_mean = MatrixXr::Zero(x.humans.rows(), f);
    MatrixXr object_mean = MatrixXr::Zero(x.objects.rows(), f);
    for (std::size_t j = 0; j < num_pairs; ++j) {
      const auto& p = batch.pairs[j];
      const VectorXr xh = x.humans.row(p.human);
      const VectorXr xo = x.objects.row(p.object);
      human_mean.row(p.human) +=
          params.message_to_human.apply(concat(xo, p.edge), rec ? &rec->to_human[j] : nullptr).transpose() /
          human_degree[static_cast<std::size_t>(p.human)];
      object_mean.row(p.object) +=
          params.message_to_object.apply(concat(xh, p.edge), rec ? &rec->to_object[j] : nullptr).transpose() /
          object_degree[static_cast<std::size_t>(p.object)];
    }
    RefinedNodes next = x;
    for (Eigen::Index h = 0; h < x.humans.rows(); ++h) {
      if (human_degree[static_cast<std::size_t>(h)] == 0) continue;
      next.humans.row(h) += params.update_human
                                .apply(concat(x.humans.row(h).transpose(), human_mean.row(h).transpose()),
                                       rec ? &rec->update_human[static_cast<std::size_t>(h)] : nullptr)
                                .transpose();
    }
    for (Eigen::Index o = 0; o < x.objects.rows(); ++o) {
      if (object_degree[static_cast<std::size_t>(o)] == 0) continue;
      next.objects.row(o) += params.update_object
                                 .apply(concat(x.objects.row(o).transpose(), object_mean.row(o).transpose()),
                                        rec ? &rec->update_object[static_cast<std::size_t>(o)] : nullptr)
                                 .transpose();
    }
    x = std::move(next);
  }
  return x;
}

void message_pass_backward(const GraphBatch& batch, const MessagePassTrace& trace, HeadParams& params,
                           const RefinedNodes& d_refined, NodeGradients& grads) {
  const Eigen::Index f = params.update_human.out();
  if (grads.edges.size() != batch.pairs.size()) throw ShapeError("message_pass_backward: edge gradient count");
  MatrixXr gh = d_refined.humans;
  MatrixXr go = d_refined.objects;
  for (std::size_t it = trace.iterations.size(); it-- > 0;) {
    const auto& rec = trace.iterations[it];
    MatrixXr dh = gh;  // residual path
    MatrixXr dob = go;
    MatrixXr d_human_mean = MatrixXr::Zero(gh.rows(), f);
    MatrixXr d_object_mean = MatrixXr::Zero(go.rows(), f);
    for (Eigen::Index h = 0; h < gh.rows(); ++h) {
      if (trace.human_degree[static_cast<std::size_t>(h)] == 0) continue;
      const VectorXr dz = params.update_human.backward(rec.update_human[static_cast<std::size_t>(h)], gh.row(h).transpose());
      dh.row(h) += dz.head(f).transpose();
      d_human_mean.row(h) = dz.tail(f).transpose();
    }
    for (Eigen::Index o = 0; o < go.rows(); ++o) {
      if (trace.object_degree[static_cast<std::size_t>(o)] == 0) continue;
      const VectorXr dz = params.update_object.backward(rec.update_object[static_cast<std::size_t>(o)], go.row(o).transpose());
      dob.row(o) += dz.head(f).transpose();
      d_object_mean.row(o) = dz.tail(f).transpose();
    }
    for (std::size_t j = 0; j < batch.pairs.size(); ++j) {
      const auto& p = batch.pairs[j];
      const VectorXr dm_h = d_human_mean.row(p.human).transpose() / trace.human_degree[static_cast<std::size_t>(p.human)];
      const VectorXr din_h = params.message_to_human.backward(rec.to_human[j], dm_h);
      dob.row(p.object) += din_h.head(f).transpose();
      grads.edges[j] += din_h.tail(din_h.size() - f);

      const VectorXr dm_o = d_object_mean.row(p.object).transpose() / trace.object_degree[static_cast<std::size_t>(p.object)];
      const VectorXr din_o = params.message_to_object.backward(rec.to_object[j], dm_o);
      dh.row(p.human) += din_o.head(f).transpose();
      grads.edges[j] += din_o.tail(din_o.size() - f);
    }
    gh = std::move(dh);
    go = std::move(dob);
  }
  grads.humans = std::move(gh);
  grads.objects = std::move(go);
}

std::vector<PairScores> pair_scores(const RefinedNodes& nodes, const GraphBatch& batch, const HeadParams& params,
                                    PairScoreTrace* trace) {
  std::vector<PairScores> out;
  out.reserve(batch.pairs.size());
  if (trace) {
    trace->verbs.assign(batch.pairs.size(), {});
    trace->interactiveness.assign(batch.pairs.size(), {});
  }
  for (std::size_t j = 0; j < batch.pairs.size(); ++j) {
    const auto& p = batch.pairs[j];
    const VectorXr z = concat(nodes.humans.row(p.human).transpose(), nodes.objects.row(p.object).transpose(), p.edge);
    PairScores s;
    s.verbs = params.verb_classifier.apply(z, trace ? &trace->verbs[j] : nullptr);
    s.interactiveness = params.interactiveness.apply(z, trace ? &trace->interactiveness[j] : nullptr)[0];
    out.push_back(std::move(s));
  }
  return out;
}

void pair_scores_backward(const GraphBatch& batch, const PairScoreTrace& trace, HeadParams& params,
                          const std::vector<VectorXr>& d_verbs, const std::vector<double>& d_interactiveness,
                          RefinedNodes& d_nodes, std::vector<VectorXr>& d_edges) {
  const Eigen::Index f = params.update_human.out();
  for (std::size_t j = 0; j < batch.pairs.size(); ++j) {
    const auto& p = batch.pairs[j];
    VectorXr dz = params.verb_classifier.backward(trace.verbs[j], d_verbs[j]);
    dz += params.interactiveness.backward(trace.interactiveness[j], VectorXr::Constant(1, d_interactiveness[j]));
    d_nodes.humans.row(p.human) += dz.head(f).transpose();
    d_nodes.objects.row(p.object) += dz.segment(f, f).transpose();
    d_edges[j] += dz.tail(dz.size() - 2 * f);
  }
}

double pair_prior(double human_score, double object_score, double lambda) {
  return std::pow(human_score, lambda) * std::pow(object_score, lambda);
}

VectorXr fuse(double prior, const VectorXr& verbs) { return prior * verbs; }

Targets assign_targets(const std::vector<Detection>& dets, const std::vector<PairIndex>& pairs,
                       const std::vector<GtHoi>& ground_truth, int num_verbs, double iou_threshold) {
  Targets t;
  t.verbs = MatrixXr::Zero(static_cast<Eigen::Index>(pairs.size()), num_verbs);
  t.interaction = VectorXr::Zero(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& h = dets[static_cast<std::size_t>(pairs[j].human)];
    const auto& o = dets[static_cast<std::size_t>(pairs[j].object)];
    for (const auto& gt : ground_truth) {
      if (gt.object_label != o.label) continue;
      if (!(iou(h.box, gt.human) > iou_threshold) || !(iou(o.box, gt.object) > iou_threshold)) continue;
      for (int v : gt.verbs) {
        if (v < 0 || v >= num_verbs) throw VocabError("ground-truth verb id out of range");
        t.verbs(static_cast<Eigen::Index>(j), v) = 1;
      }
    }
    t.interaction[static_cast<Eigen::Index>(j)] = t.verbs.row(static_cast<Eigen::Index>(j)).maxCoeff() > 0 ? 1 : 0;
  }
  return t;
}

HeadLoss head_loss(const GraphBatch& batch, const std::vector<PairScores>& scores, const Targets& targets,
                   const FocalSettings& focal, double lambda) {
  HeadLoss out;
  out.d_verbs.reserve(scores.size());
  out.d_interactiveness.reserve(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const auto& p = batch.pairs[j];
    const auto row = static_cast<Eigen::Index>(j);
    const auto w = focal_loss(scores[j].interactiveness, targets.interaction[row] > 0.5, focal.beta, focal.gamma);
    out.interaction += w.loss;
    out.d_interactiveness.push_back(w.grad);

    const double prior = pair_prior(p.human_score, p.object_score, lambda);
    VectorXr dc(scores[j].verbs.size());
    for (Eigen::Index i = 0; i < dc.size(); ++i) {
      const auto v = focal_loss(prior * scores[j].verbs[i], targets.verbs(row, i) > 0.5, focal.beta, focal.gamma);
      out.verbs += v.loss;
      dc[i] = v.grad * prior;
    }
    out.d_verbs.push_back(std::move(dc));
  }
  return out;
}

double total_loss(double translational, double interaction, double verbs) { return translational + interaction + verbs; }

}  // namespace transhoi
