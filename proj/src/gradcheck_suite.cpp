#include "transhoi/gradcheck_suite.hpp"

#include <algorithm>
#include <random>

#include "transhoi/kge.hpp"
#include "transhoi/model.hpp"

namespace transhoi {

namespace {

using Rng = std::mt19937_64;

MatrixXr random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXr m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

VectorXr row_vector(const Param<double>& p, Eigen::Index r = 0) { return p.value.row(r).transpose(); }

GradCheckCase run(const std::string& name, const ParamRefs<double>& params, const std::function<double()>& loss,
                  const std::function<void()>& backward) {
  const auto r = grad_check<double>(params, loss, backward);
  GradCheckCase c{name, r.max_relative_error, r.coordinates, r.kinks, r.worst_param, r.worst_analytic, r.worst_numeric};
  return c;
}

GradCheckCase dense_stack_case(Rng& rng) {
  const Eigen::Index widths[] = {5, 7, 6, 3};
  auto stack = make_dense_stack<double>("stack", widths, Activation::rectifier, Activation::logistic, rng);
  Param<double> x("input", random_matrix(5, 1, rng));
  const VectorXr c = random_matrix(3, 1, rng);
  ParamRefs<double> params{&x};
  stack.collect(params);
  return run(
      "dense stack", params, [&] { return c.dot(stack.apply(x.value.col(0))); },
      [&] {
        DenseStack<double>::Trace t;
        stack.apply(x.value.col(0), &t);
        x.grad.col(0) += stack.backward(t, c);
      });
}

GradCheckCase focal_case(Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Param<double> p("prediction", MatrixXr(6, 1));
  for (Eigen::Index i = 0; i < 6; ++i) p.value(i, 0) = u(rng);
  const std::vector<bool> labels{true, false, true, false, true, false};
  const auto total = [&] {
    double s = 0;
    for (Eigen::Index i = 0; i < 6; ++i) s += focal_loss(p.value(i, 0), labels[static_cast<std::size_t>(i)], 0.5, 0.2).loss;
    return s;
  };
  return run("focal loss", {&p}, total, [&] {
    for (Eigen::Index i = 0; i < 6; ++i) p.grad(i, 0) += focal_loss(p.value(i, 0), labels[static_cast<std::size_t>(i)], 0.5, 0.2).grad;
  });
}

struct ToyKg {
  TransHParams params;
  std::vector<Triplet> positives, negatives;
};

ToyKg toy_kg(Rng& rng) {
  ToyKg kg{init_transh(5, 4, 6, rng()), {}, {}};
  constrain(kg.params);
  kg.positives = {{0, 0, 1}, {0, 1, 2}, {0, 2, 3}, {0, 3, 4}};
  kg.negatives = {{0, 1, 1}, {0, 0, 2}, {0, 3, 3}, {0, 3, 1}};
  return kg;
}

GradCheckCase margin_case(Rng& rng) {
  ToyKg kg = toy_kg(rng);
  // Keep every hinge open so the loss is smooth around the test point.
  return run(
      "margin loss", kg.params.params(),
      [&] { return margin_loss_and_grads(kg.params, kg.positives, kg.negatives, 50.0, false); },
      [&] { margin_loss_and_grads(kg.params, kg.positives, kg.negatives, 50.0); });
}

GradCheckCase orthogonality_case(Rng& rng) {
  ToyKg kg = toy_kg(rng);
  return run(
      "orthogonality penalty", kg.params.params(),
      [&] { return orthogonality_penalty_and_grads(kg.params, 1e-3, 1.0, false); },
      [&] { orthogonality_penalty_and_grads(kg.params, 1e-3, 1.0); });
}

GradCheckCase node_embed_case(Rng& rng) {
  const Eigen::Index widths[] = {4, 6, 6};
  auto proj = make_dense_stack<double>("appearance", widths, Activation::rectifier, Activation::none, rng);
  auto fc = make_dense_layer<double>("fc", 6 + 3, 6, Activation::rectifier, rng);
  Param<double> feature("feature", random_matrix(4, 1, rng));
  Param<double> entity("entity", random_matrix(1, 3, rng, 0.5));
  const VectorXr c = random_matrix(6, 1, rng);
  ParamRefs<double> params{&feature, &entity};
  proj.collect(params);
  fc.collect(params);
  return run(
      "node embedding", params,
      [&] { return c.dot(node_embed(appearance_project(feature.value.col(0), proj), row_vector(entity), fc)); },
      [&] {
        DenseStack<double>::Trace pt;
        DenseLayer<double>::Trace ft;
        node_embed(appearance_project(feature.value.col(0), proj, &pt), row_vector(entity), fc, &ft);
        const VectorXr dx = fc.backward(ft, c);
        entity.grad.row(0) += dx.tail(3).transpose();
        feature.grad.col(0) += proj.backward(pt, dx.head(6));
      });
}

GradCheckCase edge_embed_case(Rng& rng) {
  const Eigen::Index widths[] = {kSpatialDim, 5, 5, 5};
  auto stack = make_dense_stack<double>("edge", widths, Activation::rectifier, Activation::none, rng);
  const SpatialVec sp = spatial_features({10, 20, 60, 140}, {40, 90, 120, 150}, 200, 160);
  const VectorXr c = random_matrix(5, 1, rng);
  ParamRefs<double> params;
  stack.collect(params);
  return run(
      "edge embedding", params, [&] { return c.dot(edge_embed(sp, stack)); },
      [&] {
        DenseStack<double>::Trace t;
        edge_embed(sp, stack, &t);
        stack.backward(t, c);
      });
}

GradCheckCase message_pass_case(Rng& rng) {
  const int f = 5, e = 4;
  HeadParams head = make_head(f, e, 3, rng);
  Param<double> humans("humans", random_matrix(2, f, rng));
  Param<double> objects("objects", random_matrix(3, f, rng));  // object 2 has no partner
  Param<double> edges("edges", random_matrix(3, e, rng));
  const std::vector<std::pair<int, int>> links{{0, 0}, {0, 1}, {1, 1}};
  const MatrixXr a = random_matrix(2, f, rng), b = random_matrix(3, f, rng);

  const auto batch = [&] {
    GraphBatch g;
    g.humans = humans.value;
    g.objects = objects.value;
    for (std::size_t j = 0; j < links.size(); ++j)
      g.pairs.push_back({links[j].first, links[j].second, edges.value.row(static_cast<Eigen::Index>(j)).transpose(), 0.9, 0.8});
    return g;
  };
  ParamRefs<double> params{&humans, &objects, &edges};
  head.message_to_human.collect(params);
  head.message_to_object.collect(params);
  head.update_human.collect(params);
  head.update_object.collect(params);
  return run(
      "message passing", params,
      [&] {
        const auto r = message_pass(batch(), head, 2);
        return (r.humans.array() * a.array()).sum() + (r.objects.array() * b.array()).sum();
      },
      [&] {
        const GraphBatch g = batch();
        MessagePassTrace t;
        message_pass(g, head, 2, &t);
        NodeGradients grads;
        grads.edges.assign(links.size(), VectorXr::Zero(e));
        message_pass_backward(g, t, head, {a, b}, grads);
        humans.grad += grads.humans;
        objects.grad += grads.objects;
        for (std::size_t j = 0; j < links.size(); ++j) edges.grad.row(static_cast<Eigen::Index>(j)) += grads.edges[j].transpose();
      });
}

GradCheckCase head_loss_case(Rng& rng) {
  const int f = 5, e = 4, n = 3;
  HeadParams head = make_head(f, e, n, rng);
  GraphBatch g;
  g.humans = random_matrix(2, f, rng);
  g.objects = random_matrix(3, f, rng);
  const std::vector<std::pair<int, int>> links{{0, 1}, {0, 2}, {1, 2}};
  for (const auto& [h, o] : links) g.pairs.push_back({h, o, random_matrix(e, 1, rng), 0.9, 0.6});
  Targets targets{MatrixXr::Zero(3, n), VectorXr::Zero(3)};
  targets.verbs(0, 1) = 1;
  targets.verbs(2, 0) = targets.verbs(2, 2) = 1;
  targets.interaction << 1, 0, 1;
  const RefinedNodes nodes{g.humans, g.objects};
  ParamRefs<double> params;
  head.verb_classifier.collect(params);
  head.interactiveness.collect(params);
  return run(
      "pair head + focal objective", params,
      [&] {
        const auto l = head_loss(g, pair_scores(nodes, g, head), targets, {0.5, 0.2}, 1.0);
        return l.interaction + l.verbs;
      },
      [&] {
        PairScoreTrace t;
        const auto scores = pair_scores(nodes, g, head, &t);
        const auto l = head_loss(g, scores, targets, {0.5, 0.2}, 1.0);
        RefinedNodes dn{MatrixXr::Zero(2, f), MatrixXr::Zero(3, f)};
        std::vector<VectorXr> de(links.size(), VectorXr::Zero(e));
        pair_scores_backward(g, t, head, l.d_verbs, l.d_interactiveness, dn, de);
      });
}

Scene toy_scene(int feature_dim, Rng& rng) {
  Scene s;
  s.id = "gradcheck";
  s.width = 320;
  s.height = 240;
  const auto det = [&](BBox b, double score, int label) {
    s.detections.push_back({b, score, label, random_matrix(feature_dim, 1, rng).col(0)});
  };
  det({10, 20, 60, 150}, 0.95, 0);
  det({180, 30, 230, 170}, 0.85, 0);
  det({50, 100, 140, 180}, 0.9, 1);
  det({240, 120, 300, 200}, 0.7, 2);
  s.ground_truth.push_back({{10, 20, 60, 150}, {50, 100, 140, 180}, 1, {0, 1}});
  s.ground_truth.push_back({{180, 30, 230, 170}, {240, 120, 300, 200}, 2, {2}});
  return s;
}

GradCheckCase full_model_case(Rng& rng) {
  RunConfig cfg;
  cfg.embedding_dim = 4;
  cfg.node_width = 6;
  cfg.edge_width = 5;
  cfg.seed = rng();
  const Vocab vocab({"person", "horse", "cup"}, {"ride", "feed", "hold"});
  Model model = make_model(vocab, 4, cfg);
  const Scene scene = toy_scene(4, rng);
  const std::vector<Triplet> pos{{0, 0, 1}, {0, 1, 1}, {0, 2, 2}};
  const std::vector<Triplet> neg{{0, 2, 1}, {0, 0, 2}, {0, 1, 2}};
  return run(
      "full scene objective", model.params(),
      [&] {
        const auto l = scene_loss(model, scene, 1.0, false);
        return translational_loss(model, pos, neg, false) + l.interaction + l.verbs;
      },
      [&] {
        scene_loss(model, scene, 1.0, true);
        translational_loss(model, pos, neg, true);
      });
}

}  // namespace

double GradCheckSuite::max_relative_error() const {
  double m = 0;
  for (const auto& c : cases) m = std::max(m, c.max_relative_error);
  return m;
}

GradCheckSuite run_gradcheck_suite(std::uint64_t seed) {
  Rng rng(seed);
  GradCheckSuite s;
  s.cases.push_back(dense_stack_case(rng));
  s.cases.push_back(focal_case(rng));
  s.cases.push_back(margin_case(rng));
  s.cases.push_back(orthogonality_case(rng));
  s.cases.push_back(node_embed_case(rng));
  s.cases.push_back(edge_embed_case(rng));
  s.cases.push_back(message_pass_case(rng));
  s.cases.push_back(head_loss_case(rng));
  s.cases.push_back(full_model_case(rng));
  return s;
}

}  // namespace transhoi
