#include "transhoi/graphrep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace transhoi {

std::vector<Detection> filter_detections(const std::vector<Detection>& dets, double threshold) {
  std::vector<Detection> out;
  for (const auto& d : dets)
    if (d.score >= threshold) out.push_back(d);
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::map<int, std::vector<std::size_t>> kept_by_label;
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    auto& same = kept_by_label[dets[i].label];
    const bool suppressed = std::any_of(same.begin(), same.end(), [&](std::size_t k) {
      return iou(dets[i].box, dets[k].box) > iou_threshold;
    });
    if (suppressed) continue;
    same.push_back(i);
    kept.push_back(i);
  }
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(dets[i]);
  return out;
}

std::vector<PairIndex> make_pairs(const std::vector<Detection>& dets, int person) {
  std::vector<PairIndex> pairs;
  for (std::size_t h = 0; h < dets.size(); ++h) {
    if (dets[h].label != person) continue;
    for (std::size_t o = 0; o < dets.size(); ++o)
      if (o != h) pairs.push_back({static_cast<int>(h), static_cast<int>(o)});
  }
  return pairs;
}

SpatialVec spatial_features(const BBox& h, const BBox& o, double width, double height) {
  validate(h, "human box");
  validate(o, "object box");
  if (!(width > 0) || !(height > 0)) throw GeometryError("image size must be positive");
  const double image_area = width * height;
  return {h.cx() / width,
          h.cy() / height,
          h.width() / width,
          h.height() / height,
          o.cx() / width,
          o.cy() / height,
          o.width() / width,
          o.height() / height,
          (o.cx() - h.cx()) / h.width(),
          (o.cy() - h.cy()) / h.height(),
          std::log(o.width() / h.width()),
          std::log(o.height() / h.height()),
          std::log(o.area() / h.area()),
          iou(h, o),
          h.area() / image_area,
          o.area() / image_area,
          h.width() / h.height(),
          o.width() / o.height()};
}

VectorXr to_vector(const SpatialVec& s) { return Eigen::Map<const VectorXr>(s.data(), kSpatialDim); }

VectorXr appearance_project(const VectorXr& raw, const DenseStack<double>& proj, DenseStack<double>::Trace* trace) {
  return proj.apply(raw, trace);
}

VectorXr node_embed(const VectorXr& f, const VectorXr& entity, const DenseLayer<double>& fc,
                    DenseLayer<double>::Trace* trace) {
  if (fc.in() != f.size() + entity.size())
    throw ShapeError("node_embed: fc expects " + std::to_string(fc.in()) + " inputs, got " +
                     std::to_string(f.size() + entity.size()));
  VectorXr x(f.size() + entity.size());
  x << f, entity;
  return fc.apply(x, trace);
}

VectorXr edge_embed(const SpatialVec& sp, const DenseStack<double>& stack, DenseStack<double>::Trace* trace) {
  return stack.apply(to_vector(sp), trace);
}

void EncoderParams::collect(ParamRefs<double>& out) {
  appearance.collect(out);
  human_fc.collect(out);
  object_fc.collect(out);
  edge.collect(out);
}

namespace {

// rectifier(W [f ; entity] + b) with the appearance columns drawn from one stream and the
// entity columns from another, so the appearance part is identical for every entity width.
DenseLayer<double> make_node_fc(const std::string& name, int node_width, int entity_dim, std::uint64_t base) {
  auto stream = derive_stream(base, name);
  auto entity_stream = derive_stream(base, name + ".entity");
  const Eigen::Index f = node_width, k = entity_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(f + k));
  std::uniform_real_distribution<double> u(-bound, bound);
  MatrixXr w(f, f + k);
  VectorXr b(f);
  for (Eigen::Index r = 0; r < f; ++r)
    for (Eigen::Index c = 0; c < f; ++c) w(r, c) = u(stream);
  for (Eigen::Index r = 0; r < f; ++r)
    for (Eigen::Index c = f; c < f + k; ++c) w(r, c) = u(entity_stream);
  for (Eigen::Index r = 0; r < f; ++r) b[r] = u(stream);
  return DenseLayer<double>(name, std::move(w), std::move(b), Activation::rectifier);
}

}  // namespace

EncoderParams make_encoder(int feature_dim, int node_width, int edge_width, int entity_dim, std::mt19937_64& rng) {
  const std::array<Eigen::Index, 3> app{feature_dim, node_width, node_width};
  const std::array<Eigen::Index, 4> edge{kSpatialDim, edge_width, edge_width, edge_width};
  const std::uint64_t base = rng();
  EncoderParams e;
  auto app_rng = derive_stream(base, "appearance");
  auto edge_rng = derive_stream(base, "edge");
  e.appearance = make_dense_stack<double>("appearance", app, Activation::rectifier, Activation::none, app_rng);
  e.human_fc = make_node_fc("human_fc", node_width, entity_dim, base);
  e.object_fc = make_node_fc("object_fc", node_width, entity_dim, base);
  e.edge = make_dense_stack<double>("edge", edge, Activation::rectifier, Activation::none, edge_rng);
  return e;
}

GraphBatch encode_scene(const std::vector<Detection>& dets, double width, double height, int person,
                        const EncoderParams& enc, const TransHParams* kge, EncoderTrace* trace) {
  const Eigen::Index node_width = enc.human_fc.out();
  const auto entity_of = [&](int label) -> VectorXr {
    if (!kge) return VectorXr(0);
    if (label < 0 || label >= kge->num_entities()) throw VocabError("detection label outside the entity table");
    return kge->entity.value.row(label);
  };

  GraphBatch batch;
  std::vector<VectorXr> appearance(dets.size());
  if (trace) {
    *trace = EncoderTrace{};
    trace->appearance.resize(dets.size());
  }
  for (std::size_t i = 0; i < dets.size(); ++i)
    appearance[i] = appearance_project(dets[i].feature, enc.appearance, trace ? &trace->appearance[i] : nullptr);

  std::vector<int> human_row(dets.size(), -1);
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (dets[i].label == person) {
      human_row[i] = static_cast<int>(batch.human_detection.size());
      batch.human_detection.push_back(static_cast<int>(i));
    }
  for (std::size_t i = 0; i < dets.size(); ++i) batch.object_detection.push_back(static_cast<int>(i));

  batch.humans.resize(static_cast<Eigen::Index>(batch.human_detection.size()), node_width);
  batch.objects.resize(static_cast<Eigen::Index>(dets.size()), node_width);
  if (trace) {
    trace->human_fc.resize(batch.human_detection.size());
    trace->object_fc.resize(dets.size());
  }
  for (std::size_t r = 0; r < batch.human_detection.size(); ++r) {
    const int det = batch.human_detection[r];
    batch.humans.row(static_cast<Eigen::Index>(r)) =
        node_embed(appearance[static_cast<std::size_t>(det)], entity_of(person), enc.human_fc,
                   trace ? &trace->human_fc[r] : nullptr);
    if (trace) {
      trace->human_detection.push_back(det);
      trace->human_entity.push_back(person);
    }
  }
  for (std::size_t r = 0; r < dets.size(); ++r) {
    batch.objects.row(static_cast<Eigen::Index>(r)) =
        node_embed(appearance[r], entity_of(dets[r].label), enc.object_fc, trace ? &trace->object_fc[r] : nullptr);
    if (trace) trace->object_entity.push_back(dets[r].label);
  }

  const auto pairs = make_pairs(dets, person);
  if (trace) trace->edge.resize(pairs.size());
  batch.pairs.reserve(pairs.size());
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& p = pairs[j];
    const auto& dh = dets[static_cast<std::size_t>(p.human)];
    const auto& dobj = dets[static_cast<std::size_t>(p.object)];
    GraphPair g;
    g.human = human_row[static_cast<std::size_t>(p.human)];
    g.object = p.object;
    g.edge = edge_embed(spatial_features(dh.box, dobj.box, width, height), enc.edge,
                        trace ? &trace->edge[j] : nullptr);
    g.human_score = dh.score;
    g.object_score = dobj.score;
    batch.pairs.push_back(std::move(g));
  }
  return batch;
}

void encode_backward(const EncoderTrace& trace, const MatrixXr& d_humans, const MatrixXr& d_objects,
                     const std::vector<VectorXr>& d_edges, EncoderParams& enc, TransHParams* kge) {
  const Eigen::Index node_width = enc.human_fc.out();
  std::vector<VectorXr> d_appearance(trace.appearance.size(), VectorXr::Zero(node_width));

  const auto split = [&](const VectorXr& dx, std::size_t det, int entity) {
    d_appearance[det] += dx.head(node_width);
    if (kge && dx.size() > node_width) kge->entity.grad.row(entity) += dx.tail(dx.size() - node_width).transpose();
  };

  for (std::size_t r = 0; r < trace.human_fc.size(); ++r) {
    const VectorXr dx = enc.human_fc.backward(trace.human_fc[r], d_humans.row(static_cast<Eigen::Index>(r)).transpose());
    split(dx, static_cast<std::size_t>(trace.human_detection[r]), trace.human_entity[r]);
  }
  for (std::size_t det = 0; det < trace.object_fc.size(); ++det) {
    const VectorXr dx = enc.object_fc.backward(trace.object_fc[det], d_objects.row(static_cast<Eigen::Index>(det)).transpose());
    split(dx, det, trace.object_entity[det]);
  }
  for (std::size_t j = 0; j < d_edges.size(); ++j) enc.edge.backward(trace.edge[j], d_edges[j]);
  for (std::size_t det = 0; det < d_appearance.size(); ++det)
    enc.appearance.backward(trace.appearance[det], d_appearance[det]);
}

}  // namespace transhoi
