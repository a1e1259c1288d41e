#pragma once

// Stage-two input processing: detection filtering and NMS, human/object pairing,
// spatial edge features and the appearance + translational node embeddings.

#include <array>
#include <random>
#include <string>
#include <vector>

#include "transhoi/geometry.hpp"
#include "transhoi/kge.hpp"
#include "transhoi/numkernel.hpp"

namespace transhoi {

struct Detection {
  BBox box;
  double score = 1.0;
  int label = 0;
  VectorXr feature;
};

// One annotated interaction: a human box, an object box and the verbs linking them.
struct GtHoi {
  BBox human;
  BBox object;
  int object_label = 0;
  std::vector<int> verbs;
};

struct Scene {
  std::string id;
  double width = 0;
  double height = 0;
  std::vector<Detection> detections;
  std::vector<GtHoi> ground_truth;
};

inline constexpr double kScoreThreshold = 0.2;
inline constexpr double kNmsThreshold = 0.5;

// Keeps detections with score >= threshold (the boundary value survives).
std::vector<Detection> filter_detections(const std::vector<Detection>& dets, double threshold = kScoreThreshold);

// Class-wise greedy suppression; equal scores keep input order.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold = kNmsThreshold);

struct PairIndex {
  int human = 0;   // detection index with the person label
  int object = 0;  // any other detection index

  bool operator==(const PairIndex&) const = default;
};

std::vector<PairIndex> make_pairs(const std::vector<Detection>& dets, int person);

inline constexpr int kSpatialDim = 18;
using SpatialVec = std::array<double, kSpatialDim>;

// [cx_h/W, cy_h/H, w_h/W, h_h/H, cx_o/W, cy_o/H, w_o/W, h_o/H,
//  (cx_o-cx_h)/w_h, (cy_o-cy_h)/h_h, log(w_o/w_h), log(h_o/h_h), log(area_o/area_h),
//  IoU, area_h/(W*H), area_o/(W*H), w_h/h_h, w_o/h_o]
SpatialVec spatial_features(const BBox& human, const BBox& object, double width, double height);

VectorXr to_vector(const SpatialVec& s);

// Two-layer appearance projection, rectifier between the layers.
VectorXr appearance_project(const VectorXr& raw, const DenseStack<double>& proj,
                            DenseStack<double>::Trace* trace = nullptr);

// rectifier(FC(f ++ entity)); an empty entity vector gives the appearance-only node.
VectorXr node_embed(const VectorXr& f, const VectorXr& entity, const DenseLayer<double>& fc,
                    DenseLayer<double>::Trace* trace = nullptr);

// Three-layer spatial stack, rectifier between the layers.
VectorXr edge_embed(const SpatialVec& sp, const DenseStack<double>& stack,
                    DenseStack<double>::Trace* trace = nullptr);

struct EncoderParams {
  DenseStack<double> appearance;  // D -> F -> F
  DenseLayer<double> human_fc;    // F + k -> F
  DenseLayer<double> object_fc;   // F + k -> F, independent of human_fc
  DenseStack<double> edge;        // 18 -> E -> E -> E

  void collect(ParamRefs<double>& out);
};

EncoderParams make_encoder(int feature_dim, int node_width, int edge_width, int entity_dim, std::mt19937_64& rng);

struct GraphPair {
  int human = 0;   // row in GraphBatch::humans
  int object = 0;  // row in GraphBatch::objects
  VectorXr edge;
  double human_score = 0;
  double object_score = 0;
};

struct GraphBatch {
  MatrixXr humans;   // |H| x F
  MatrixXr objects;  // |O| x F
  std::vector<GraphPair> pairs;
  std::vector<int> human_detection;   // node row -> detection index
  std::vector<int> object_detection;  // node row -> detection index
};

// Forward record needed to push node and edge gradients back into the encoder.
struct EncoderTrace {
  std::vector<DenseStack<double>::Trace> appearance;  // per detection
  std::vector<DenseLayer<double>::Trace> human_fc;    // per human node
  std::vector<DenseLayer<double>::Trace> object_fc;   // per object node
  std::vector<DenseStack<double>::Trace> edge;        // per pair
  std::vector<int> human_detection;                   // detection index per human node
  std::vector<int> human_entity;                      // entity row per human node
  std::vector<int> object_entity;
};

// Builds nodes and edges for already filtered detections. Humans are the person
// detections, objects are all detections. `kge` may be null for the appearance-only
// ablation, in which case the FC layers take F inputs.
GraphBatch encode_scene(const std::vector<Detection>& dets, double width, double height, int person,
                        const EncoderParams& enc, const TransHParams* kge, EncoderTrace* trace = nullptr);

// Accumulates encoder (and entity) gradients given dL/d nodes and dL/d edges.
void encode_backward(const EncoderTrace& trace, const MatrixXr& d_humans, const MatrixXr& d_objects,
                     const std::vector<VectorXr>& d_edges, EncoderParams& enc, TransHParams* kge);

}  // namespace transhoi
