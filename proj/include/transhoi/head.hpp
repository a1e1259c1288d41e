#pragma once

// Bipartite prediction head over human and object nodes.
//
// One message-passing iteration:
//   m(o -> h) = rectifier(U_oh(x_o ++ e_ho)),  averaged over the partners of h
//   x_h      <- x_h + rectifier(update_h(x_h ++ mean m))
// and symmetrically for objects, both sides reading the pre-update values.
// Nodes without partners pass through unchanged.

#include <random>
#include <vector>

#include "transhoi/graphrep.hpp"
#include "transhoi/numkernel.hpp"

namespace transhoi {

struct HeadParams {
  DenseLayer<double> message_to_human;   // F + E -> F
  DenseLayer<double> message_to_object;  // F + E -> F
  DenseLayer<double> update_human;       // 2F -> F
  DenseLayer<double> update_object;      // 2F -> F
  DenseStack<double> verb_classifier;    // 2F + E -> F -> N, logistic output
  DenseStack<double> interactiveness;    // 2F + E -> F -> 1, logistic output

  void collect(ParamRefs<double>& out);
};

HeadParams make_head(int node_width, int edge_width, int num_verbs, std::mt19937_64& rng);

struct RefinedNodes {
  MatrixXr humans;
  MatrixXr objects;
};

struct MessagePassTrace {
  struct Iteration {
    MatrixXr humans;   // node values entering the iteration
    MatrixXr objects;
    std::vector<DenseLayer<double>::Trace> to_human;   // per pair
    std::vector<DenseLayer<double>::Trace> to_object;  // per pair
    std::vector<DenseLayer<double>::Trace> update_human;   // per human node (unused if isolated)
    std::vector<DenseLayer<double>::Trace> update_object;  // per object node
  };
  std::vector<Iteration> iterations;
  std::vector<int> human_degree;
  std::vector<int> object_degree;
};

RefinedNodes message_pass(const GraphBatch& batch, const HeadParams& params, int iterations = 1,
                          MessagePassTrace* trace = nullptr);

struct NodeGradients {
  MatrixXr humans;
  MatrixXr objects;
  std::vector<VectorXr> edges;  // per pair
};

// Given dL/d refined nodes, accumulates head gradients and returns dL/d input nodes and edges.
// `grads.edges` is accumulated into, so it must be sized to the pair count.
void message_pass_backward(const GraphBatch& batch, const MessagePassTrace& trace, HeadParams& params,
                           const RefinedNodes& d_refined, NodeGradients& grads);

struct PairScores {
  VectorXr verbs;            // c, N probabilities
  double interactiveness = 0;  // w-hat
};

struct PairScoreTrace {
  std::vector<DenseStack<double>::Trace> verbs;
  std::vector<DenseStack<double>::Trace> interactiveness;
};

std::vector<PairScores> pair_scores(const RefinedNodes& nodes, const GraphBatch& batch, const HeadParams& params,
                                    PairScoreTrace* trace = nullptr);

// d_verbs[j] = dL/dc_j, d_interactiveness[j] = dL/dw_j. Accumulates into d_nodes and d_edges.
void pair_scores_backward(const GraphBatch& batch, const PairScoreTrace& trace, HeadParams& params,
                          const std::vector<VectorXr>& d_verbs, const std::vector<double>& d_interactiveness,
                          RefinedNodes& d_nodes, std::vector<VectorXr>& d_edges);

inline constexpr double kPriorExponentTrain = 1.0;
inline constexpr double kPriorExponentInfer = 2.8;

// (s_h)^lambda * (s_o)^lambda
double pair_prior(double human_score, double object_score, double lambda);

// v_i = p * c_i
VectorXr fuse(double prior, const VectorXr& verbs);

struct PairOutput {
  VectorXr verbs;  // c
  double interactiveness = 0;
  double prior = 0;
  VectorXr fused;  // v = p * c
};

struct Targets {
  MatrixXr verbs;        // pairs x N, entries 0/1
  VectorXr interaction;  // pairs, 1 iff the verb row has any 1
};

// A pair gets verb i when some GT interaction has the same object label, both box
// IoUs above the threshold and verb i.
Targets assign_targets(const std::vector<Detection>& dets, const std::vector<PairIndex>& pairs,
                       const std::vector<GtHoi>& ground_truth, int num_verbs, double iou_threshold = 0.5);

struct FocalSettings {
  double beta = 0.5;
  double gamma = 0.2;
};

struct HeadLoss {
  double interaction = 0;  // L_W
  double verbs = 0;        // L_V
  std::vector<VectorXr> d_verbs;           // dL/dc per pair
  std::vector<double> d_interactiveness;   // dL/dw per pair
};

// L_W = sum focal(w_j, W_j); L_V = sum focal(p_j c_ji, V_ji), p computed with `lambda`.
HeadLoss head_loss(const GraphBatch& batch, const std::vector<PairScores>& scores, const Targets& targets,
                   const FocalSettings& focal, double lambda);

double total_loss(double translational, double interaction, double verbs);

}  // namespace transhoi
