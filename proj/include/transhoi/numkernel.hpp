#pragma once

// Dense numeric kernel: row-major Eigen matrices, dense layers with explicit
// forward traces and backward passes, the binary focal loss, AdamW with
// decoupled weight decay, and central finite-difference gradient checking.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "transhoi/error.hpp"

namespace transhoi {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXr = Matrix<double>;
using VectorXr = Vector<double>;

enum class Activation { none, rectifier, logistic };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::rectifier: return "rectifier";
    case Activation::logistic: return "logistic";
  }
  return "none";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "none") return Activation::none;
  if (s == "rectifier") return Activation::rectifier;
  if (s == "logistic") return Activation::logistic;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

template <typename Scalar>
Scalar logistic(Scalar z) {
  // Split on sign so exp never overflows.
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

template <typename Derived>
Vector<typename Derived::Scalar> activation_apply(Activation kind,
                                                  const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  switch (kind) {
    case Activation::rectifier: return x.cwiseMax(Scalar(0));
    case Activation::logistic: return x.unaryExpr([](Scalar v) { return logistic(v); });
    case Activation::none: break;
  }
  return x;
}

// Gradient of the activation expressed through its output y.
template <typename Scalar>
Vector<Scalar> activation_backward(Activation kind, const Vector<Scalar>& y,
                                   const Vector<Scalar>& dy) {
  switch (kind) {
    case Activation::rectifier:
      return (y.array() > Scalar(0)).select(dy, Vector<Scalar>::Zero(dy.size()));
    case Activation::logistic: return dy.cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix()));
    case Activation::none: break;
  }
  return dy;
}

template <typename Scalar>
struct Param {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Param() = default;
  Param(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
using ParamRefs = std::vector<Param<Scalar>*>;

template <typename Scalar>
struct DenseLayer {
  Param<Scalar> weight;  // out x in
  Param<Scalar> bias;    // out x 1
  Activation activation = Activation::none;

  // Values kept from a forward pass for the matching backward pass.
  struct Trace {
    Vector<Scalar> input;
    Vector<Scalar> output;
  };

  DenseLayer() = default;
  DenseLayer(std::string name, Matrix<Scalar> w, Vector<Scalar> b, Activation act)
      : weight(name + ".weight", std::move(w)), bias(name + ".bias", std::move(b)), activation(act) {
    if (bias.value.rows() != weight.value.rows())
      throw ShapeError(name + ": bias length " + std::to_string(bias.value.rows()) +
                       " != weight rows " + std::to_string(weight.value.rows()));
  }

  Eigen::Index in() const { return weight.value.cols(); }
  Eigen::Index out() const { return weight.value.rows(); }

  Vector<Scalar> apply(const Vector<Scalar>& x, Trace* trace = nullptr) const {
    if (x.size() != in())
      throw ShapeError(weight.name + ": input length " + std::to_string(x.size()) + ", expected " +
                       std::to_string(in()));
    Vector<Scalar> y = activation_apply(activation, weight.value * x + bias.value.col(0));
    if (trace) {
      trace->input = x;
      trace->output = y;
    }
    return y;
  }

  // Accumulates dL/dW and dL/db, returns dL/dx.
  Vector<Scalar> backward(const Trace& trace, const Vector<Scalar>& dy) {
    const Vector<Scalar> dz = activation_backward(activation, trace.output, dy);
    weight.grad.noalias() += dz * trace.input.transpose();
    bias.grad.col(0) += dz;
    return weight.value.transpose() * dz;
  }

  void collect(ParamRefs<Scalar>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename Scalar>
Vector<Scalar> dense_apply(const DenseLayer<Scalar>& layer, const Vector<Scalar>& x) {
  return layer.apply(x);
}

// A chain of dense layers. Hidden layers use `hidden`, the final layer its own activation.
template <typename Scalar>
struct DenseStack {
  std::vector<DenseLayer<Scalar>> layers;

  using Trace = std::vector<typename DenseLayer<Scalar>::Trace>;

  Eigen::Index in() const { return layers.front().in(); }
  Eigen::Index out() const { return layers.back().out(); }

  Vector<Scalar> apply(const Vector<Scalar>& x, Trace* trace = nullptr) const {
    if (trace) trace->resize(layers.size());
    Vector<Scalar> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i)
      h = layers[i].apply(h, trace ? &(*trace)[i] : nullptr);
    return h;
  }

  Vector<Scalar> backward(const Trace& trace, const Vector<Scalar>& dy) {
    Vector<Scalar> g = dy;
    for (std::size_t i = layers.size(); i-- > 0;) g = layers[i].backward(trace[i], g);
    return g;
  }

  void collect(ParamRefs<Scalar>& out) {
    for (auto& l : layers) l.collect(out);
  }
};

// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
template <typename Scalar, typename Rng>
DenseLayer<Scalar> make_dense_layer(const std::string& name, Eigen::Index in, Eigen::Index out,
                                    Activation act, Rng& rng) {
  const Scalar bound = Scalar(1) / std::sqrt(Scalar(std::max<Eigen::Index>(in, 1)));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Matrix<Scalar> w(out, in);
  Vector<Scalar> b(out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
  return DenseLayer<Scalar>(name, std::move(w), std::move(b), act);
}

template <typename Scalar, typename Rng>
DenseStack<Scalar> make_dense_stack(const std::string& name, std::span<const Eigen::Index> widths,
                                    Activation hidden, Activation output, Rng& rng) {
  if (widths.size() < 2) throw ShapeError(name + ": a stack needs at least two widths");
  DenseStack<Scalar> s;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    s.layers.push_back(make_dense_layer<Scalar>(name + "." + std::to_string(i), widths[i],
                                                widths[i + 1], last ? output : hidden, rng));
  }
  return s;
}

// Independent generator for a named component: components drawn from the same base
// seed do not shift each other's streams when one of them changes shape.
inline std::mt19937_64 derive_stream(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Binary focal loss

template <typename Scalar>
struct FocalLoss {
  Scalar loss;
  Scalar grad;  // d loss / d prediction
};

inline constexpr double kProbabilityClamp = 1e-7;

template <typename Scalar>
FocalLoss<Scalar> focal_loss(Scalar prediction, bool label, Scalar beta, Scalar gamma) {
  const Scalar lo = Scalar(kProbabilityClamp);
  const Scalar hi = Scalar(1) - lo;
  const bool clamped = !(prediction > lo && prediction < hi);
  const Scalar p = std::clamp(prediction, lo, hi);
  FocalLoss<Scalar> r{};
  if (label) {
    const Scalar q = Scalar(1) - p;
    r.loss = -beta * std::pow(q, gamma) * std::log(p);
    r.grad = beta * (gamma * std::pow(q, gamma - 1) * std::log(p) - std::pow(q, gamma) / p);
  } else {
    const Scalar q = Scalar(1) - p;
    r.loss = -(Scalar(1) - beta) * std::pow(p, gamma) * std::log(q);
    r.grad = -(Scalar(1) - beta) * (gamma * std::pow(p, gamma - 1) * std::log(q) - std::pow(p, gamma) / q);
  }
  if (clamped) r.grad = 0;
  return r;
}

// ---------------------------------------------------------------------------
// AdamW

template <typename Scalar>
struct AdamWConfig {
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
  Scalar weight_decay = 1e-4;
};

template <typename Scalar>
struct AdamWState {
  Matrix<Scalar> first;
  Matrix<Scalar> second;
  long step = 0;

  AdamWState() = default;
  explicit AdamWState(const Param<Scalar>& p)
      : first(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols())),
        second(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols())) {}
};

template <typename Scalar>
void adamw_step(Param<Scalar>& param, AdamWState<Scalar>& state, const AdamWConfig<Scalar>& cfg,
                Scalar lr) {
  if (state.first.rows() != param.value.rows() || state.first.cols() != param.value.cols() ||
      state.second.rows() != param.value.rows() || state.second.cols() != param.value.cols())
    throw ShapeError(param.name + ": optimizer state shape does not match parameter");
  if (!param.grad.allFinite()) throw NumericError(param.name + ": non-finite gradient");

  ++state.step;
  state.first = cfg.beta1 * state.first + (Scalar(1) - cfg.beta1) * param.grad;
  state.second = cfg.beta2 * state.second + (Scalar(1) - cfg.beta2) * param.grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(cfg.beta1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(cfg.beta2, Scalar(state.step));

  param.value *= Scalar(1) - lr * cfg.weight_decay;
  param.value.array() -= lr * (state.first.array() / c1) /
                         ((state.second.array() / c2).sqrt() + cfg.epsilon);
}

// Holds one AdamWState per parameter, in the order of the ParamRefs given.
template <typename Scalar>
class AdamW {
 public:
  AdamW(ParamRefs<Scalar> params, AdamWConfig<Scalar> cfg) : params_(std::move(params)), cfg_(cfg) {
    states_.reserve(params_.size());
    for (auto* p : params_) states_.emplace_back(*p);
  }

  void step(Scalar lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) adamw_step(*params_[i], states_[i], cfg_, lr);
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

 private:
  ParamRefs<Scalar> params_;
  std::vector<AdamWState<Scalar>> states_;
  AdamWConfig<Scalar> cfg_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient check

template <typename Scalar>
struct GradCheckResult {
  Scalar max_relative_error = 0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  Scalar worst_analytic = 0;
  Scalar worst_numeric = 0;
  std::size_t coordinates = 0;
  std::size_t kinks = 0;  // coordinates judged against a one-sided difference
};

// Relative error is |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose
// true gradient is (near) zero from being judged on rounding noise alone.
inline constexpr double kGradCheckFloor = 1e-5;

// A coordinate whose forward and backward slopes disagree by more than this (relative)
// sits within eps of a rectifier or hinge kink.
inline constexpr double kKinkThreshold = 1e-4;

// `loss` evaluates the scalar at the current parameter values. `backward` must
// accumulate analytic gradients into the params' grad buffers (they are zeroed first).
//
// The reference is the central difference. Near a kink (forward and backward slopes
// disagree) the step is shrunk up to 1000x and the closest central or one-sided slope seen
// is used instead.
template <typename Scalar>
GradCheckResult<Scalar> grad_check(const ParamRefs<Scalar>& params, const std::function<Scalar()>& loss,
                                   const std::function<void()>& backward, Scalar eps = 1e-5,
                                   Scalar floor = Scalar(kGradCheckFloor)) {
  for (auto* p : params) p->zero_grad();
  backward();
  std::vector<Matrix<Scalar>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);
  const Scalar center = loss();

  const auto rel = [floor](Scalar x, Scalar y) {
    return std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor});
  };

  GradCheckResult<Scalar> r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k]->value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const Scalar saved = value.data()[i];
      const Scalar a = analytic[k].data()[i];
      const auto probe = [&](Scalar h) {
        value.data()[i] = saved + h;
        const Scalar up = loss();
        value.data()[i] = saved - h;
        const Scalar down = loss();
        value.data()[i] = saved;
        return std::array<Scalar, 3>{(up - down) / (2 * h), (up - center) / h, (center - down) / h};
      };

      auto d = probe(eps);
      Scalar numeric = d[0];
      Scalar err = rel(a, numeric);
      // Shrink the step while the interval still straddles a kink.
      bool kink = false;
      for (Scalar h = eps; err > Scalar(0) && rel(d[1], d[2]) > Scalar(kKinkThreshold) && h > eps * Scalar(1e-3);) {
        kink = true;
        for (const Scalar candidate : d)
          if (rel(a, candidate) < err) {
            err = rel(a, candidate);
            numeric = candidate;
          }
        h /= 10;
        d = probe(h);
        if (rel(a, d[0]) < err) {
          err = rel(a, d[0]);
          numeric = d[0];
        }
      }
      if (kink) ++r.kinks;
      ++r.coordinates;
      if (err > r.max_relative_error || !std::isfinite(err)) {
        r.max_relative_error = std::isfinite(err) ? err : std::numeric_limits<Scalar>::infinity();
        r.worst_param = params[k]->name;
        r.worst_index = i;
        r.worst_analytic = a;
        r.worst_numeric = numeric;
      }
    }
  }
  return r;
}

}  // namespace transhoi
