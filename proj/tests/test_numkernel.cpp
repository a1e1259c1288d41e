#include <doctest.h>

#include <cmath>
#include <random>

#include "transhoi/numkernel.hpp"

using namespace transhoi;

namespace {

DenseLayer<double> layer(MatrixXr w, VectorXr b, Activation a) { return DenseLayer<double>("l", std::move(w), std::move(b), a); }

MatrixXr mat(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXr m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

VectorXr vec(std::initializer_list<double> v) {
  VectorXr x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

}  // namespace

TEST_CASE("dense_apply hand oracles") {
  CHECK(dense_apply(layer(MatrixXr::Identity(2, 2), VectorXr::Zero(2), Activation::none), vec({3, -1})) == vec({3, -1}));
  CHECK(dense_apply(layer(mat({{1, 2}, {3, 4}}), vec({1, 0}), Activation::none), vec({1, 1})) == vec({4, 7}));
  CHECK(dense_apply(layer(mat({{0.3, -2}, {7, 1}}), vec({5, 5}), Activation::rectifier), VectorXr(VectorXr::Zero(2))) == vec({5, 5}));
}

TEST_CASE("dense layer rejects mismatched shapes") {
  CHECK_THROWS_AS(layer(MatrixXr::Zero(2, 3), VectorXr::Zero(3), Activation::none), ShapeError);
  const auto l = layer(MatrixXr::Zero(2, 3), VectorXr::Zero(2), Activation::none);
  CHECK_THROWS_AS(l.apply(VectorXr::Zero(2)), ShapeError);
}

TEST_CASE("identity layer is the identity map on random inputs") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  const auto l = layer(MatrixXr::Identity(5, 5), VectorXr::Zero(5), Activation::none);
  for (int t = 0; t < 20; ++t) {
    VectorXr x(5);
    for (auto& v : x) v = n(rng);
    CHECK(l.apply(x) == x);
  }
}

TEST_CASE("activations") {
  CHECK(activation_apply(Activation::rectifier, vec({-1, 2})) == vec({0, 2}));
  CHECK(activation_apply(Activation::logistic, vec({0}))[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(activation_apply(Activation::logistic, vec({std::log(3.0)}))[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(800.0) == 1.0);
  CHECK(activation_from_string("rectifier") == Activation::rectifier);
  CHECK_THROWS_AS(activation_from_string("tanh"), ValidationError);
}

TEST_CASE("focal loss oracles") {
  const double expected = -0.5 * std::pow(0.5, 0.2) * std::log(0.5);
  CHECK(std::abs(focal_loss(0.5, true, 0.5, 0.2).loss - expected) < 1e-12);
  CHECK(std::abs(focal_loss(0.5, false, 0.5, 0.2).loss - expected) < 1e-12);
  // The closed form is 0.3017098; the commonly quoted 0.30172 is a loose rounding.
  CHECK(std::abs(expected - 0.30172) < 2e-5);
  CHECK(focal_loss(1.0 - 1e-9, true, 0.5, 0.2).loss < 1e-6);
  // Clamped inputs stay finite and carry no gradient.
  const auto sat = focal_loss(0.0, true, 0.5, 0.2);
  CHECK(std::isfinite(sat.loss));
  CHECK(sat.grad == 0.0);
}

TEST_CASE("focal loss is non-negative and monotone in the prediction") {
  double prev_pos = 1e300, prev_neg = -1.0;
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    const auto pos = focal_loss(p, true, 0.5, 0.2), neg = focal_loss(p, false, 0.5, 0.2);
    CHECK(pos.loss >= 0);
    CHECK(neg.loss >= 0);
    CHECK(pos.loss < prev_pos);
    CHECK(neg.loss > prev_neg);
    CHECK(pos.grad < 0);
    CHECK(neg.grad > 0);
    prev_pos = pos.loss;
    prev_neg = neg.loss;
  }
}

TEST_CASE("adamw oracles") {
  const AdamWConfig<double> cfg{0.9, 0.999, 1e-8, 0.0};
  {
    Param<double> p("p", MatrixXr::Constant(1, 1, 1.5));
    AdamWState<double> s(p);
    adamw_step(p, s, cfg, 0.1);
    CHECK(p.value(0, 0) == 1.5);
  }
  {
    Param<double> p("p", MatrixXr::Constant(1, 1, 1.0));
    AdamWState<double> s(p);
    adamw_step(p, s, AdamWConfig<double>{0.9, 0.999, 1e-8, 0.1}, 0.1);
    CHECK(p.value(0, 0) == doctest::Approx(0.99).epsilon(1e-15));
  }
  {
    Param<double> p("p", MatrixXr::Zero(1, 1));
    p.grad(0, 0) = 1;
    AdamWState<double> s(p);
    adamw_step(p, s, cfg, 0.1);
    CHECK(p.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(s.step == 1);
  }
}

TEST_CASE("adamw is bitwise deterministic and rejects non-finite gradients") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  MatrixXr v(3, 4), g(3, 4);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v.data()[i] = n(rng);
    g.data()[i] = n(rng);
  }
  Param<double> a("a", v), b("b", v);
  AdamWState<double> sa(a), sb(b);
  for (int t = 0; t < 5; ++t) {
    a.grad = g;
    b.grad = g;
    adamw_step(a, sa, AdamWConfig<double>{0.9, 0.999, 1e-8, 1e-4}, 1e-3);
    adamw_step(b, sb, AdamWConfig<double>{0.9, 0.999, 1e-8, 1e-4}, 1e-3);
  }
  CHECK(a.value == b.value);

  Param<double> bad("encoder.weight", MatrixXr::Zero(2, 2));
  bad.grad(1, 1) = std::nan("");
  AdamWState<double> s(bad);
  try {
    adamw_step(bad, s, AdamWConfig<double>{}, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("encoder.weight") != std::string::npos);
  }
}

TEST_CASE("grad_check on simple functions") {
  Param<double> x("x", MatrixXr::Constant(1, 1, 3.0));
  auto r = grad_check<double>({&x}, [&] { return x.value(0, 0) * x.value(0, 0); },
                              [&] { x.grad(0, 0) += 2 * x.value(0, 0); });
  CHECK(r.max_relative_error < 1e-8);

  r = grad_check<double>({&x}, [] { return 4.0; }, [] {});
  CHECK(r.max_relative_error == 0.0);

  Param<double> p("p", MatrixXr::Constant(1, 1, 0.3));
  r = grad_check<double>({&p}, [&] { return focal_loss(p.value(0, 0), true, 0.5, 0.2).loss; },
                         [&] { p.grad(0, 0) += focal_loss(p.value(0, 0), true, 0.5, 0.2).grad; });
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("grad_check catches a wrong gradient") {
  Param<double> x("x", MatrixXr::Constant(1, 1, 2.0));
  const auto r = grad_check<double>({&x}, [&] { return std::pow(x.value(0, 0), 3); },
                                    [&] { x.grad(0, 0) += 2 * x.value(0, 0); });
  CHECK(r.max_relative_error > 0.1);
  CHECK(r.worst_param == "x");
}

TEST_CASE("dense stack backward matches finite differences on random seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index widths[] = {4, 6, 3};
    auto stack = make_dense_stack<double>("s", widths, Activation::rectifier, Activation::logistic, rng);
    VectorXr x = VectorXr::Random(4);
    ParamRefs<double> params;
    stack.collect(params);
    const auto r = grad_check<double>(
        params, [&] { return stack.apply(x).sum(); },
        [&] {
          DenseStack<double>::Trace t;
          stack.apply(x, &t);
          stack.backward(t, VectorXr::Ones(3));
        });
    CHECK(r.max_relative_error <= 1e-4);
  }
}
