#include <doctest.h>

#include <cmath>
#include <random>

#include "reference_eval.hpp"
#include "transhoi/error.hpp"
#include "transhoi/hoieval.hpp"

using namespace transhoi;
using transhoi::testing::evaluator_discrepancy;
using transhoi::testing::random_micro_instance;

namespace {

const BBox kH{0, 0, 10, 10}, kO{20, 0, 30, 10};
const BBox kFar{50, 50, 60, 60};

SplitTable one_class(int count = 20) { return {{{{1, 0}, count}}}; }

}  // namespace

TEST_CASE("average precision oracles") {
  CHECK(*average_precision({{0.9, true}, {0.8, true}}, 2) == 1.0);
  CHECK(std::abs(*average_precision({{0.9, true}, {0.8, false}, {0.7, true}}, 2) - 5.0 / 6.0) < 1e-15);
  CHECK(std::abs(5.0 / 6.0 - 0.8333) < 1e-4);
  CHECK(*average_precision({}, 3) == 0.0);
  CHECK(*average_precision({{0.5, false}}, 0) == 0.0);
  CHECK_FALSE(average_precision({}, 0).has_value());
}

TEST_CASE("evaluate on the (TP, FP, TP) case") {
  const std::vector<std::vector<HoiInstance>> gt = {{{kH, kO, 1, 0}, {kFar, kO, 1, 0}}};
  const std::vector<std::vector<HoiPrediction>> pred = {
      {{kH, kO, 1, 0, 0.9}, {kH, kFar, 1, 0, 0.8}, {kFar, kO, 1, 0, 0.7}}};
  const auto r = evaluate(pred, gt, one_class());
  REQUIRE(r.full.has_value());
  CHECK(std::abs(*r.full - 5.0 / 6.0) < 1e-15);
  CHECK(*r.non_rare == *r.full);
  CHECK_FALSE(r.rare.has_value());
}

TEST_CASE("exact predictions give mAP 1 in every split") {
  SplitTable s{{{{1, 0}, 3}, {{1, 1}, 30}}};
  const std::vector<std::vector<HoiInstance>> gt = {{{kH, kO, 1, 0}, {kH, kO, 1, 1}}, {{kFar, kH, 1, 1}}};
  std::vector<std::vector<HoiPrediction>> pred(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (const auto& g : gt[i]) pred[i].push_back({g.human, g.object, g.object_label, g.verb, 1.0});
  const auto r = evaluate(pred, gt, s);
  CHECK(*r.full == 1.0);
  CHECK(*r.rare == 1.0);
  CHECK(*r.non_rare == 1.0);
}

TEST_CASE("a duplicate prediction of one GT becomes a false positive") {
  const std::vector<std::vector<HoiInstance>> gt = {{{kH, kO, 1, 0}}};
  const auto r = evaluate({{{kH, kO, 1, 0, 0.9}, {kH, kO, 1, 0, 0.8}}}, gt, one_class());
  CHECK(*r.full == 1.0);  // the FP comes after full recall
  const auto r2 = evaluate({{{kH, kO, 1, 0, 0.9}, {kH, kO, 1, 0, 0.8}}}, {{{kH, kO, 1, 0}, {kFar, kFar, 1, 0}}},
                           one_class());
  CHECK(*r2.full == 0.5);
}

TEST_CASE("matching needs both boxes and the class") {
  const std::vector<std::vector<HoiInstance>> gt = {{{kH, kO, 1, 0}}};
  // Human IoU 0.5 exactly is not enough.
  CHECK(*evaluate({{{{0, 0, 10, 5}, kO, 1, 0, 0.9}}}, gt, one_class()).full == 0.0);
  CHECK(*evaluate({{{kH, kFar, 1, 0, 0.9}}}, gt, one_class()).full == 0.0);
  SplitTable two{{{{1, 0}, 20}, {{1, 1}, 20}}};
  const auto r = evaluate({{{kH, kO, 1, 1, 0.9}}}, gt, two);
  CHECK(*r.full == 0.0);  // (1,0) misses, (1,1) has a prediction but no GT
  CHECK(r.classes.size() == 2);
}

TEST_CASE("class list handling") {
  CHECK_THROWS_AS(evaluate({{{kH, kO, 2, 0, 0.9}}}, {{}}, one_class()), VocabError);
  // A listed class with neither GT nor predictions is left out of the mean.
  SplitTable two{{{{1, 0}, 20}, {{2, 0}, 20}}};
  const auto r = evaluate({{{kH, kO, 1, 0, 0.9}}}, {{{kH, kO, 1, 0}}}, two);
  CHECK(r.classes.size() == 1);
  CHECK(*r.full == 1.0);
  CHECK(two.is_rare({2, 3}));
  CHECK(SplitTable{{{{1, 0}, 9}}}.is_rare({1, 0}));
  CHECK_FALSE(SplitTable{{{{1, 0}, 10}}}.is_rare({1, 0}));
}

TEST_CASE("library evaluator matches the brute-force reference") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 300; ++t) {
    const auto m = random_micro_instance(rng);
    CHECK(evaluator_discrepancy(m) <= 1e-12);
  }
}

TEST_CASE("evaluation properties") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    auto m = random_micro_instance(rng);
    const auto base = evaluate(m.predictions, m.ground_truth, m.splits);
    if (base.full) {
      CHECK(*base.full >= 0.0);
      CHECK(*base.full <= 1.0);
    }

    // A strictly increasing transform of the scores keeps every AP.
    auto warped = m.predictions;
    for (auto& img : warped)
      for (auto& p : img) p.score = std::exp(3 * p.score) - 7;
    const auto w = evaluate(warped, m.ground_truth, m.splits);
    REQUIRE(w.classes.size() == base.classes.size());
    for (std::size_t i = 0; i < w.classes.size(); ++i) CHECK(w.classes[i].ap == base.classes[i].ap);

    // Appending a false positive below every score never raises any AP.
    auto padded = m.predictions;
    padded[0].push_back({{200, 200, 210, 210}, {200, 200, 210, 210}, 1, 0, -1e9});
    const auto p = evaluate(padded, m.ground_truth, m.splits);
    for (const auto& c : p.classes)
      for (const auto& b : base.classes)
        if (b.cls == c.cls) CHECK(c.ap <= b.ap + 1e-15);
  }
}
