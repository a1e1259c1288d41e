#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "transhoi/checkpoint.hpp"
#include "transhoi/dataset.hpp"
#include "transhoi/error.hpp"
#include "transhoi/gradcheck_suite.hpp"
#include "transhoi/report.hpp"
#include "transhoi/synthdata.hpp"
#include "transhoi/train.hpp"

using namespace transhoi;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset example() { return load_dataset(std::string(TRANSHOI_SOURCE_DIR) + "/data/example_dataset.json"); }

RunConfig small_config(int k = 4) {
  RunConfig c;
  c.embedding_dim = k;
  c.node_width = 8;
  c.edge_width = 8;
  c.epochs = 2;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  return c;
}

json scene_json(const std::string& object, const std::string& verb) {
  return {{"width", 100},
          {"height", 100},
          {"detections", json::array({{{"box", {0, 0, 10, 10}}, {"score", 1.0}, {"label", "person"}, {"feature", {0.0}}}})},
          {"ground_truth", json::array({{{"human", {0, 0, 10, 10}},
                                         {"object", {5, 5, 20, 20}},
                                         {"object_label", object},
                                         {"verbs", {verb}}}})}};
}

json tiny_dataset() {
  return {{"format_version", 1},
          {"vocab", {{"objects", {"person", "book", "table"}}, {"verbs", {"read", "hold"}}}},
          {"feature_dim", 1},
          {"scenes", json::array()}};
}

}  // namespace

TEST_CASE("example dataset loads") {
  const auto d = example();
  CHECK(d.train.size() == 2);
  CHECK(d.test.empty());
  CHECK(d.feature_dim == 4);
  const auto g = golden_set(d);
  CHECK(g.size() == 3);
  CHECK(g.contains({0, d.vocab.verb_id("read"), d.vocab.object_id("book")}));
  CHECK(g.contains({0, d.vocab.verb_id("hold"), d.vocab.object_id("book")}));
  CHECK(g.contains({0, d.vocab.verb_id("ride"), d.vocab.object_id("horse")}));
  CHECK(expand_ground_truth(d.train[0]).size() == 2);
}

TEST_CASE("class counting oracle") {
  json j = tiny_dataset();
  for (int i = 0; i < 12; ++i) j["scenes"].push_back(scene_json("book", "read"));
  j["scenes"].push_back(scene_json("table", "read"));
  const auto d = parse_dataset(j.dump());
  const auto g = golden_set(d);
  CHECK(g.size() == 2);
  CHECK(d.splits.counts.at({1, 0}) == 12);
  CHECK(d.splits.counts.at({2, 0}) == 1);
  CHECK_FALSE(d.splits.is_rare({1, 0}));
  CHECK(d.splits.is_rare({2, 0}));
}

TEST_CASE("dataset validation names the record") {
  json j = tiny_dataset();
  j["scenes"].push_back(scene_json("book", "read"));
  j["scenes"].push_back(scene_json("book", "juggle"));
  try {
    parse_dataset(j.dump());
    FAIL("expected VocabError");
  } catch (const VocabError& e) {
    CHECK(std::string(e.what()).find("scene 1") != std::string::npos);
  }
  json bad_box = tiny_dataset();
  bad_box["scenes"].push_back(scene_json("book", "read"));
  bad_box["scenes"][0]["detections"][0]["box"] = {5, 5, 5, 9};
  CHECK_THROWS_AS(parse_dataset(bad_box.dump()), GeometryError);
  json bad_feature = tiny_dataset();
  bad_feature["scenes"].push_back(scene_json("book", "read"));
  bad_feature["scenes"][0]["detections"][0]["feature"] = {1.0, 2.0};
  CHECK_THROWS_AS(parse_dataset(bad_feature.dump()), ValidationError);
  CHECK_THROWS_AS(parse_dataset("{\"format_version\": 1,"), ParseError);
  json v2 = tiny_dataset();
  v2["format_version"] = 2;
  CHECK_THROWS_AS(parse_dataset(v2.dump()), CompatibilityError);
}

TEST_CASE("dataset json round trip") {
  SynthOptions o;
  o.train_scenes = 5;
  o.test_scenes = 3;
  const auto d = synthesize_dataset(o);
  const std::string text = dataset_to_json(d).dump();
  CHECK(dataset_to_json(parse_dataset(text)).dump() == text);
}

TEST_CASE("config handling") {
  CHECK_THROWS_AS(config_from_json(json{{"bogus", 1}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"epochs", "many"}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"learning_rate", -1.0}}).validate(), ValidationError);
  const auto c = config_from_json(json{{"embedding_dim", 0}, {"seed", 9}});
  CHECK(c.embedding_dim == 0);
  CHECK(c.seed == 9);
  CHECK(c.epochs == 12);
  CHECK(config_from_json(json::parse(to_json(c).dump())).seed == 9);

  RunConfig env;
  ::setenv("TMHOI_SEED", "1234", 1);
  apply_environment(env);
  CHECK(env.seed == 1234);
  ::setenv("TMHOI_SEED", "12x", 1);
  CHECK_THROWS_AS(apply_environment(env), ValidationError);
  ::unsetenv("TMHOI_SEED");
  RunConfig untouched;
  apply_environment(untouched);
  CHECK(untouched.seed == 0);
}

TEST_CASE("one epoch on a trivial scene") {
  const auto d = example();
  RunConfig c = small_config();
  c.epochs = 1;
  std::vector<BatchLog> logs;
  TrainObserver obs;
  obs.on_batch = [&](const BatchLog& l) { logs.push_back(l); };
  const auto ckpt = train(c, d.vocab, d.feature_dim, {d.train[0]}, golden_set(d), obs);
  REQUIRE(logs.size() == 1);
  CHECK(std::isfinite(logs[0].total));
  CHECK(logs[0].translational > 0);
  CHECK(std::abs(logs[0].total - (logs[0].translational + logs[0].interaction + logs[0].verbs)) <= 1e-12);
  CHECK(ckpt.training.epochs == 1);
  const std::string bytes = serialize_checkpoint(ckpt);
  CHECK(serialize_checkpoint(parse_checkpoint(bytes)) == bytes);
}

TEST_CASE("training errors") {
  const auto d = example();
  CHECK_THROWS_AS(train(small_config(), d.vocab, d.feature_dim, {}, golden_set(d)), TrainingError);
  Scene lonely = d.train[0];
  lonely.detections.erase(lonely.detections.begin());  // no person left
  CHECK_THROWS_AS(train(small_config(), d.vocab, d.feature_dim, {lonely}, golden_set(d)), TrainingError);
  Scene wide = d.train[0];
  wide.detections[0].feature = VectorXr::Zero(7);
  CHECK_THROWS_AS(train(small_config(), d.vocab, d.feature_dim, {wide}, golden_set(d)), CompatibilityError);
}

TEST_CASE("frozen translational parameters stay bitwise unchanged") {
  const auto d = example();
  RunConfig c = small_config();
  c.freeze_kge = true;
  const Model init = make_model(d.vocab, d.feature_dim, c);
  const auto ckpt = train(c, d.vocab, d.feature_dim, d.train, golden_set(d));
  CHECK(ckpt.model.kge->entity.value == init.kge->entity.value);
  CHECK(ckpt.model.kge->normal.value == init.kge->normal.value);
  CHECK(ckpt.model.kge->translation.value == init.kge->translation.value);
  CHECK(ckpt.model.head.update_human.weight.value != init.head.update_human.weight.value);

  c.freeze_kge = false;
  const auto joint = train(c, d.vocab, d.feature_dim, d.train, golden_set(d));
  CHECK(joint.model.kge->entity.value != init.kge->entity.value);
}

TEST_CASE("normals stay unit length after every epoch") {
  const auto d = example();
  RunConfig c = small_config();
  c.epochs = 5;
  c.learning_rate = 0.05;
  int epochs = 0;
  TrainObserver obs;
  obs.on_epoch = [&](const EpochLog& e, const Model& m) {
    ++epochs;
    CHECK(e.max_normal_deviation <= 1e-6);
    CHECK(max_normal_deviation(*m.kge) <= 1e-6);
  };
  train(c, d.vocab, d.feature_dim, d.train, golden_set(d), obs);
  CHECK(epochs == 5);
}

TEST_CASE("checkpoint format") {
  const auto d = example();
  const auto ckpt = train(small_config(), d.vocab, d.feature_dim, d.train, golden_set(d));
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto back = parse_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.training.loss_curve == ckpt.training.loss_curve);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() / 2)), ParseError);

  json j = json::parse(bytes);
  j["format_version"] = 0;
  CHECK_THROWS_AS(parse_checkpoint(j.dump()), CompatibilityError);
  j["format_version"] = "0";
  CHECK_THROWS_AS(parse_checkpoint(j.dump()), CompatibilityError);

  const auto no_kge = train(small_config(0), d.vocab, d.feature_dim, d.train, golden_set(d));
  CHECK_FALSE(no_kge.model.kge.has_value());
  const std::string nb = serialize_checkpoint(no_kge);
  CHECK(serialize_checkpoint(parse_checkpoint(nb)) == nb);

  const std::string path = "pipeline_test_ckpt.json";
  save_checkpoint(ckpt, path);
  CHECK(read_file(path) == bytes);
  CHECK(serialize_checkpoint(load_checkpoint(path)) == bytes);
  std::remove(path.c_str());
}

TEST_CASE("training and inference are deterministic") {
  SynthOptions o;
  o.train_scenes = 20;
  o.test_scenes = 5;
  const auto d = synthesize_dataset(o);
  const auto a = train(small_config(), d.vocab, d.feature_dim, d.train, golden_set(d));
  const auto b = train(small_config(), d.vocab, d.feature_dim, d.train, golden_set(d));
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  const auto ra = evaluate_model(a.model, d.test, d.splits), rb = evaluate_model(b.model, d.test, d.splits);
  CHECK(report_to_json(ra, d.vocab, a.model.config, d.test.size()).dump() ==
        report_to_json(rb, d.vocab, b.model.config, d.test.size()).dump());
  for (const auto& s : d.test) {
    const auto pa = infer(a.model, s, 2.8, 10), pb = infer(a.model, s, 2.8, 10);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].score == pb[i].score);
    for (std::size_t i = 1; i < pa.size(); ++i) CHECK(pa[i - 1].score >= pa[i].score);
  }
}

TEST_CASE("inference edge cases") {
  const auto d = example();
  const auto ckpt = train(small_config(), d.vocab, d.feature_dim, d.train, golden_set(d));
  Scene no_person = d.train[0];
  no_person.detections.erase(no_person.detections.begin());
  CHECK(infer(ckpt.model, no_person, 2.8).empty());
  Scene wrong = d.train[0];
  wrong.detections[1].label = 99;
  CHECK_THROWS_AS(infer(ckpt.model, wrong, 2.8), CompatibilityError);
  CHECK(infer(ckpt.model, d.train[0], 2.8, 2).size() <= 2);
}

TEST_CASE("report formatting") {
  EvalReport r;
  r.full = 0.2695;
  r.non_rare = 0.5;
  const std::string t = report_table({{"model", r}});
  CHECK(t.find("Full(mAP%)") != std::string::npos);
  CHECK(t.find("Non-Rare(mAP%)") != std::string::npos);
  CHECK(t.find("26.95") != std::string::npos);
  CHECK(format_map(std::nullopt) == "n/a");
  CHECK(format_map(1.0) == "100.00");
}

TEST_CASE("a planted ride-horse interaction ranks in the top three") {
  auto world = generate_world(7, 12, 16, 0.25);
  const int horse = world.vocab.object_id("horse"), ride = world.vocab.verb_id("ride");
  const auto support = world.support(horse);
  world.prior.row(horse).setZero();
  world.prior(horse, ride) = 0.7;
  int others = 0;
  for (int v : support) others += v != ride;
  for (int v : support)
    if (v != ride) world.prior(horse, v) = 0.3 / others;
  world.rules[static_cast<std::size_t>(ride)].kind = SpatialRule::overlap;

  SynthOptions o;
  o.train_scenes = 400;
  const auto data = synthesize_dataset(world, o);

  Scene probe;
  probe.id = "probe";
  probe.width = 640;
  probe.height = 480;
  const double norm = std::sqrt(1 + world.noise_scale * world.noise_scale);
  probe.detections.push_back({{200, 100, 260, 260}, 0.95, world.vocab.person(),
                              world.centers.row(world.vocab.person()).transpose() / norm});
  probe.detections.push_back({{170, 180, 330, 330}, 0.9, horse, world.centers.row(horse).transpose() / norm});

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig c;
    c.seed = seed;
    c.embedding_dim = 8;
    c.node_width = 16;
    c.edge_width = 16;
    c.epochs = 10;
    c.batch_size = 8;
    c.learning_rate = 3e-3;
    const auto ckpt = train(c, data.vocab, data.feature_dim, data.train, golden_set(data));
    const auto top = infer(ckpt.model, probe, c.lambda_infer, 3);
    bool found = false;
    for (const auto& p : top) found = found || (p.verb == ride && p.object_label == horse);
    CHECK_MESSAGE(found, "seed " << seed);
  }
}

TEST_CASE("gradient suite passes on several seeds") {
  for (std::uint64_t seed : {0u, 1u, 2u, 41u}) {
    const auto suite = run_gradcheck_suite(seed);
    CHECK(suite.cases.size() >= 8);
    for (const auto& c : suite.cases) CHECK_MESSAGE(c.max_relative_error <= kGradCheckTolerance, c.name);
  }
}
