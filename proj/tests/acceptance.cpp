// Acceptance run: one PASS/FAIL line per criterion.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "reference_eval.hpp"
#include "transhoi/checkpoint.hpp"
#include "transhoi/dataset.hpp"
#include "transhoi/gradcheck_suite.hpp"
#include "transhoi/report.hpp"
#include "transhoi/synthdata.hpp"
#include "transhoi/train.hpp"

using namespace transhoi;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Largest normal deviation seen after any epoch of any training run in this process.
double g_max_deviation = 0;
int g_epochs_observed = 0;

void observe(double deviation) {
  g_max_deviation = std::max(g_max_deviation, deviation);
  ++g_epochs_observed;
}

TrainObserver deviation_observer() {
  TrainObserver o;
  o.on_epoch = [](const EpochLog& e, const Model&) { observe(e.max_normal_deviation); };
  return o;
}

SynthOptions benchmark_data() {
  SynthOptions o;
  o.world_seed = 7;
  o.scene_seed = 7;
  o.num_objects = 12;
  o.num_verbs = 16;
  o.sparsity = 0.25;
  o.train_scenes = 500;
  o.test_scenes = 200;
  return o;
}

RunConfig benchmark_config(int k, std::uint64_t seed) {
  RunConfig c;
  c.embedding_dim = k;
  c.epochs = 12;
  c.learning_rate = 1e-3;
  c.seed = seed;
  return c;
}

Outcome benchmark() {
  const auto start = Clock::now();
  const Dataset d = synthesize_dataset(benchmark_data());
  const GoldenSet golden = golden_set(d);
  int wins = 0;
  double total_gain = 0;
  std::string rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double full[2];
    const int ks[2] = {50, 0};
    for (int i = 0; i < 2; ++i) {
      const auto ckpt = train(benchmark_config(ks[i], seed), d.vocab, d.feature_dim, d.train, golden,
                              deviation_observer());
      full[i] = evaluate_model(ckpt.model, d.test, d.splits).full.value_or(0.0);
    }
    const double gain = full[0] - full[1];
    wins += gain > 0;
    total_gain += gain;
    rows += fmt(" s%llu:%.2f/%.2f", static_cast<unsigned long long>(seed), 100 * full[0], 100 * full[1]);
  }
  const double elapsed = seconds_since(start);
  const double mean_gain = total_gain / 5;
  return {wins >= 4 && mean_gain > 0 && elapsed <= 600,
          fmt("k=50 beats k=0 in %d/5 seeds, mean gain %+.2f mAP points, %.0f s;", wins, 100 * mean_gain, elapsed) +
              rows};
}

Outcome gradient_suite(std::uint64_t fresh_seed) {
  const auto start = Clock::now();
  double worst = 0;
  std::string worst_case;
  std::size_t kinks = 0;
  std::vector<std::uint64_t> seeds(20);
  std::iota(seeds.begin(), seeds.end(), 0);
  seeds.push_back(fresh_seed);
  for (auto seed : seeds) {
    for (const auto& c : run_gradcheck_suite(seed).cases) {
      kinks += c.kinks;
      if (c.max_relative_error >= worst) {
        worst = c.max_relative_error;
        worst_case = c.name;
      }
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= kGradCheckTolerance && elapsed <= 60,
          fmt("max rel. err %.2e (%s) over seeds 0-19 and %llu, %zu kink coordinates, %.1f s", worst,
              worst_case.c_str(), static_cast<unsigned long long>(fresh_seed), kinks, elapsed)};
}

Outcome scalar_oracles() {
  // person=(1,2), book=(0,1), w=(1,0), d=(0,0.5).
  TransHParams p{Param<double>("e", (MatrixXr(2, 2) << 1, 2, 0, 1).finished()),
                 Param<double>("w", (MatrixXr(1, 2) << 1, 0).finished()),
                 Param<double>("d", (MatrixXr(1, 2) << 0, 0.5).finished())};
  const double score = transh_score(p, {0, 0, 1});
  // A third entity placed so that its score is exactly 3.
  TransHParams q = p;
  q.entity = Param<double>("e", (MatrixXr(3, 2) << 1, 2, 0, 1, 0, 2.5 - std::sqrt(3.0)).finished());
  const double margin = margin_loss_and_grads(q, {{0, 0, 1}}, {{0, 0, 2}}, 4.0);
  const double focal = focal_loss(0.5, true, 0.5, 0.2).loss;
  const double prior = pair_prior(0.9, 0.8, 2.8);
  const double overlap = iou({0, 0, 2, 2}, {1, 1, 3, 3});

  struct Row {
    const char* name;
    double got, exact, quoted;
  };
  const Row rows[] = {{"score", score, 2.25, 2.25},
                      {"margin", margin, 3.25, 3.25},
                      {"focal", focal, -0.5 * std::pow(0.5, 0.2) * std::log(0.5), 0.30172},
                      {"prior", prior, std::pow(0.72, 2.8), 0.3986},
                      {"iou", overlap, 1.0 / 7.0, 1.0 / 7.0}};
  bool pass = true;
  std::string detail;
  for (const auto& r : rows) {
    const double err = std::abs(r.got - r.exact);
    pass = pass && err <= 1e-9;
    detail += fmt("%s %.7f (|closed form diff| %.1e, quoted %.5g) ", r.name, r.got, err, r.quoted);
  }
  return {pass, detail};
}

Outcome evaluator_equivalence() {
  std::mt19937_64 rng(100);
  double worst = 0;
  for (int i = 0; i < 100; ++i) worst = std::max(worst, testing::evaluator_discrepancy(testing::random_micro_instance(rng)));

  const BBox h{0, 0, 10, 10}, o{20, 0, 30, 10}, far{50, 50, 60, 60};
  const auto r = evaluate({{{h, o, 1, 0, 0.9}, {h, far, 1, 0, 0.8}, {far, o, 1, 0, 0.7}}},
                          {{{h, o, 1, 0}, {far, o, 1, 0}}}, SplitTable{{{{1, 0}, 20}}});
  const double ap = r.full.value_or(-1);
  return {worst <= 1e-12 && std::abs(ap - 5.0 / 6.0) <= 1e-12,
          fmt("max |library - reference| %.1e over 100 instances; (TP, FP, TP)/2 GT AP %.4f", worst, ap)};
}

Outcome kge_planted() {
  std::vector<std::string> objects{"person"}, verbs;
  for (int i = 1; i < 12; ++i) objects.push_back("entity_" + std::to_string(i));
  for (int r = 0; r < 8; ++r) verbs.push_back("relation_" + std::to_string(r));
  const Vocab vocab(objects, verbs);
  GoldenSet golden(vocab);
  for (int t = 0; t < 12; ++t) golden.insert({vocab.person(), t % 8, t});
  const auto members = golden.members();

  auto params = init_transh(12, 8, 50, 7);
  constrain(params);
  const auto mean_rank = [&] {
    double s = 0;
    for (const auto& t : members) s += relation_rank(params, t);
    return s / static_cast<double>(members.size());
  };
  const double before = mean_rank();
  KgeTrainOptions opts;
  opts.epochs = 200;
  opts.seed = 7;
  train_kge(params, golden, opts, [](int, const TransHParams& p) { observe(max_normal_deviation(p)); });
  const double after = mean_rank();
  int top = 0;
  for (const auto& t : members) top += relation_rank(params, t) == 1;
  const double frac = static_cast<double>(top) / static_cast<double>(members.size());
  return {frac >= 0.9 && before >= 2 * after,
          fmt("golden relation strictly lowest for %d/%zu (%.0f%%); mean rank %.2f -> %.2f (%.2fx)", top,
              members.size(), 100 * frac, before, after, before / after)};
}

Outcome constraint_invariant() {
  // A short joint run with a high learning rate on top of every run already observed.
  SynthOptions o;
  o.train_scenes = 40;
  const auto d = synthesize_dataset(o);
  RunConfig c;
  c.epochs = 6;
  c.learning_rate = 0.05;
  c.node_width = 16;
  c.edge_width = 16;
  c.orthogonality_penalty = true;
  c.kge_pretrain_epochs = 20;
  train(c, d.vocab, d.feature_dim, d.train, golden_set(d), deviation_observer());
  return {g_max_deviation <= 1e-6,
          fmt("max |‖w_r‖ - 1| %.1e over %d observed epochs", g_max_deviation, g_epochs_observed)};
}

Outcome round_trip() {
  SynthOptions o = benchmark_data();
  o.noise = {};
  const auto d = synthesize_dataset(o);
  std::vector<std::vector<HoiPrediction>> preds;
  std::vector<std::vector<HoiInstance>> gts;
  for (const auto& s : d.test) {
    gts.push_back(expand_ground_truth(s));
    std::vector<HoiPrediction> p;
    for (const auto& g : gts.back()) p.push_back({g.human, g.object, g.object_label, g.verb, 1.0});
    preds.push_back(std::move(p));
  }
  const auto r = evaluate(preds, gts, d.splits);
  const auto show = [](const std::optional<double>& v) { return v ? fmt("%.6f", *v) : std::string("missing"); };
  return {r.full == 1.0 && r.rare == 1.0 && r.non_rare == 1.0,
          "full " + show(r.full) + ", rare " + show(r.rare) + ", non-rare " + show(r.non_rare) +
              fmt(" over %zu classes", r.classes.size())};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// synth -> train -> eval through the file formats; returns (checkpoint, report, table) bytes.
std::array<std::string, 3> chain(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SynthOptions o = benchmark_data();
  o.train_scenes = 120;
  o.test_scenes = 60;
  save_dataset(synthesize_dataset(o), (dir / "data.json").string());
  const Dataset d = load_dataset((dir / "data.json").string());
  RunConfig c = benchmark_config(50, 3);
  c.epochs = 3;
  save_checkpoint(train(c, d.vocab, d.feature_dim, d.train, golden_set(d)), (dir / "model.json").string());
  const Checkpoint ckpt = load_checkpoint((dir / "model.json").string());
  const auto report = evaluate_model(ckpt.model, d.evaluation_scenes(), d.splits);
  return {slurp(dir / "model.json"),
          report_to_json(report, d.vocab, ckpt.model.config, d.evaluation_scenes().size()).dump(2),
          report_table({{"translational", report}})};
}

Outcome determinism() {
  const auto base = std::filesystem::temp_directory_path() / ("transhoi-acceptance-" + std::to_string(::getpid()));
  const auto a = chain(base / "a"), b = chain(base / "b");
  std::filesystem::remove_all(base);
  return {a == b, fmt("checkpoint %zu bytes %s, report %zu bytes %s, table %s", a[0].size(),
                      a[0] == b[0] ? "identical" : "DIFFER", a[1].size(), a[1] == b[1] ? "identical" : "DIFFER",
                      a[2] == b[2] ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::uint64_t seed = std::random_device{}();
  app.add_option("--only", only, "Run only these criteria (1-8)")->delimiter(',')->check(CLI::Range(1, 8));
  app.add_option("--gradcheck-seed", seed, "Extra gradient-suite seed (default: random)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"benchmark: k=50 vs k=0 on the synthetic benchmark", benchmark},
      {"gradient suite", [seed] { return gradient_suite(seed); }},
      {"scalar oracles", scalar_oracles},
      {"evaluator equivalence", evaluator_equivalence},
      {"KGE planted graph", kge_planted},
      {"constraint invariant", constraint_invariant},
      {"round-trip identity", round_trip},
      {"determinism", determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    all = all && out.pass;
    std::printf("%s [%d] %s: %s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
