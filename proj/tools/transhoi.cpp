#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include "transhoi/checkpoint.hpp"
#include "transhoi/config.hpp"
#include "transhoi/dataset.hpp"
#include "transhoi/error.hpp"
#include "transhoi/gradcheck_suite.hpp"
#include "transhoi/report.hpp"
#include "transhoi/synthdata.hpp"
#include "transhoi/train.hpp"

using namespace transhoi;
using nlohmann::ordered_json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string model_label(const Model& m) {
  return m.kge ? "translational k=" + std::to_string(m.config.embedding_dim) : "appearance only k=0";
}

ordered_json box_json(const BBox& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

void require_same_vocab(const Model& m, const Dataset& d) {
  if (!(m.vocab == d.vocab)) throw CompatibilityError("dataset vocabulary differs from the checkpoint vocabulary");
  if (m.feature_dim != d.feature_dim)
    throw CompatibilityError("dataset feature_dim " + std::to_string(d.feature_dim) + " != checkpoint feature_dim " +
                             std::to_string(m.feature_dim));
}

int run_synth(const SynthOptions& opts, const std::string& out) {
  const Dataset d = synthesize_dataset(opts);
  save_dataset(d, out);
  std::cerr << "wrote " << d.train.size() << " train and " << d.test.size() << " test scenes to " << out << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_path, const std::string& out) {
  RunConfig cfg = load_config(config_path);
  apply_environment(cfg);
  const Dataset d = load_dataset(data_path);
  TrainObserver obs;
  obs.on_epoch = [](const EpochLog& e, const Model&) {
    std::cerr << "epoch " << e.epoch + 1 << " loss " << e.mean_loss << "\n";
  };
  const Checkpoint ckpt = train(cfg, d.vocab, d.feature_dim, d.train, golden_set(d), obs);
  save_checkpoint(ckpt, out);
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& report_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset d = load_dataset(data_path);
  require_same_vocab(ckpt.model, d);
  const auto& scenes = d.evaluation_scenes();
  const EvalReport report = evaluate_model(ckpt.model, scenes, d.splits);
  write_text(report_path, report_to_json(report, d.vocab, ckpt.model.config, scenes.size()).dump(2) + "\n");
  const std::string table = report_table({{model_label(ckpt.model), report}});
  write_text(report_path + ".txt", table);
  std::cout << table;
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& data_path, int top_k) {
  if (top_k < 0) throw ValidationError("--top-k must be >= 0");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset d = load_dataset(data_path);
  require_same_vocab(ckpt.model, d);
  const Model& m = ckpt.model;
  ordered_json out = ordered_json::array();
  for (const auto& s : d.evaluation_scenes()) {
    ordered_json preds = ordered_json::array();
    for (const auto& p : infer(m, s, m.config.lambda_infer, static_cast<std::size_t>(top_k)))
      preds.push_back({{"human", box_json(p.human)},
                       {"object", box_json(p.object)},
                       {"object_label", m.vocab.object_name(p.object_label)},
                       {"verb", m.vocab.verb_name(p.verb)},
                       {"score", p.score}});
    out.push_back({{"id", s.id}, {"predictions", std::move(preds)}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_gradcheck(std::optional<std::uint64_t> seed) {
  if (!seed) {
    if (const char* env = std::getenv("TMHOI_SEED")) {
      RunConfig c;
      apply_environment(c);
      seed = c.seed;
    } else {
      seed = (std::uint64_t{std::random_device{}()} << 32) | std::random_device{}();
    }
  }
  const GradCheckSuite suite = run_gradcheck_suite(*seed);
  std::cout << "seed " << *seed << "\n";
  for (const auto& c : suite.cases)
    std::cout << c.name << ": max rel. err " << c.max_relative_error << " over " << c.coordinates << " coordinates, " << c.kinks << " at kinks (worst: " << c.worst_param << ", analytic " << c.worst_analytic
              << ", numeric " << c.worst_numeric << ")\n";
  std::cout << "max rel. err " << suite.max_relative_error() << (suite.passed() ? " (pass)" : " (FAIL)") << "\n";
  return suite.passed() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Translational HOI detection: synthetic data, training, evaluation and prediction"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synth_out;
  std::optional<std::uint64_t> scene_seed;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  cmd_synth->add_option("--world-seed", synth.world_seed, "World seed")->required();
  cmd_synth->add_option("--scenes", synth.train_scenes, "Training scenes")->required()->check(CLI::NonNegativeNumber);
  cmd_synth->add_option("--test-scenes", synth.test_scenes, "Held-out scenes")->check(CLI::NonNegativeNumber);
  cmd_synth->add_option("--scene-seed", scene_seed, "Scene seed (defaults to the world seed)");
  cmd_synth->add_option("--objects", synth.num_objects, "Object classes, person included");
  cmd_synth->add_option("--verbs", synth.num_verbs, "Verb classes");
  cmd_synth->add_option("--sparsity", synth.sparsity, "Fraction of verbs each object supports");
  cmd_synth->add_option("--feature-dim", synth.world.feature_dim, "Appearance feature length");
  cmd_synth->add_option("--appearance-noise", synth.world.noise_scale, "Appearance noise scale");
  cmd_synth->add_option("--jitter", synth.noise.box_jitter, "Box jitter in pixels");
  cmd_synth->add_option("--miss-rate", synth.noise.miss_rate, "Missed-detection rate");
  cmd_synth->add_option("--false-positive-rate", synth.noise.false_positive_rate, "False positives per instance");
  cmd_synth->add_option("--label-flip-rate", synth.noise.label_flip_rate, "Object label flip rate");
  cmd_synth->add_option("--out", synth_out, "Output dataset path")->required();

  std::string config_path, data_path, out_path, ckpt_path, report_path;
  auto* cmd_train = app.add_subcommand("train", "Train a model");
  cmd_train->add_option("--config", config_path, "Run configuration (JSON)")->required();
  cmd_train->add_option("--data", data_path, "Dataset (JSON)")->required();
  cmd_train->add_option("--out", out_path, "Checkpoint path")->required();

  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  cmd_eval->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  cmd_eval->add_option("--data", data_path, "Dataset (JSON)")->required();
  cmd_eval->add_option("--report", report_path, "Report path (JSON); the table goes to <path>.txt")->required();

  int top_k = 10;
  auto* cmd_predict = app.add_subcommand("predict", "Print ranked HOI predictions");
  cmd_predict->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  cmd_predict->add_option("--data", data_path, "Dataset (JSON)")->required();
  cmd_predict->add_option("--top-k", top_k, "Predictions per scene (0 keeps all)");

  std::optional<std::uint64_t> grad_seed;
  auto* cmd_grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  cmd_grad->add_option("--seed", grad_seed, "Seed (defaults to TMHOI_SEED or a fresh one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*cmd_synth) {
      synth.scene_seed = scene_seed.value_or(synth.world_seed);
      return run_synth(synth, synth_out);
    }
    if (*cmd_train) return run_train(config_path, data_path, out_path);
    if (*cmd_eval) return run_eval(ckpt_path, data_path, report_path);
    if (*cmd_predict) return run_predict(ckpt_path, data_path, top_k);
    if (*cmd_grad) return run_gradcheck(grad_seed);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
