#include "transhoi/synthdata.hpp"

#include <cstdio>

#include "transhoi/error.hpp"

namespace transhoi {

namespace {

std::string scene_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05d", prefix, i);
  return buf;
}

}  // namespace

Dataset synthesize_dataset(const SynthOptions& options) {
  return synthesize_dataset(
      generate_world(options.world_seed, options.num_objects, options.num_verbs, options.sparsity, options.world),
      options);
}

Dataset synthesize_dataset(const WorldSpec& world, const SynthOptions& options) {
  if (options.train_scenes < 0 || options.test_scenes < 0 || options.train_scenes + options.test_scenes < 1)
    throw ValidationError("at least one scene is required");
  Dataset d;
  d.vocab = world.vocab;
  d.feature_dim = world.feature_dim();
  std::mt19937_64 rng(options.scene_seed);
  const auto make = [&](const char* prefix, int i) {
    const SceneSample sample = generate_scene(world, rng, scene_id(prefix, i));
    return corrupt_to_detections(sample, world, options.noise, rng);
  };
  for (int i = 0; i < options.train_scenes; ++i) d.train.push_back(make("train", i));
  for (int i = 0; i < options.test_scenes; ++i) d.test.push_back(make("test", i));

  for (int o = 0; o < world.vocab.num_objects(); ++o)
    for (int v : world.support(o)) d.splits.counts[{o, v}] = 0;
  for (const auto& [c, n] : count_classes(d.train)) d.splits.counts[c] = n;
  return d;
}

}  // namespace transhoi
