#pragma once

#include <cstdint>

#include "transhoi/dataset.hpp"
#include "transhoi/synthgen.hpp"

namespace transhoi {

struct SynthOptions {
  std::uint64_t world_seed = 7;
  std::uint64_t scene_seed = 0;
  int num_objects = 12;
  int num_verbs = 16;
  double sparsity = 0.25;
  int train_scenes = 500;
  int test_scenes = 0;
  WorldOptions world;
  CorruptionNoise noise{4.0, 0.05, 0.1, 0.05};
};

// Builds the world, samples and corrupts every scene, and lists every class the world
// supports in the split table (counted over the training scenes).
Dataset synthesize_dataset(const SynthOptions& options);

// Same, for a world that already exists.
Dataset synthesize_dataset(const WorldSpec& world, const SynthOptions& options);

}  // namespace transhoi
