#pragma once

// Seeded synthetic worlds and scenes standing in for a first-stage detector.
// A world fixes which verbs each object class supports (a skewed prior), a spatial
// rule per verb and a class-conditional appearance distribution. Scenes plant
// interactions that obey those rules; corruption turns the clean instances into
// noisy detections while keeping the annotations intact.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "transhoi/graphrep.hpp"
#include "transhoi/kge.hpp"
#include "transhoi/numkernel.hpp"

namespace transhoi {

enum class SpatialRule { overlap, near, far, any };

std::string_view to_string(SpatialRule r);

// Distances are measured between box centers in units of the human box diagonal.
struct VerbRule {
  SpatialRule kind = SpatialRule::any;
  double near_distance = 1.0;
  double far_distance = 1.5;
};

bool satisfies(const VerbRule& rule, const BBox& human, const BBox& object);
bool compatible(const VerbRule& a, const VerbRule& b);

struct WorldOptions {
  int feature_dim = 32;
  double noise_scale = 2.0;
};

struct WorldSpec {
  Vocab vocab;
  MatrixXr prior;               // M x N, rows sum to 1 over their support
  std::vector<VerbRule> rules;  // per verb
  MatrixXr centers;             // M x D appearance cluster centers
  double noise_scale = 2.0;

  double frame_width = 640;
  double frame_height = 480;
  int min_persons = 1, max_persons = 3;
  int min_objects = 1, max_objects = 4;
  double person_min_width = 30, person_max_width = 80;
  double person_min_height = 60, person_max_height = 160;
  double object_min_size = 20, object_max_size = 120;
  double idle_object_rate = 0.2;    // objects placed with no interaction
  double second_verb_rate = 0.15;   // chance of trying a second verb for a pair
  double person_pair_rate = 0.3;    // chance of a person-person interaction

  int feature_dim() const { return static_cast<int>(centers.cols()); }
  // Verb ids with non-zero prior for an object class.
  std::vector<int> support(int object) const;
};

WorldSpec generate_world(std::uint64_t seed, int num_objects, int num_verbs, double sparsity,
                         const WorldOptions& options = {});

// Clean scene: `scene.detections` are the true instances with score 1,
// `scene.ground_truth` the planted interactions.
struct SceneSample {
  Scene scene;
};

SceneSample generate_scene(const WorldSpec& world, std::mt19937_64& rng, const std::string& id = "scene");

struct CorruptionNoise {
  double box_jitter = 0;        // pixels, per coordinate
  double miss_rate = 0;
  double false_positive_rate = 0;   // per true instance
  double label_flip_rate = 0;
};

Scene corrupt_to_detections(const SceneSample& sample, const WorldSpec& world, const CorruptionNoise& noise,
                            std::mt19937_64& rng);

}  // namespace transhoi
