#include "transhoi/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "transhoi/error.hpp"

namespace transhoi {

namespace {

constexpr std::array kObjectNames{
    "person", "horse",  "bicycle", "book",   "cup",        "umbrella", "kite",  "dog",
    "laptop", "bottle", "chair",   "frisbee", "skateboard", "surfboard", "apple", "knife"};
constexpr std::array kVerbNames{
    "ride", "hold",  "read", "drink_with", "carry", "fly",   "walk", "sit_on",
    "feed", "throw", "catch", "type_on",   "open",  "pour",  "kick", "wave",
    "pet",  "cut",   "eat",   "push",      "pull",  "look_at", "lift", "wear"};

std::vector<std::string> make_names(const auto& base, int count, const std::string& prefix) {
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i)
    out.push_back(static_cast<std::size_t>(i) < base.size() ? std::string(base[static_cast<std::size_t>(i)])
                                                           : prefix + std::to_string(i));
  return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

bool bernoulli(std::mt19937_64& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

double center_distance(const BBox& a, const BBox& b) { return std::hypot(a.cx() - b.cx(), a.cy() - b.cy()); }

BBox box_at(double cx, double cy, double w, double h, double frame_w, double frame_h) {
  const double x1 = std::clamp(cx - 0.5 * w, 0.0, frame_w - w);
  const double y1 = std::clamp(cy - 0.5 * h, 0.0, frame_h - h);
  return {x1, y1, x1 + w, y1 + h};
}

int sample_verb(const WorldSpec& world, int object, std::mt19937_64& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0;
  int last = -1;
  for (int v = 0; v < world.vocab.num_verbs(); ++v) {
    const double p = world.prior(object, v);
    if (p <= 0) continue;
    acc += p;
    last = v;
    if (u < acc) return v;
  }
  return last;
}

VectorXr appearance(const WorldSpec& world, int label, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  VectorXr f = world.centers.row(label).transpose();
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] += world.noise_scale * noise(rng);
  return f / std::sqrt(1.0 + world.noise_scale * world.noise_scale);
}

// Places a box of the given size relative to `human` so every rule holds. Falls back to
// an unconstrained placement (and reports failure) after a bounded number of tries.
bool place(const WorldSpec& world, const BBox& human, const std::vector<VerbRule>& rules, double w, double h,
           std::mt19937_64& rng, BBox& out) {
  bool want_overlap = false, want_near = false, want_far = false;
  double near_d = 1e300, far_d = 0;
  for (const auto& r : rules) {
    if (r.kind == SpatialRule::overlap) want_overlap = true;
    if (r.kind == SpatialRule::near) {
      want_near = true;
      near_d = std::min(near_d, r.near_distance);
    }
    if (r.kind == SpatialRule::far) {
      want_far = true;
      far_d = std::max(far_d, r.far_distance);
    }
  }
  const double diag = human.diagonal();
  for (int attempt = 0; attempt < 200; ++attempt) {
    double cx, cy;
    if (want_overlap) {
      cx = uniform(rng, human.x1, human.x2);
      cy = uniform(rng, human.y1, human.y2);
    } else if (want_near) {
      const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
      const double dist = uniform(rng, 0.0, near_d * diag);
      cx = human.cx() + dist * std::cos(angle);
      cy = human.cy() + dist * std::sin(angle);
    } else if (want_far) {
      const double angle = uniform(rng, 0.0, 2 * std::numbers::pi);
      const double dist = uniform(rng, far_d * diag, far_d * diag + 300.0);
      cx = human.cx() + dist * std::cos(angle);
      cy = human.cy() + dist * std::sin(angle);
    } else {
      cx = uniform(rng, 0.0, world.frame_width);
      cy = uniform(rng, 0.0, world.frame_height);
    }
    const BBox b = box_at(cx, cy, w, h, world.frame_width, world.frame_height);
    if (std::all_of(rules.begin(), rules.end(), [&](const VerbRule& r) { return satisfies(r, human, b); })) {
      out = b;
      return true;
    }
  }
  out = box_at(uniform(rng, 0.0, world.frame_width), uniform(rng, 0.0, world.frame_height), w, h,
               world.frame_width, world.frame_height);
  return false;
}

}  // namespace

std::string_view to_string(SpatialRule r) {
  switch (r) {
    case SpatialRule::overlap: return "overlap";
    case SpatialRule::near: return "near";
    case SpatialRule::far: return "far";
    case SpatialRule::any: return "any";
  }
  return "any";
}

bool satisfies(const VerbRule& rule, const BBox& human, const BBox& object) {
  switch (rule.kind) {
    case SpatialRule::overlap: return intersection_area(human, object) > 0;
    case SpatialRule::near: return center_distance(human, object) <= rule.near_distance * human.diagonal();
    case SpatialRule::far: return center_distance(human, object) >= rule.far_distance * human.diagonal();
    case SpatialRule::any: return true;
  }
  return true;
}

bool compatible(const VerbRule& a, const VerbRule& b) {
  const auto close = [](SpatialRule k) { return k == SpatialRule::overlap || k == SpatialRule::near; };
  return !((a.kind == SpatialRule::far && close(b.kind)) || (b.kind == SpatialRule::far && close(a.kind)));
}

std::vector<int> WorldSpec::support(int object) const {
  std::vector<int> out;
  for (int v = 0; v < vocab.num_verbs(); ++v)
    if (prior(object, v) > 0) out.push_back(v);
  return out;
}

WorldSpec generate_world(std::uint64_t seed, int num_objects, int num_verbs, double sparsity,
                         const WorldOptions& options) {
  if (num_objects < 2 || num_verbs < 2) throw ValidationError("generate_world: need M >= 2 and N >= 2");
  if (!(sparsity > 0 && sparsity <= 1)) throw ValidationError("generate_world: sparsity must be in (0, 1]");
  if (options.feature_dim < 1) throw ValidationError("generate_world: feature dimension must be >= 1");
  const int per_object = static_cast<int>(std::ceil(sparsity * num_verbs - 1e-12));
  if (per_object * num_objects < num_verbs)
    throw ValidationError("generate_world: too few support slots to cover every verb");

  std::mt19937_64 rng(seed);
  WorldSpec w;
  w.vocab = Vocab(make_names(kObjectNames, num_objects, "object_"), make_names(kVerbNames, num_verbs, "verb_"));
  w.noise_scale = options.noise_scale;

  std::vector<std::vector<int>> supports(static_cast<std::size_t>(num_objects));
  std::vector<int> verbs(static_cast<std::size_t>(num_verbs));
  std::iota(verbs.begin(), verbs.end(), 0);
  std::vector<int> cover(static_cast<std::size_t>(num_verbs), 0);
  for (auto& s : supports) {
    std::shuffle(verbs.begin(), verbs.end(), rng);
    s.assign(verbs.begin(), verbs.begin() + per_object);
    for (int v : s) ++cover[static_cast<std::size_t>(v)];
  }
  // Every verb needs a supporting class: swap it in for a verb covered elsewhere.
  for (int v = 0; v < num_verbs; ++v) {
    while (cover[static_cast<std::size_t>(v)] == 0) {
      auto& s = supports[static_cast<std::size_t>(uniform_int(rng, 0, num_objects - 1))];
      const std::size_t slot = static_cast<std::size_t>(uniform_int(rng, 0, per_object - 1));
      if (cover[static_cast<std::size_t>(s[slot])] < 2) continue;
      --cover[static_cast<std::size_t>(s[slot])];
      s[slot] = v;
      ++cover[static_cast<std::size_t>(v)];
    }
  }

  // Zipf-like weights in the (shuffled) support order.
  w.prior = MatrixXr::Zero(num_objects, num_verbs);
  for (int o = 0; o < num_objects; ++o) {
    const auto& s = supports[static_cast<std::size_t>(o)];
    double total = 0;
    for (std::size_t r = 0; r < s.size(); ++r) total += 1.0 / static_cast<double>(r + 1);
    for (std::size_t r = 0; r < s.size(); ++r) w.prior(o, s[r]) = (1.0 / static_cast<double>(r + 1)) / total;
  }

  const std::array kinds{SpatialRule::overlap, SpatialRule::near, SpatialRule::far, SpatialRule::any};
  for (int v = 0; v < num_verbs; ++v) w.rules.push_back({kinds[static_cast<std::size_t>(uniform_int(rng, 0, 3))]});

  std::normal_distribution<double> gauss(0.0, 1.0);
  w.centers.resize(num_objects, options.feature_dim);
  for (Eigen::Index i = 0; i < w.centers.size(); ++i) w.centers.data()[i] = gauss(rng);
  return w;
}

SceneSample generate_scene(const WorldSpec& world, std::mt19937_64& rng, const std::string& id) {
  const int person = world.vocab.person();
  std::vector<int> non_person;
  for (int o = 0; o < world.vocab.num_objects(); ++o)
    if (o != person) non_person.push_back(o);

  SceneSample sample;
  Scene& scene = sample.scene;
  scene.id = id;
  scene.width = world.frame_width;
  scene.height = world.frame_height;

  const auto add_instance = [&](const BBox& b, int label) {
    scene.detections.push_back({b, 1.0, label, appearance(world, label, rng)});
  };
  const auto person_size = [&]() {
    return std::pair{uniform(rng, world.person_min_width, world.person_max_width),
                     uniform(rng, world.person_min_height, world.person_max_height)};
  };
  const auto random_box = [&](double w, double h) {
    return box_at(uniform(rng, 0.0, world.frame_width), uniform(rng, 0.0, world.frame_height), w, h,
                  world.frame_width, world.frame_height);
  };
  // Draws one verb from the prior and, sometimes, a second compatible one.
  const auto draw_verbs = [&](int object) {
    std::vector<int> vs{sample_verb(world, object, rng)};
    if (bernoulli(rng, world.second_verb_rate)) {
      const int v2 = sample_verb(world, object, rng);
      if (v2 != vs[0] && compatible(world.rules[static_cast<std::size_t>(vs[0])], world.rules[static_cast<std::size_t>(v2)]))
        vs.push_back(v2);
    }
    std::sort(vs.begin(), vs.end());
    return vs;
  };
  const auto rules_of = [&](const std::vector<int>& vs) {
    std::vector<VerbRule> r;
    for (int v : vs) r.push_back(world.rules[static_cast<std::size_t>(v)]);
    return r;
  };

  const int n_persons = uniform_int(rng, world.min_persons, world.max_persons);
  const int n_objects = uniform_int(rng, world.min_objects, world.max_objects);

  std::vector<BBox> persons;
  {
    auto [w, h] = person_size();
    persons.push_back(random_box(w, h));
    add_instance(persons.back(), person);
  }
  for (int i = 1; i < n_persons; ++i) {
    auto [w, h] = person_size();
    BBox b = random_box(w, h);
    if (i == 1 && bernoulli(rng, world.person_pair_rate) && !world.support(person).empty()) {
      const auto vs = draw_verbs(person);
      if (place(world, persons[0], rules_of(vs), w, h, rng, b))
        scene.ground_truth.push_back({persons[0], b, person, vs});
    }
    persons.push_back(b);
    add_instance(b, person);
  }

  for (int i = 0; i < n_objects; ++i) {
    const int label = non_person[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(non_person.size()) - 1))];
    const BBox& anchor = persons[static_cast<std::size_t>(uniform_int(rng, 0, n_persons - 1))];
    const double w = uniform(rng, world.object_min_size, world.object_max_size);
    const double h = uniform(rng, world.object_min_size, world.object_max_size);
    BBox b;
    if (bernoulli(rng, world.idle_object_rate)) {
      b = random_box(w, h);
    } else {
      const auto vs = draw_verbs(label);
      if (place(world, anchor, rules_of(vs), w, h, rng, b)) scene.ground_truth.push_back({anchor, b, label, vs});
    }
    add_instance(b, label);
  }
  return sample;
}

Scene corrupt_to_detections(const SceneSample& sample, const WorldSpec& world, const CorruptionNoise& noise,
                            std::mt19937_64& rng) {
  Scene out = sample.scene;
  out.detections.clear();
  std::normal_distribution<double> jitter(0.0, 1.0);
  const int num_labels = world.vocab.num_objects();
  const double fw = sample.scene.width, fh = sample.scene.height;

  for (const auto& d : sample.scene.detections) {
    const bool missed = bernoulli(rng, noise.miss_rate);
    if (!missed) {
      BBox b = d.box;
      if (noise.box_jitter > 0) {
        double x1 = d.box.x1 + noise.box_jitter * jitter(rng), x2 = d.box.x2 + noise.box_jitter * jitter(rng);
        double y1 = d.box.y1 + noise.box_jitter * jitter(rng), y2 = d.box.y2 + noise.box_jitter * jitter(rng);
        if (x2 < x1) std::swap(x1, x2);
        if (y2 < y1) std::swap(y1, y2);
        x1 = std::clamp(x1, 0.0, fw - 1.0);
        y1 = std::clamp(y1, 0.0, fh - 1.0);
        x2 = std::clamp(std::max(x2, x1 + 1.0), x1 + 1.0, fw);
        y2 = std::clamp(std::max(y2, y1 + 1.0), y1 + 1.0, fh);
        b = {x1, y1, x2, y2};
      }
      Detection det = d;
      det.box = b;
      det.score = std::clamp(iou(b, d.box), 0.05, 1.0);
      if (bernoulli(rng, noise.label_flip_rate)) {
        const int shift = uniform_int(rng, 1, num_labels - 1);
        det.label = (d.label + shift) % num_labels;
      }
      out.detections.push_back(std::move(det));
    }
    if (bernoulli(rng, noise.false_positive_rate)) {
      const double w = uniform(rng, world.object_min_size, world.object_max_size);
      const double h = uniform(rng, world.object_min_size, world.object_max_size);
      const int label = uniform_int(rng, 0, num_labels - 1);
      const BBox b = box_at(uniform(rng, 0.0, fw), uniform(rng, 0.0, fh), w, h, fw, fh);
      out.detections.push_back({b, uniform(rng, 0.05, 0.3), label, appearance(world, label, rng)});
    }
  }
  return out;
}

}  // namespace transhoi
