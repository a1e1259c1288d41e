#pragma once

// Translational knowledge-graph embedding with relation-specific hyperplanes.
// Every triplet has the person entity as head, a verb as relation and an
// object label as tail. Lower score means a more plausible triplet.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "transhoi/numkernel.hpp"

namespace transhoi {

class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::string> objects, std::vector<std::string> verbs, std::string person = "person");

  int num_objects() const { return static_cast<int>(objects_.size()); }
  int num_verbs() const { return static_cast<int>(verbs_.size()); }
  int person() const { return person_; }

  const std::vector<std::string>& objects() const { return objects_; }
  const std::vector<std::string>& verbs() const { return verbs_; }
  const std::string& object_name(int id) const;
  const std::string& verb_name(int id) const;

  // Throws VocabError for unknown names.
  int object_id(const std::string& name) const;
  int verb_id(const std::string& name) const;

  bool valid_object(int id) const { return id >= 0 && id < num_objects(); }
  bool valid_verb(int id) const { return id >= 0 && id < num_verbs(); }

  bool operator==(const Vocab& o) const { return objects_ == o.objects_ && verbs_ == o.verbs_ && person_ == o.person_; }

 private:
  std::vector<std::string> objects_;
  std::vector<std::string> verbs_;
  std::map<std::string, int> object_index_;
  std::map<std::string, int> verb_index_;
  int person_ = 0;
};

struct Triplet {
  int head = 0;
  int relation = 0;
  int tail = 0;

  auto operator<=>(const Triplet&) const = default;
};

class GoldenSet {
 public:
  GoldenSet() = default;
  explicit GoldenSet(const Vocab& vocab)
      : num_entities_(vocab.num_objects()), num_relations_(vocab.num_verbs()), person_(vocab.person()) {}

  // Returns false if already present. Throws VocabError on invalid ids or a non-person head.
  bool insert(const Triplet& t);
  bool contains(const Triplet& t) const { return members_.count(t) > 0; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::vector<Triplet> members() const { return {members_.begin(), members_.end()}; }
  int num_entities() const { return num_entities_; }
  int num_relations() const { return num_relations_; }
  int person() const { return person_; }

 private:
  int num_entities_ = 0;
  int num_relations_ = 0;
  int person_ = 0;
  std::set<Triplet> members_;
};

struct TransHParams {
  Param<double> entity;       // M x k
  Param<double> normal;       // N x k, unit rows
  Param<double> translation;  // N x k

  int dim() const { return static_cast<int>(entity.value.cols()); }
  int num_entities() const { return static_cast<int>(entity.value.rows()); }
  int num_relations() const { return static_cast<int>(normal.value.rows()); }

  ParamRefs<double> params() { return {&entity, &normal, &translation}; }
  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }
};

// Uniform(-6/sqrt(k), 6/sqrt(k)) entries, normal rows rescaled to unit length.
TransHParams init_transh(int num_entities, int num_relations, int dim, std::uint64_t seed);

// v - (w.v) w; requires |w| = 1 within 1e-6.
VectorXr hyperplane_project(const VectorXr& v, const VectorXr& w);

double transh_score(const TransHParams& params, const Triplet& t);

// Adds d score / d params, scaled by `scale`, into the params' grad buffers.
void transh_score_backward(TransHParams& params, const Triplet& t, double scale);

std::vector<Triplet> build_pair_triplets(int object_label, const Vocab& vocab);

// Negative i corrupts golden member i mod |golden|: relation first, tail as a fallback
// when every relation is already golden for that tail.
std::vector<Triplet> sample_negatives(const GoldenSet& golden, std::size_t count, std::mt19937_64& rng);

inline constexpr double kDefaultMargin = 4.0;

// Sum over pairs of max(0, s(pos) + margin - s(neg)), gradients accumulated into params.
double margin_loss_and_grads(TransHParams& params, const std::vector<Triplet>& positives,
                             const std::vector<Triplet>& negatives, double margin, bool accumulate = true);

// Soft orthogonality between normals and translations:
// sum_r max(0, (w_r.d_r)^2 / |d_r|^2 - eps^2), scaled by weight.
double orthogonality_penalty_and_grads(TransHParams& params, double epsilon, double weight,
                                       bool accumulate = true);

// Unit-normalizes every normal row, shrinks entity rows with norm > 1 to norm 1.
void constrain(TransHParams& params);

double max_normal_deviation(const TransHParams& params);

// 1-based rank of t.relation among all relations scored against (t.head, t.tail),
// counting relations whose score is <= the golden one (ties count against it).
int relation_rank(const TransHParams& params, const Triplet& t);

}  // namespace transhoi
