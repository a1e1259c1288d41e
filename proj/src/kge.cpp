#include "transhoi/kge.hpp"

#include <cmath>

namespace transhoi {

Vocab::Vocab(std::vector<std::string> objects, std::vector<std::string> verbs, std::string person)
    : objects_(std::move(objects)), verbs_(std::move(verbs)) {
  if (objects_.size() < 2) throw VocabError("vocabulary needs at least two object labels");
  if (verbs_.empty()) throw VocabError("vocabulary needs at least one verb");
  for (std::size_t i = 0; i < objects_.size(); ++i)
    if (!object_index_.emplace(objects_[i], static_cast<int>(i)).second)
      throw VocabError("duplicate object label '" + objects_[i] + "'");
  for (std::size_t i = 0; i < verbs_.size(); ++i)
    if (!verb_index_.emplace(verbs_[i], static_cast<int>(i)).second)
      throw VocabError("duplicate verb label '" + verbs_[i] + "'");
  auto it = object_index_.find(person);
  if (it == object_index_.end()) throw VocabError("person label '" + person + "' is not an object label");
  person_ = it->second;
}

const std::string& Vocab::object_name(int id) const {
  if (!valid_object(id)) throw VocabError("object id " + std::to_string(id) + " out of range");
  return objects_[static_cast<std::size_t>(id)];
}

const std::string& Vocab::verb_name(int id) const {
  if (!valid_verb(id)) throw VocabError("verb id " + std::to_string(id) + " out of range");
  return verbs_[static_cast<std::size_t>(id)];
}

int Vocab::object_id(const std::string& name) const {
  auto it = object_index_.find(name);
  if (it == object_index_.end()) throw VocabError("unknown object label '" + name + "'");
  return it->second;
}

int Vocab::verb_id(const std::string& name) const {
  auto it = verb_index_.find(name);
  if (it == verb_index_.end()) throw VocabError("unknown verb '" + name + "'");
  return it->second;
}

bool GoldenSet::insert(const Triplet& t) {
  if (t.head != person_) throw VocabError("golden triplet head must be the person entity");
  if (t.tail < 0 || t.tail >= num_entities_ || t.relation < 0 || t.relation >= num_relations_)
    throw VocabError("golden triplet ids out of range");
  return members_.insert(t).second;
}

TransHParams init_transh(int num_entities, int num_relations, int dim, std::uint64_t seed) {
  if (num_entities < 1 || num_relations < 1 || dim < 1)
    throw ShapeError("init_transh: entity, relation and embedding counts must be >= 1");
  std::mt19937_64 rng(seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto draw = [&](int rows) {
    MatrixXr m(rows, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double v = dist(rng);
      while (std::abs(v) >= bound) v = dist(rng);
      m.data()[i] = v;
    }
    return m;
  };
  TransHParams p;
  p.entity = Param<double>("kge.entity", draw(num_entities));
  MatrixXr normal = draw(num_relations);
  for (Eigen::Index r = 0; r < normal.rows(); ++r) {
    while (normal.row(r).norm() == 0) normal.row(r) = draw(1);
    normal.row(r).normalize();
  }
  p.normal = Param<double>("kge.normal", std::move(normal));
  p.translation = Param<double>("kge.translation", draw(num_relations));
  return p;
}

VectorXr hyperplane_project(const VectorXr& v, const VectorXr& w) {
  if (v.size() != w.size()) throw ShapeError("hyperplane_project: length mismatch");
  if (std::abs(w.norm() - 1.0) > 1e-6) throw ConstraintError("hyperplane_project: normal is not unit length");
  return v - w.dot(v) * w;
}

namespace {

void check_ids(const TransHParams& p, const Triplet& t) {
  if (t.head < 0 || t.head >= p.num_entities() || t.tail < 0 || t.tail >= p.num_entities())
    throw VocabError("triplet entity id out of range");
  if (t.relation < 0 || t.relation >= p.num_relations()) throw VocabError("triplet relation id out of range");
}

// r = (h - t) - w.(h - t) w + d, the translated residual on the hyperplane.
VectorXr residual(const TransHParams& p, const Triplet& t) {
  const VectorXr u = p.entity.value.row(t.head) - p.entity.value.row(t.tail);
  const VectorXr w = p.normal.value.row(t.relation);
  return u - w.dot(u) * w + VectorXr(p.translation.value.row(t.relation));
}

}  // namespace

double transh_score(const TransHParams& params, const Triplet& t) {
  check_ids(params, t);
  return residual(params, t).squaredNorm();
}

void transh_score_backward(TransHParams& params, const Triplet& t, double scale) {
  check_ids(params, t);
  const VectorXr u = params.entity.value.row(t.head) - params.entity.value.row(t.tail);
  const VectorXr w = params.normal.value.row(t.relation);
  const VectorXr r = residual(params, t);
  const double wu = w.dot(u);
  const double wr = w.dot(r);
  const VectorXr du = 2.0 * (r - wr * w);
  params.entity.grad.row(t.head) += scale * du.transpose();
  params.entity.grad.row(t.tail) -= scale * du.transpose();
  params.translation.grad.row(t.relation) += scale * 2.0 * r.transpose();
  params.normal.grad.row(t.relation) -= scale * 2.0 * (wu * r + wr * u).transpose();
}

std::vector<Triplet> build_pair_triplets(int object_label, const Vocab& vocab) {
  if (!vocab.valid_object(object_label)) throw VocabError("object id " + std::to_string(object_label) + " out of range");
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(vocab.num_verbs()));
  for (int r = 0; r < vocab.num_verbs(); ++r) out.push_back({vocab.person(), r, object_label});
  return out;
}

std::vector<Triplet> sample_negatives(const GoldenSet& golden, std::size_t count, std::mt19937_64& rng) {
  if (golden.empty()) throw SamplingError("cannot corrupt an empty golden set");
  const int m = golden.num_entities();
  const int n = golden.num_relations();
  if (golden.size() >= static_cast<std::size_t>(m) * static_cast<std::size_t>(n))
    throw SamplingError("negative pool is empty: every triplet is golden");

  const std::vector<Triplet> members = golden.members();
  std::vector<Triplet> out;
  out.reserve(count);
  std::vector<Triplet> candidates;
  for (std::size_t i = 0; i < count; ++i) {
    const Triplet& base = members[i % members.size()];
    candidates.clear();
    for (int r = 0; r < n; ++r) {
      const Triplet c{base.head, r, base.tail};
      if (!golden.contains(c)) candidates.push_back(c);
    }
    if (candidates.empty()) {
      for (int e = 0; e < m; ++e) {
        const Triplet c{base.head, base.relation, e};
        if (!golden.contains(c)) candidates.push_back(c);
      }
    }
    if (candidates.empty()) {
      for (int r = 0; r < n; ++r)
        for (int e = 0; e < m; ++e) {
          const Triplet c{base.head, r, e};
          if (!golden.contains(c)) candidates.push_back(c);
        }
    }
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    out.push_back(candidates[pick(rng)]);
  }
  return out;
}

double margin_loss_and_grads(TransHParams& params, const std::vector<Triplet>& positives,
                             const std::vector<Triplet>& negatives, double margin, bool accumulate) {
  if (positives.empty() || positives.size() != negatives.size())
    throw PairingError("margin loss needs equally many positives and negatives (" +
                       std::to_string(positives.size()) + " vs " + std::to_string(negatives.size()) + ")");
  double loss = 0;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double hinge = transh_score(params, positives[i]) + margin - transh_score(params, negatives[i]);
    if (hinge <= 0) continue;
    loss += hinge;
    if (accumulate) {
      transh_score_backward(params, positives[i], 1.0);
      transh_score_backward(params, negatives[i], -1.0);
    }
  }
  return loss;
}

double orthogonality_penalty_and_grads(TransHParams& params, double epsilon, double weight, bool accumulate) {
  double total = 0;
  for (int r = 0; r < params.num_relations(); ++r) {
    const VectorXr w = params.normal.value.row(r);
    const VectorXr d = params.translation.value.row(r);
    const double dd = d.squaredNorm();
    if (dd == 0) continue;
    const double wd = w.dot(d);
    const double term = wd * wd / dd - epsilon * epsilon;
    if (term <= 0) continue;
    total += weight * term;
    if (accumulate) {
      params.normal.grad.row(r) += weight * (2.0 * wd / dd) * d.transpose();
      params.translation.grad.row(r) +=
          weight * ((2.0 * wd / dd) * w - (2.0 * wd * wd / (dd * dd)) * d).transpose();
    }
  }
  return total;
}

void constrain(TransHParams& params) {
  auto& normal = params.normal.value;
  for (Eigen::Index r = 0; r < normal.rows(); ++r) {
    const double norm = normal.row(r).norm();
    if (!(norm > 0) || !std::isfinite(norm))
      throw ConstraintError("relation normal " + std::to_string(r) + " has degenerate norm");
    normal.row(r) /= norm;
  }
  auto& entity = params.entity.value;
  for (Eigen::Index e = 0; e < entity.rows(); ++e) {
    const double norm = entity.row(e).norm();
    if (norm > 1.0) entity.row(e) /= norm;
  }
}

double max_normal_deviation(const TransHParams& params) {
  double worst = 0;
  for (Eigen::Index r = 0; r < params.normal.value.rows(); ++r)
    worst = std::max(worst, std::abs(params.normal.value.row(r).norm() - 1.0));
  return worst;
}

int relation_rank(const TransHParams& params, const Triplet& t) {
  const double golden = transh_score(params, t);
  int rank = 1;
  for (int r = 0; r < params.num_relations(); ++r) {
    if (r == t.relation) continue;
    if (transh_score(params, {t.head, r, t.tail}) <= golden) ++rank;
  }
  return rank;
}

}  // namespace transhoi
