#include "transhoi/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "transhoi/error.hpp"

namespace transhoi {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void push_stack(std::vector<DenseLayer<double>*>& out, DenseStack<double>& s) {
  for (auto& l : s.layers) out.push_back(&l);
}

std::string layer_name(const DenseLayer<double>& l) {
  const auto& n = l.weight.name;
  return n.substr(0, n.rfind(".weight"));
}

}  // namespace

std::vector<DenseLayer<double>*> dense_layers(Model& m) {
  std::vector<DenseLayer<double>*> out;
  push_stack(out, m.encoder.appearance);
  out.push_back(&m.encoder.human_fc);
  out.push_back(&m.encoder.object_fc);
  push_stack(out, m.encoder.edge);
  out.push_back(&m.head.message_to_human);
  out.push_back(&m.head.message_to_object);
  out.push_back(&m.head.update_human);
  out.push_back(&m.head.update_object);
  push_stack(out, m.head.verb_classifier);
  push_stack(out, m.head.interactiveness);
  return out;
}

ordered_json matrix_to_json(const MatrixXr& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXr matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  MatrixXr m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(where + ": ragged matrix row " + std::to_string(r));
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError(where + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  if (!m.allFinite()) throw ParseError(where + ": non-finite entry");
  return m;
}

ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
  Model& m = const_cast<Model&>(ckpt.model);
  ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["vocab"] = {{"objects", m.vocab.objects()},
                {"verbs", m.vocab.verbs()},
                {"person", m.vocab.object_name(m.vocab.person())}};
  j["feature_dim"] = m.feature_dim;
  j["config"] = to_json(m.config);
  if (m.kge) {
    j["kge"] = {{"entity", matrix_to_json(m.kge->entity.value)},
                {"normal", matrix_to_json(m.kge->normal.value)},
                {"translation", matrix_to_json(m.kge->translation.value)}};
  } else {
    j["kge"] = nullptr;
  }
  ordered_json layers = ordered_json::array();
  for (const auto* l : dense_layers(m)) {
    ordered_json jl;
    jl["name"] = layer_name(*l);
    jl["activation"] = std::string(to_string(l->activation));
    jl["weight"] = matrix_to_json(l->weight.value);
    jl["bias"] = matrix_to_json(l->bias.value);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  j["training"] = {{"epochs", ckpt.training.epochs}, {"loss_curve", ckpt.training.loss_curve}};
  return j;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) { return checkpoint_to_json(ckpt).dump() + "\n"; }

Checkpoint parse_checkpoint(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint parse error: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("format_version")) throw ParseError("checkpoint: missing format_version");
    const json& version = j.at("format_version");
    if (!version.is_number_integer() || version.get<int>() != kCheckpointFormatVersion)
      throw CompatibilityError("checkpoint format version " + version.dump() + " is not supported (expected " +
                               std::to_string(kCheckpointFormatVersion) + "); refusing to upgrade");

    const json& jv = j.at("vocab");
    Vocab vocab(jv.at("objects").get<std::vector<std::string>>(), jv.at("verbs").get<std::vector<std::string>>(),
                jv.at("person").get<std::string>());
    const RunConfig config = config_from_json(j.at("config"));
    const int feature_dim = j.at("feature_dim").get<int>();

    Checkpoint ckpt;
    ckpt.model = make_model(vocab, feature_dim, config);
    Model& m = ckpt.model;

    const json& jk = j.at("kge");
    if (m.kge.has_value() != !jk.is_null()) throw ParseError("checkpoint: kge block does not match embedding_dim");
    if (m.kge) {
      const auto load = [&](Param<double>& p, const char* key) {
        MatrixXr v = matrix_from_json(jk.at(key), std::string("kge.") + key);
        if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
          throw ParseError(std::string("checkpoint: kge.") + key + " has the wrong shape");
        p = Param<double>(p.name, std::move(v));
      };
      load(m.kge->entity, "entity");
      load(m.kge->normal, "normal");
      load(m.kge->translation, "translation");
    }

    const json& jl = j.at("layers");
    auto layers = dense_layers(m);
    if (!jl.is_array() || jl.size() != layers.size()) throw ParseError("checkpoint: wrong number of layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = *layers[i];
      const std::string name = layer_name(l);
      if (jl[i].at("name").get<std::string>() != name) throw ParseError("checkpoint: expected layer '" + name + "'");
      if (activation_from_string(jl[i].at("activation").get<std::string>()) != l.activation)
        throw ParseError("checkpoint: layer '" + name + "' has the wrong activation");
      MatrixXr w = matrix_from_json(jl[i].at("weight"), name + ".weight");
      MatrixXr b = matrix_from_json(jl[i].at("bias"), name + ".bias");
      if (w.rows() != l.weight.value.rows() || w.cols() != l.weight.value.cols() || b.rows() != l.bias.value.rows() ||
          b.cols() != 1)
        throw ParseError("checkpoint: layer '" + name + "' has the wrong shape");
      l.weight = Param<double>(l.weight.name, std::move(w));
      l.bias = Param<double>(l.bias.name, std::move(b));
    }

    const json& jt = j.at("training");
    ckpt.training.epochs = jt.at("epochs").get<int>();
    ckpt.training.loss_curve = jt.at("loss_curve").get<std::vector<double>>();
    return ckpt;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out << serialize_checkpoint(ckpt);
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into place at '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace transhoi
