#include "bornseq/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bornseq/errors.hpp"

namespace bornseq {

using nlohmann::json;

namespace {

json encode_values(std::span<const cplx> values) {
  json arr = json::array();
  for (const auto& z : values) arr.push_back(json::array({z.real(), z.imag()}));
  return arr;
}

std::vector<cplx> decode_values(const json& arr, std::size_t expected, const std::string& field) {
  if (!arr.is_array()) throw LoadError("checkpoint field '" + field + "' must be an array");
  if (arr.size() != expected) {
    std::ostringstream msg;
    msg << "checkpoint field '" << field << "' has " << arr.size() << " entries, shape requires " << expected;
    throw LoadError(msg.str());
  }
  std::vector<cplx> out;
  out.reserve(expected);
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      throw LoadError("checkpoint field '" + field + "' must hold [real, imaginary] number pairs");
    out.emplace_back(pair[0].get<double>(), pair[1].get<double>());
  }
  return out;
}

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw LoadError("checkpoint is missing field '" + where + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw LoadError("checkpoint field '" + where + key + "' has the wrong type");
  }
}

json encode_config(const TrainConfig& c) {
  return {{"lr_mps", c.lr_mps},         {"lr_emb", c.lr_emb},         {"batch_size", c.batch_size},
          {"epochs", c.epochs},         {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},     {"seed", c.seed},             {"freeze_embedding", c.freeze_embedding},
          {"log_clamp", c.log_clamp}};
}

TrainConfig decode_config(const json& j) {
  const std::string w = "config.";
  TrainConfig c;
  c.lr_mps = get_field<double>(j, "lr_mps", w);
  c.lr_emb = get_field<double>(j, "lr_emb", w);
  c.batch_size = get_field<int>(j, "batch_size", w);
  c.epochs = get_field<int>(j, "epochs", w);
  c.adam_beta1 = get_field<double>(j, "adam_beta1", w);
  c.adam_beta2 = get_field<double>(j, "adam_beta2", w);
  c.adam_eps = get_field<double>(j, "adam_eps", w);
  c.seed = get_field<std::uint64_t>(j, "seed", w);
  c.freeze_embedding = get_field<bool>(j, "freeze_embedding", w);
  c.log_clamp = get_field<double>(j, "log_clamp", w);
  return c;
}

}  // namespace

std::string checkpoint_to_string(const ModelBundle& bundle) {
  const Model& m = bundle.model;
  json root;
  root["format"] = kCheckpointFormat;
  root["n"] = m.n();
  root["v"] = m.v();
  root["p"] = m.p();
  root["bond_dims"] = m.mps.bond_dims();

  json aliases = json::array();
  for (const auto& [c, idx] : bundle.vocab.aliases()) aliases.push_back(json::array({std::string(1, c), idx}));
  root["vocab"] = {{"symbols", bundle.vocab.symbols()},
                   {"aliases", aliases},
                   {"pad", bundle.vocab.pad_index().has_value()}};

  if (m.embedding.is_trainable()) {
    // gamma is column-major in memory; store it row-major like every other array.
    const Mat& g = m.embedding.params().gamma;
    std::vector<cplx> flat;
    flat.reserve(g.size());
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) flat.push_back(g(r, c));
    root["embedding"] = {{"mode", "trainable"}, {"shape", {g.rows(), g.cols()}}, {"gamma", encode_values(flat)}};
  } else {
    root["embedding"] = {{"mode", "one-hot"}};
  }

  json tensors = json::array();
  for (const auto& t : m.mps.tensors()) tensors.push_back({{"shape", t.shape()}, {"data", encode_values(t.data())}});
  root["mps"] = tensors;
  root["config"] = encode_config(bundle.config);
  root["seed"] = bundle.seed;
  return root.dump() + "\n";
}

ModelBundle checkpoint_from_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  const auto format = get_field<std::string>(root, "format", "");
  if (format != kCheckpointFormat)
    throw LoadError("checkpoint field 'format' is '" + format + "', expected '" + kCheckpointFormat + "'");

  const int n = get_field<int>(root, "n", "");
  const int v = get_field<int>(root, "v", "");
  const int p = get_field<int>(root, "p", "");
  const auto bond_dims = get_field<std::vector<int>>(root, "bond_dims", "");
  if (n < 1 || v < 1 || p < 1) throw LoadError("checkpoint fields 'n', 'v', 'p' must be positive");
  if (static_cast<int>(bond_dims.size()) != n + 1) throw LoadError("checkpoint field 'bond_dims' must have n + 1 entries");

  const json& vj = root.contains("vocab") ? root["vocab"] : json();
  std::vector<std::pair<char, int>> aliases;
  for (const auto& a : get_field<json>(vj, "aliases", "vocab.")) {
    if (!a.is_array() || a.size() != 2 || !a[0].is_string() || a[0].get<std::string>().size() != 1 ||
        !a[1].is_number_integer())
      throw LoadError("checkpoint field 'vocab.aliases' must hold [letter, index] pairs");
    aliases.emplace_back(a[0].get<std::string>()[0], a[1].get<int>());
  }
  Vocab vocab;
  try {
    vocab = Vocab::restore(get_field<std::string>(vj, "symbols", "vocab."), aliases, get_field<bool>(vj, "pad", "vocab."));
  } catch (const InputError& e) {
    throw LoadError(std::string("checkpoint field 'vocab' is invalid: ") + e.what());
  }
  if (vocab.size() != v) throw LoadError("checkpoint field 'vocab' has a different size than 'v'");

  const json& ej = root.contains("embedding") ? root["embedding"] : json();
  const auto mode = get_field<std::string>(ej, "mode", "embedding.");
  std::optional<Embedding> embedding;
  if (mode == "trainable") {
    const auto shape = get_field<std::vector<int>>(ej, "shape", "embedding.");
    if (shape.size() != 2 || shape[0] != v * p || shape[1] != p)
      throw LoadError("checkpoint field 'embedding.shape' must be [v*p, p]");
    const auto flat = decode_values(get_field<json>(ej, "gamma", "embedding."), static_cast<std::size_t>(v) * p * p,
                                    "embedding.gamma");
    EmbeddingParams params{v, p, Mat(v * p, p)};
    for (int r = 0; r < v * p; ++r)
      for (int c = 0; c < p; ++c) params.gamma(r, c) = flat[static_cast<std::size_t>(r) * p + c];
    embedding = Embedding::trainable(std::move(params));
  } else if (mode == "one-hot") {
    if (p != v) throw LoadError("checkpoint field 'p' must equal 'v' for a one-hot embedding");
    embedding = Embedding::one_hot(v);
  } else {
    throw LoadError("checkpoint field 'embedding.mode' must be 'trainable' or 'one-hot'");
  }

  const auto mj = get_field<json>(root, "mps", "");
  if (!mj.is_array() || static_cast<int>(mj.size()) != n) throw LoadError("checkpoint field 'mps' must list n tensors");
  std::vector<ComplexTensor> tensors;
  for (int i = 0; i < n; ++i) {
    const std::string where = "mps[" + std::to_string(i) + "].";
    const auto shape = get_field<std::vector<std::size_t>>(mj[i], "shape", where);
    const std::vector<std::size_t> expected = {static_cast<std::size_t>(bond_dims[i]), static_cast<std::size_t>(p),
                                               static_cast<std::size_t>(bond_dims[i + 1])};
    if (shape != expected) throw LoadError("checkpoint field '" + where + "shape' is inconsistent with 'bond_dims'");
    auto data = decode_values(get_field<json>(mj[i], "data", where), shape[0] * shape[1] * shape[2], where + "data");
    tensors.emplace_back(shape, std::move(data));
  }
  IsometricMps mps;
  try {
    mps = IsometricMps::from_tensors(std::move(tensors));
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint field 'mps' is inconsistent: ") + e.what());
  }

  ModelBundle bundle{{std::move(*embedding), std::move(mps)},
                     std::move(vocab),
                     decode_config(get_field<json>(root, "config", "")),
                     get_field<std::uint64_t>(root, "seed", "")};
  return bundle;
}

void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out << checkpoint_to_string(bundle);
  if (!out) throw InputError("failed writing checkpoint: " + path);
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace bornseq
