#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "latefuse/fusion.hpp"
#include "latefuse/hash.hpp"
#include "latefuse/nn_engine.hpp"
#include "latefuse/tensor.hpp"
#include "latefuse/text_prep.hpp"

namespace latefuse {

// Model container: a magic line, a one-line JSON manifest, then the
// parameter tensors as raw little-endian doubles in declaration order.
inline constexpr const char* kModelMagic = "#latefuse-model v1";

namespace detail {

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Tensor read_tensor(std::istream& in, std::vector<std::size_t> shape,
                          const std::string& path) {
  Tensor t(std::move(shape));
  in.read(reinterpret_cast<char*>(t.values.data()),
          static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != t.values.size() * sizeof(double))
    throw std::runtime_error(path + ": truncated model file");
  return t;
}

inline nlohmann::json open_manifest(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic)
    throw std::runtime_error(path + ": not a model file (bad magic line)");
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing manifest line");
  try {
    return nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": malformed manifest: " + e.what());
  }
}

inline void finish_read(std::istream& in, const std::string& path) {
  char extra;
  if (in.read(&extra, 1)) throw std::runtime_error(path + ": trailing bytes after parameters");
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return in;
}

inline nlohmann::json profile_to_json(const PrepProfile& p) {
  return {{"remove_stopwords", p.remove_stopwords},
          {"max_len", p.max_len},
          {"strip_digits", p.strip_digits},
          {"strip_punct", p.strip_punct},
          {"max_word_len", p.max_word_len}};
}

inline PrepProfile profile_from_json(const nlohmann::json& j) {
  PrepProfile p;
  p.remove_stopwords = j.at("remove_stopwords").get<bool>();
  p.max_len = j.at("max_len").get<std::size_t>();
  p.strip_digits = j.at("strip_digits").get<bool>();
  p.strip_punct = j.at("strip_punct").get<bool>();
  p.max_word_len = j.at("max_word_len").get<std::size_t>();
  return p;
}

}  // namespace detail

inline std::string model_kind(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  return detail::open_manifest(in, path).at("kind").get<std::string>();
}

// ---------------------------------------------------------------------------
// Text CNN
// ---------------------------------------------------------------------------

inline void save_text_cnn(const std::string& path, const TextCnnModel& model) {
  nlohmann::json manifest{
      {"kind", "text_cnn"},
      {"modality", model.modality},
      {"seed", model.seed},
      {"labels_hash", hex16(model.labels_hash)},
      {"max_len", model.max_len},
      {"profile", detail::profile_to_json(model.profile)},
      {"freeze_embeddings", model.freeze_embeddings},
      {"dropout_rate", model.dropout_rate},
      {"vocab_size", model.embedding.vocab_size()},
      {"embedding_dim", model.embedding.dim},
      {"kernel", model.conv.kernel},
      {"filters", model.conv.filters},
      {"hidden_units", model.dense_hidden.out},
      {"label_count", model.dense_out.out},
      {"tokens", model.token_vocab.tokens},
  };
  std::string covered(model.embedding.covered.size(), '0');
  for (std::size_t i = 0; i < covered.size(); ++i)
    if (model.embedding.covered[i]) covered[i] = '1';
  manifest["covered"] = covered;

  std::ofstream out = detail::open_for_write(path);
  out << kModelMagic << "\n" << manifest.dump() << "\n";
  for (const Tensor* t : model.param_tensors()) detail::write_doubles(out, t->values);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TextCnnModel load_text_cnn(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  const nlohmann::json m = detail::open_manifest(in, path);
  if (m.at("kind") != "text_cnn")
    throw std::runtime_error(path + ": expected a text_cnn model, found " +
                             m.at("kind").get<std::string>());

  TextCnnModel model;
  model.modality = m.at("modality").get<std::string>();
  model.seed = m.at("seed").get<std::uint64_t>();
  model.labels_hash = parse_hex64(m.at("labels_hash").get<std::string>());
  model.max_len = m.at("max_len").get<std::size_t>();
  model.profile = detail::profile_from_json(m.at("profile"));
  model.freeze_embeddings = m.at("freeze_embeddings").get<bool>();
  model.dropout_rate = m.at("dropout_rate").get<double>();

  const auto vocab_size = m.at("vocab_size").get<std::size_t>();
  const auto dim = m.at("embedding_dim").get<std::size_t>();
  const auto kernel = m.at("kernel").get<std::size_t>();
  const auto filters = m.at("filters").get<std::size_t>();
  const auto hidden = m.at("hidden_units").get<std::size_t>();
  const auto labels = m.at("label_count").get<std::size_t>();

  model.token_vocab.tokens = m.at("tokens").get<std::vector<std::string>>();
  if (model.token_vocab.tokens.size() != vocab_size ||
      model.token_vocab.tokens.size() < 2 || model.token_vocab.tokens[0] != "<pad>" ||
      model.token_vocab.tokens[1] != "<unk>")
    throw std::runtime_error(path + ": malformed token vocabulary in manifest");
  model.token_vocab.index.clear();
  for (std::size_t i = 2; i < model.token_vocab.tokens.size(); ++i)
    model.token_vocab.index[model.token_vocab.tokens[i]] = i;

  model.embedding.dim = dim;
  model.embedding.matrix = detail::read_tensor(in, {vocab_size, dim}, path);
  const std::string covered = m.at("covered").get<std::string>();
  if (covered.size() != vocab_size)
    throw std::runtime_error(path + ": coverage flags do not match vocab size");
  model.embedding.covered.assign(vocab_size, 0);
  for (std::size_t i = 0; i < vocab_size; ++i)
    model.embedding.covered[i] = covered[i] == '1' ? 1 : 0;

  model.conv = Conv1dLayer{kernel, dim, filters,
                           detail::read_tensor(in, {kernel, dim, filters}, path),
                           detail::read_tensor(in, {filters}, path)};
  model.dense_hidden = DenseLayer{filters, hidden, Activation::relu,
                                  detail::read_tensor(in, {filters, hidden}, path),
                                  detail::read_tensor(in, {hidden}, path)};
  model.dense_out = DenseLayer{hidden, labels, Activation::sigmoid,
                               detail::read_tensor(in, {hidden, labels}, path),
                               detail::read_tensor(in, {labels}, path)};
  detail::finish_read(in, path);
  return model;
}

// ---------------------------------------------------------------------------
// Policy network
// ---------------------------------------------------------------------------

inline void save_policy_network(const std::string& path, const PolicyNetworkModel& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.mlp.layers)
    layers.push_back({{"units", l.out}, {"activation", activation_name(l.activation)}});
  const nlohmann::json manifest{
      {"kind", "mlp_policy"},
      {"labels_hash", hex16(model.labels_hash)},
      {"modalities", model.modalities},
      {"label_count", model.label_count},
      {"seed", model.seed},
      {"input_dim", model.mlp.input_dim},
      {"layers", layers},
  };
  std::ofstream out = detail::open_for_write(path);
  out << kModelMagic << "\n" << manifest.dump() << "\n";
  for (const auto& l : model.mlp.layers) {
    detail::write_doubles(out, l.weights.values);
    detail::write_doubles(out, l.bias.values);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline PolicyNetworkModel load_policy_network(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  const nlohmann::json m = detail::open_manifest(in, path);
  if (m.at("kind") != "mlp_policy")
    throw std::runtime_error(path + ": expected a mlp_policy model, found " +
                             m.at("kind").get<std::string>());
  PolicyNetworkModel model;
  model.labels_hash = parse_hex64(m.at("labels_hash").get<std::string>());
  model.modalities = m.at("modalities").get<std::vector<std::string>>();
  model.label_count = m.at("label_count").get<std::size_t>();
  model.seed = m.at("seed").get<std::uint64_t>();
  model.mlp.input_dim = m.at("input_dim").get<std::size_t>();
  std::size_t in_dim = model.mlp.input_dim;
  for (const auto& entry : m.at("layers")) {
    const auto units = entry.at("units").get<std::size_t>();
    const Activation act = activation_from_name(entry.at("activation").get<std::string>());
    model.mlp.layers.push_back(DenseLayer{in_dim, units, act,
                                          detail::read_tensor(in, {in_dim, units}, path),
                                          detail::read_tensor(in, {units}, path)});
    in_dim = units;
  }
  if (model.mlp.layers.empty()) throw std::runtime_error(path + ": policy model has no layers");
  detail::finish_read(in, path);
  return model;
}

// ---------------------------------------------------------------------------
// Ridge
// ---------------------------------------------------------------------------

inline void save_ridge(const std::string& path, const RidgeModel& model) {
  const nlohmann::json manifest{
      {"kind", "ridge"},
      {"labels_hash", hex16(model.labels_hash)},
      {"modalities", model.modalities},
      {"label_count", model.label_count},
      {"alpha", model.options.alpha},
      {"intercept", model.options.intercept},
      {"feature_dim", model.weights.dim(0)},
  };
  std::ofstream out = detail::open_for_write(path);
  out << kModelMagic << "\n" << manifest.dump() << "\n";
  detail::write_doubles(out, model.weights.values);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline RidgeModel load_ridge(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  const nlohmann::json m = detail::open_manifest(in, path);
  if (m.at("kind") != "ridge")
    throw std::runtime_error(path + ": expected a ridge model, found " +
                             m.at("kind").get<std::string>());
  RidgeModel model;
  model.labels_hash = parse_hex64(m.at("labels_hash").get<std::string>());
  model.modalities = m.at("modalities").get<std::vector<std::string>>();
  model.label_count = m.at("label_count").get<std::size_t>();
  model.options.alpha = m.at("alpha").get<double>();
  model.options.intercept = m.at("intercept").get<bool>();
  const auto dim = m.at("feature_dim").get<std::size_t>();
  model.weights = detail::read_tensor(in, {dim, model.label_count}, path);
  detail::finish_read(in, path);
  return model;
}

}  // namespace latefuse
