#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "latefuse/label_space.hpp"
#include "latefuse/metrics.hpp"
#include "latefuse/rng.hpp"
#include "latefuse/tensor.hpp"
#include "latefuse/text_prep.hpp"

namespace latefuse {

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { identity, relu, sigmoid, tanh };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_name(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw std::runtime_error("unknown activation: " + std::string(name));
}

// Branchy form: never evaluates exp on a large positive argument.
inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::sigmoid: return stable_sigmoid(z);
    case Activation::tanh: return std::tanh(z);
  }
  return z;
}

// Derivative in terms of pre-activation z and output value out.
inline double activation_derivative(Activation a, double z, double out) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return out * (1.0 - out);
    case Activation::tanh: return 1.0 - out * out;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Layer primitives. Forward passes cache what backward needs; backward
// accumulates parameter gradients so a batch can share one gradient buffer.
// ---------------------------------------------------------------------------

inline Tensor embedding_forward(const std::vector<std::size_t>& indices,
                                const EmbeddingTable& table) {
  if (indices.empty())
    throw std::runtime_error("embedding_forward: empty sequence (pad to max_len first)");
  const std::size_t rows = table.vocab_size();
  Tensor out({indices.size(), table.dim});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows)
      throw std::runtime_error("embedding_forward: index " + std::to_string(indices[i]) +
                               " out of range (vocab size " + std::to_string(rows) + ")");
    for (std::size_t d = 0; d < table.dim; ++d)
      out.at2(i, d) = table.matrix.at2(indices[i], d);
  }
  return out;
}

inline void embedding_backward(const std::vector<std::size_t>& indices, const Tensor& grad_out,
                               Tensor& grad_table) {
  const std::size_t dim = grad_table.dim(1);
  for (std::size_t i = 0; i < indices.size(); ++i)
    for (std::size_t d = 0; d < dim; ++d)
      grad_table.at2(indices[i], d) += grad_out.at2(i, d);
}

struct Conv1dLayer {
  std::size_t kernel = 0;
  std::size_t in_dim = 0;
  std::size_t filters = 0;
  Tensor weights;  // [kernel, in_dim, filters]
  Tensor bias;     // [filters]
};

// Valid (no padding) convolution over the time axis, full width over the
// embedding axis. Linear: any nonlinearity is applied by a later layer.
inline Tensor conv1d_forward(const Tensor& x, const Conv1dLayer& conv) {
  const std::size_t len = x.dim(0), d_in = x.dim(1);
  if (d_in != conv.in_dim) throw std::runtime_error("conv1d_forward: input width mismatch");
  if (len < conv.kernel)
    throw std::runtime_error("conv1d_forward: sequence length " + std::to_string(len) +
                             " shorter than kernel " + std::to_string(conv.kernel));
  const std::size_t t_out = len - conv.kernel + 1;
  Tensor out({t_out, conv.filters});
  for (std::size_t t = 0; t < t_out; ++t) {
    for (std::size_t f = 0; f < conv.filters; ++f) out.at2(t, f) = conv.bias[f];
    for (std::size_t i = 0; i < conv.kernel; ++i) {
      for (std::size_t d = 0; d < d_in; ++d) {
        const double xv = x.at2(t + i, d);
        const double* w = &conv.weights.values[(i * d_in + d) * conv.filters];
        double* o = &out.values[t * conv.filters];
        for (std::size_t f = 0; f < conv.filters; ++f) o[f] += xv * w[f];
      }
    }
  }
  return out;
}

// Returns grad wrt x; accumulates weight/bias grads into grad_conv.
inline Tensor conv1d_backward(const Tensor& x, const Conv1dLayer& conv, const Tensor& grad_out,
                              Conv1dLayer& grad_conv) {
  const std::size_t len = x.dim(0), d_in = x.dim(1);
  const std::size_t t_out = len - conv.kernel + 1;
  Tensor grad_x({len, d_in});
  for (std::size_t t = 0; t < t_out; ++t) {
    const double* go = &grad_out.values[t * conv.filters];
    for (std::size_t f = 0; f < conv.filters; ++f) grad_conv.bias[f] += go[f];
    for (std::size_t i = 0; i < conv.kernel; ++i) {
      for (std::size_t d = 0; d < d_in; ++d) {
        const double xv = x.at2(t + i, d);
        const double* w = &conv.weights.values[(i * d_in + d) * conv.filters];
        double* gw = &grad_conv.weights.values[(i * d_in + d) * conv.filters];
        double acc = 0.0;
        for (std::size_t f = 0; f < conv.filters; ++f) {
          gw[f] += xv * go[f];
          acc += w[f] * go[f];
        }
        grad_x.at2(t + i, d) += acc;
      }
    }
  }
  return grad_x;
}

struct MaxPoolCache {
  std::vector<std::size_t> argmax;  // per filter, first maximizing time step
};

// Max over time per filter. Ties break toward the smallest time index, so
// the gradient always has one deterministic destination.
inline Tensor global_max_pool(const Tensor& x, MaxPoolCache* cache = nullptr) {
  const std::size_t t_in = x.dim(0), filters = x.dim(1);
  if (t_in == 0) throw std::runtime_error("global_max_pool: empty input");
  Tensor out({filters});
  std::vector<std::size_t> argmax(filters, 0);
  for (std::size_t f = 0; f < filters; ++f) {
    double best = x.at2(0, f);
    std::size_t best_t = 0;
    for (std::size_t t = 1; t < t_in; ++t) {
      if (x.at2(t, f) > best) {
        best = x.at2(t, f);
        best_t = t;
      }
    }
    out[f] = best;
    argmax[f] = best_t;
  }
  if (cache) cache->argmax = std::move(argmax);
  return out;
}

inline Tensor global_max_pool_backward(const Tensor& x, const MaxPoolCache& cache,
                                       const Tensor& grad_out) {
  Tensor grad_x({x.dim(0), x.dim(1)});
  for (std::size_t f = 0; f < x.dim(1); ++f) grad_x.at2(cache.argmax[f], f) += grad_out[f];
  return grad_x;
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;
  Tensor weights;  // [in, out]
  Tensor bias;     // [out]
};

struct DenseCache {
  Tensor z;  // pre-activation
  Tensor a;  // output
};

inline Tensor dense_forward(const Tensor& x, const DenseLayer& layer,
                            DenseCache* cache = nullptr) {
  if (x.size() != layer.in) throw std::runtime_error("dense_forward: input size mismatch");
  Tensor z({layer.out});
  for (std::size_t j = 0; j < layer.out; ++j) z[j] = layer.bias[j];
  for (std::size_t i = 0; i < layer.in; ++i) {
    const double xv = x[i];
    const double* w = &layer.weights.values[i * layer.out];
    for (std::size_t j = 0; j < layer.out; ++j) z[j] += xv * w[j];
  }
  Tensor a({layer.out});
  for (std::size_t j = 0; j < layer.out; ++j) a[j] = apply_activation(layer.activation, z[j]);
  if (cache) {
    cache->z = std::move(z);
    cache->a = a;
  }
  return a;
}

inline Tensor dense_backward(const Tensor& x, const DenseLayer& layer, const DenseCache& cache,
                             const Tensor& grad_a, DenseLayer& grad_layer) {
  Tensor dz({layer.out});
  for (std::size_t j = 0; j < layer.out; ++j)
    dz[j] = grad_a[j] * activation_derivative(layer.activation, cache.z[j], cache.a[j]);
  for (std::size_t j = 0; j < layer.out; ++j) grad_layer.bias[j] += dz[j];
  Tensor grad_x({layer.in});
  for (std::size_t i = 0; i < layer.in; ++i) {
    const double xv = x[i];
    const double* w = &layer.weights.values[i * layer.out];
    double* gw = &grad_layer.weights.values[i * layer.out];
    double acc = 0.0;
    for (std::size_t j = 0; j < layer.out; ++j) {
      gw[j] += xv * dz[j];
      acc += w[j] * dz[j];
    }
    grad_x[i] = acc;
  }
  return grad_x;
}

struct DropoutMask {
  std::vector<std::uint8_t> keep;
  double rate = 0.0;
};

// Inverted dropout: survivors scaled by 1/(1-rate) at train time so
// inference is the identity.
inline Tensor dropout_forward(const Tensor& x, double rate, bool training, RngStream* stream,
                              DropoutMask* mask = nullptr) {
  if (rate < 0.0 || rate >= 1.0) throw std::runtime_error("dropout_forward: rate must be in [0,1)");
  if (!training || rate == 0.0) {
    if (mask) {
      mask->keep.assign(x.size(), 1);
      mask->rate = 0.0;
    }
    return x;
  }
  if (!stream) throw std::runtime_error("dropout_forward: training mode needs an RNG stream");
  const double scale = 1.0 / (1.0 - rate);
  Tensor out(x.shape);
  std::vector<std::uint8_t> keep(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    keep[i] = stream->uniform() >= rate ? 1 : 0;
    out[i] = keep[i] ? x[i] * scale : 0.0;
  }
  if (mask) {
    mask->keep = std::move(keep);
    mask->rate = rate;
  }
  return out;
}

inline Tensor dropout_backward(const Tensor& grad_out, const DropoutMask& mask) {
  if (mask.rate == 0.0) return grad_out;
  const double scale = 1.0 / (1.0 - mask.rate);
  Tensor grad(grad_out.shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    grad[i] = mask.keep[i] ? grad_out[i] * scale : 0.0;
  return grad;
}

// ---------------------------------------------------------------------------
// Multi-label cross-entropy: per-class binary cross-entropy summed over
// classes. Log arguments are clamped at 1e-12.
// ---------------------------------------------------------------------------

inline constexpr double kXentEps = 1e-12;

inline double multilabel_xent_loss(const Tensor& pred, const MultiHotVector& target) {
  if (pred.size() != target.size())
    throw std::runtime_error("multilabel_xent_loss: prediction/target size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (target[i])
      loss -= std::log(p > kXentEps ? p : kXentEps);
    else
      loss -= std::log(1.0 - p > kXentEps ? 1.0 - p : kXentEps);
  }
  return loss;
}

inline Tensor multilabel_xent_grad(const Tensor& pred, const MultiHotVector& target) {
  Tensor grad({pred.size()});
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i];
    if (target[i])
      grad[i] = -1.0 / (p > kXentEps ? p : kXentEps);
    else
      grad[i] = 1.0 / (1.0 - p > kXentEps ? 1.0 - p : kXentEps);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  std::uint64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  // One update over all parameter blocks. Moment buffers are allocated on
  // first use and must keep matching shapes afterwards.
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size())
      throw std::runtime_error("adam: parameter/gradient block count mismatch");
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t b = 0; b < params.size(); ++b) {
        m_[b].assign(params[b]->size(), 0.0);
        v_[b].assign(params[b]->size(), 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t b = 0; b < params.size(); ++b) {
      Tensor& p = *params[b];
      const Tensor& g = *grads[b];
      if (p.size() != m_[b].size() || g.size() != m_[b].size())
        throw std::runtime_error("adam: block shape changed between steps");
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[b][i] = cfg_.beta1 * m_[b][i] + (1.0 - cfg_.beta1) * g[i];
        v_[b][i] = cfg_.beta2 * v_[b][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double m_hat = m_[b][i] / bc1;
        const double v_hat = v_[b][i] / bc2;
        p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

inline void adam_step(AdamState& state, const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads) {
  state.step(params, grads);
}

// ---------------------------------------------------------------------------
// Layer specs and model architectures
// ---------------------------------------------------------------------------

struct LayerSpec {
  enum class Kind { embedding, conv1d, global_max_pool, dense, dropout };
  Kind kind = Kind::dense;
  std::size_t kernel_size = 0;                    // conv1d
  std::size_t filters = 0;                        // conv1d
  std::size_t units = 0;                          // dense
  Activation activation = Activation::identity;   // dense
  double rate = 0.0;                              // dropout
};

inline std::vector<LayerSpec> text_cnn_layers(std::size_t kernel, std::size_t filters,
                                              std::size_t hidden_units, double dropout_rate,
                                              std::size_t label_count) {
  std::vector<LayerSpec> layers(6);
  layers[0].kind = LayerSpec::Kind::embedding;
  layers[1] = {LayerSpec::Kind::conv1d, kernel, filters, 0, Activation::identity, 0.0};
  layers[2].kind = LayerSpec::Kind::global_max_pool;
  layers[3] = {LayerSpec::Kind::dense, 0, 0, hidden_units, Activation::relu, 0.0};
  layers[4] = {LayerSpec::Kind::dropout, 0, 0, 0, Activation::identity, dropout_rate};
  layers[5] = {LayerSpec::Kind::dense, 0, 0, label_count, Activation::sigmoid, 0.0};
  return layers;
}

// Text CNN: embedding -> conv1d -> global max pool -> dense(relu) ->
// dropout -> dense(sigmoid).
struct TextCnnModel {
  // metadata carried through serialization
  std::string modality;
  std::uint64_t seed = 0;
  std::uint64_t labels_hash = 0;
  std::size_t max_len = 0;
  PrepProfile profile{};
  TokenVocab token_vocab;
  bool freeze_embeddings = false;

  // parameters, in serialization order
  EmbeddingTable embedding;
  Conv1dLayer conv;
  DenseLayer dense_hidden;
  DenseLayer dense_out;
  double dropout_rate = 0.5;

  std::size_t label_count() const { return dense_out.out; }

  std::vector<Tensor*> param_tensors() {
    return {&embedding.matrix,      &conv.weights,      &conv.bias, &dense_hidden.weights,
            &dense_hidden.bias,     &dense_out.weights, &dense_out.bias};
  }
  std::vector<const Tensor*> param_tensors() const {
    return {&embedding.matrix,      &conv.weights,      &conv.bias, &dense_hidden.weights,
            &dense_hidden.bias,     &dense_out.weights, &dense_out.bias};
  }
};

inline void glorot_init(Tensor& w, std::size_t fan_in, std::size_t fan_out, RngStream& stream) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.values) v = stream.uniform(-bound, bound);
}

inline DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, RngStream& stream) {
  DenseLayer layer{in, out, act, Tensor({in, out}), Tensor({out})};
  glorot_init(layer.weights, in, out, stream);
  return layer;
}

inline TextCnnModel init_text_cnn(const TokenVocab& token_vocab, EmbeddingTable embedding,
                                  const std::vector<LayerSpec>& layers, std::size_t max_len,
                                  std::uint64_t seed) {
  const char* bad = "init_text_cnn: layer list must be embedding, conv1d, global_max_pool, "
                    "dense(relu), dropout, dense(sigmoid)";
  if (layers.size() != 6 || layers[0].kind != LayerSpec::Kind::embedding ||
      layers[1].kind != LayerSpec::Kind::conv1d ||
      layers[2].kind != LayerSpec::Kind::global_max_pool ||
      layers[3].kind != LayerSpec::Kind::dense || layers[4].kind != LayerSpec::Kind::dropout ||
      layers[5].kind != LayerSpec::Kind::dense)
    throw std::runtime_error(bad);
  if (layers[1].kernel_size == 0 || layers[1].filters == 0 || layers[3].units == 0 ||
      layers[5].units == 0)
    throw std::runtime_error("init_text_cnn: layer sizes must be positive");
  if (layers[4].rate < 0.0 || layers[4].rate >= 1.0)
    throw std::runtime_error("init_text_cnn: dropout rate must be in [0,1)");
  if (max_len < layers[1].kernel_size)
    throw std::runtime_error("init_text_cnn: max_len shorter than the convolution kernel");

  TextCnnModel model;
  model.seed = seed;
  model.max_len = max_len;
  model.token_vocab = token_vocab;
  model.embedding = std::move(embedding);
  model.dropout_rate = layers[4].rate;

  RngStream stream(seed, "init");
  const std::size_t k = layers[1].kernel_size, f = layers[1].filters;
  const std::size_t d = model.embedding.dim;
  model.conv = Conv1dLayer{k, d, f, Tensor({k, d, f}), Tensor({f})};
  glorot_init(model.conv.weights, k * d, f, stream);
  model.dense_hidden = make_dense(f, layers[3].units, layers[3].activation, stream);
  model.dense_out = make_dense(layers[3].units, layers[5].units, layers[5].activation, stream);
  return model;
}

struct TextCnnCache {
  Tensor embedded;
  Tensor conv_out;
  MaxPoolCache pool;
  Tensor pooled;
  DenseCache hidden_cache;
  DropoutMask drop_mask;
  Tensor dropped;
  DenseCache out_cache;
};

inline Tensor text_cnn_forward(const TextCnnModel& model, const std::vector<std::size_t>& seq,
                               bool training, RngStream* dropout_stream,
                               TextCnnCache* cache = nullptr) {
  TextCnnCache local;
  TextCnnCache& c = cache ? *cache : local;
  c.embedded = embedding_forward(seq, model.embedding);
  c.conv_out = conv1d_forward(c.embedded, model.conv);
  c.pooled = global_max_pool(c.conv_out, &c.pool);
  Tensor hidden = dense_forward(c.pooled, model.dense_hidden, &c.hidden_cache);
  c.dropped = dropout_forward(hidden, model.dropout_rate, training, dropout_stream, &c.drop_mask);
  return dense_forward(c.dropped, model.dense_out, &c.out_cache);
}

struct TextCnnGrads {
  Tensor embedding;
  Conv1dLayer conv;
  DenseLayer dense_hidden;
  DenseLayer dense_out;

  std::vector<const Tensor*> tensors() const {
    return {&embedding,         &conv.weights,      &conv.bias, &dense_hidden.weights,
            &dense_hidden.bias, &dense_out.weights, &dense_out.bias};
  }
  void zero() {
    embedding.fill(0.0);
    conv.weights.fill(0.0);
    conv.bias.fill(0.0);
    dense_hidden.weights.fill(0.0);
    dense_hidden.bias.fill(0.0);
    dense_out.weights.fill(0.0);
    dense_out.bias.fill(0.0);
  }
};

inline TextCnnGrads make_text_cnn_grads(const TextCnnModel& model) {
  TextCnnGrads g;
  g.embedding = Tensor(model.embedding.matrix.shape);
  g.conv = Conv1dLayer{model.conv.kernel, model.conv.in_dim, model.conv.filters,
                       Tensor(model.conv.weights.shape), Tensor(model.conv.bias.shape)};
  g.dense_hidden = DenseLayer{model.dense_hidden.in, model.dense_hidden.out,
                              model.dense_hidden.activation,
                              Tensor(model.dense_hidden.weights.shape),
                              Tensor(model.dense_hidden.bias.shape)};
  g.dense_out = DenseLayer{model.dense_out.in, model.dense_out.out, model.dense_out.activation,
                           Tensor(model.dense_out.weights.shape),
                           Tensor(model.dense_out.bias.shape)};
  return g;
}

// Accumulates gradients for one sample. The padding row of the embedding
// gradient is forced back to zero so that row never trains.
inline void text_cnn_backward(const TextCnnModel& model, const std::vector<std::size_t>& seq,
                              const TextCnnCache& cache, const Tensor& grad_pred,
                              TextCnnGrads& grads) {
  Tensor d_dropped =
      dense_backward(cache.dropped, model.dense_out, cache.out_cache, grad_pred, grads.dense_out);
  Tensor d_hidden = dropout_backward(d_dropped, cache.drop_mask);
  Tensor d_pooled = dense_backward(cache.pooled, model.dense_hidden, cache.hidden_cache, d_hidden,
                                   grads.dense_hidden);
  Tensor d_conv = global_max_pool_backward(cache.conv_out, cache.pool, d_pooled);
  Tensor d_embedded = conv1d_backward(cache.embedded, model.conv, d_conv, grads.conv);
  embedding_backward(seq, d_embedded, grads.embedding);
  for (std::size_t d = 0; d < grads.embedding.dim(1); ++d)
    grads.embedding.at2(TokenVocab::kPad, d) = 0.0;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;           // mean per-sample training loss
  double train_micro_f1 = 0.0; // thresholded at 0.5
};

namespace detail {

inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed,
                                               std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream stream(seed, "shuffle", epoch);
  stream.shuffle(order);
  return order;
}

inline MultiHotVector threshold_row(const Tensor& pred, double tau = 0.5) {
  MultiHotVector bits(pred.size(), 0);
  for (std::size_t i = 0; i < pred.size(); ++i) bits[i] = pred[i] >= tau ? 1 : 0;
  return bits;
}

[[noreturn]] inline void throw_diverged(std::size_t epoch) {
  throw std::runtime_error("training diverged: non-finite loss or weights at epoch " +
                           std::to_string(epoch) + "; try a lower learning rate");
}

}  // namespace detail

inline std::vector<MultiHotVector> encode_targets_copy(const std::vector<MultiHotVector>& t) {
  return t;
}

inline std::vector<EpochLog> train_text_cnn(TextCnnModel& model,
                                            const std::vector<std::vector<std::size_t>>& sequences,
                                            const std::vector<MultiHotVector>& targets,
                                            const TrainConfig& config) {
  if (sequences.empty()) throw std::runtime_error("train_text_cnn: empty corpus");
  if (sequences.size() != targets.size())
    throw std::runtime_error("train_text_cnn: sequence/target count mismatch");
  for (const auto& s : sequences)
    if (s.size() != model.max_len)
      throw std::runtime_error("train_text_cnn: all sequences must have length max_len");
  if (config.batch_size == 0) throw std::runtime_error("train_text_cnn: batch_size must be > 0");

  AdamState adam(AdamConfig{config.lr, config.beta1, config.beta2, config.adam_epsilon});
  TextCnnGrads grads = make_text_cnn_grads(model);

  std::vector<Tensor*> params = model.param_tensors();
  std::vector<const Tensor*> grad_tensors = grads.tensors();
  if (model.freeze_embeddings) {
    params.erase(params.begin());
    grad_tensors.erase(grad_tensors.begin());
  }

  const std::size_t n = sequences.size();
  std::vector<EpochLog> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> order = detail::shuffled_order(n, config.seed, epoch);
    RngStream dropout_stream(config.seed, "dropout", epoch);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      grads.zero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        TextCnnCache cache;
        Tensor pred = text_cnn_forward(model, sequences[idx], true, &dropout_stream, &cache);
        batch_loss += multilabel_xent_loss(pred, targets[idx]);
        Tensor grad_pred = multilabel_xent_grad(pred, targets[idx]);
        text_cnn_backward(model, sequences[idx], cache, grad_pred, grads);
      }
      if (!std::isfinite(batch_loss)) detail::throw_diverged(epoch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (const Tensor* g : grads.tensors())
        for (double& v : const_cast<Tensor*>(g)->values) v *= inv;
      adam.step(params, grad_tensors);
      loss_sum += batch_loss;
    }
    for (const Tensor* p : params)
      if (!all_finite(*p)) detail::throw_diverged(epoch);

    MicroCounts counts;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor pred = text_cnn_forward(model, sequences[i], false, nullptr);
      MultiHotVector bits = detail::threshold_row(pred);
      for (std::size_t j = 0; j < bits.size(); ++j) {
        if (bits[j] && targets[i][j]) ++counts.tp;
        else if (bits[j] && !targets[i][j]) ++counts.fp;
        else if (!bits[j] && targets[i][j]) ++counts.fn;
      }
    }
    log.push_back({epoch, loss_sum / static_cast<double>(n), counts.f1()});
  }
  return log;
}

inline std::vector<std::vector<double>> text_cnn_predict(
    const TextCnnModel& model, const std::vector<std::vector<std::size_t>>& sequences) {
  std::vector<std::vector<double>> rows;
  rows.reserve(sequences.size());
  for (const auto& seq : sequences) {
    if (seq.size() != model.max_len)
      throw std::runtime_error("predict: sequence length " + std::to_string(seq.size()) +
                               " does not match training max_len " +
                               std::to_string(model.max_len));
    Tensor pred = text_cnn_forward(model, seq, false, nullptr);
    rows.push_back(std::move(pred.values));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Dense MLP (policy networks)
// ---------------------------------------------------------------------------

struct MlpModel {
  std::size_t input_dim = 0;
  std::vector<DenseLayer> layers;

  std::vector<Tensor*> param_tensors() {
    std::vector<Tensor*> out;
    for (auto& l : layers) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Tensor*> param_tensors() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }
};

inline MlpModel init_mlp(std::size_t input_dim, const std::vector<std::size_t>& sizes,
                         const std::vector<Activation>& activations, std::uint64_t seed) {
  if (sizes.empty() || sizes.size() != activations.size())
    throw std::runtime_error("init_mlp: sizes/activations mismatch");
  MlpModel model;
  model.input_dim = input_dim;
  RngStream stream(seed, "init");
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    model.layers.push_back(make_dense(in, sizes[i], activations[i], stream));
    in = sizes[i];
  }
  return model;
}

inline Tensor mlp_forward(const MlpModel& model, const Tensor& x,
                          std::vector<DenseCache>* caches = nullptr) {
  if (caches) caches->assign(model.layers.size(), DenseCache{});
  Tensor cur = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    cur = dense_forward(cur, model.layers[i], caches ? &(*caches)[i] : nullptr);
  return cur;
}

struct MlpGrads {
  std::vector<DenseLayer> layers;

  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
    return out;
  }
  void zero() {
    for (auto& l : layers) {
      l.weights.fill(0.0);
      l.bias.fill(0.0);
    }
  }
};

inline MlpGrads make_mlp_grads(const MlpModel& model) {
  MlpGrads g;
  for (const auto& l : model.layers)
    g.layers.push_back(
        DenseLayer{l.in, l.out, l.activation, Tensor(l.weights.shape), Tensor(l.bias.shape)});
  return g;
}

inline void mlp_backward(const MlpModel& model, const Tensor& x,
                         const std::vector<DenseCache>& caches, const Tensor& grad_out,
                         MlpGrads& grads) {
  Tensor grad = grad_out;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const Tensor& input = i == 0 ? x : caches[i - 1].a;
    grad = dense_backward(input, model.layers[i], caches[i], grad, grads.layers[i]);
  }
}

inline std::vector<EpochLog> train_mlp(MlpModel& model, const std::vector<std::vector<double>>& rows,
                                       const std::vector<MultiHotVector>& targets,
                                       const TrainConfig& config) {
  if (rows.empty()) throw std::runtime_error("train_mlp: empty training set");
  if (rows.size() != targets.size())
    throw std::runtime_error("train_mlp: row/target count mismatch");
  if (config.batch_size == 0) throw std::runtime_error("train_mlp: batch_size must be > 0");
  for (const auto& r : rows)
    if (r.size() != model.input_dim) throw std::runtime_error("train_mlp: row width mismatch");

  AdamState adam(AdamConfig{config.lr, config.beta1, config.beta2, config.adam_epsilon});
  MlpGrads grads = make_mlp_grads(model);
  std::vector<Tensor*> params = model.param_tensors();
  std::vector<const Tensor*> grad_tensors = grads.tensors();

  const std::size_t n = rows.size();
  std::vector<EpochLog> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<std::size_t> order = detail::shuffled_order(n, config.seed, epoch);
    double loss_sum = 0.0;
    MicroCounts counts;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      grads.zero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        Tensor x({model.input_dim}, rows[idx]);
        std::vector<DenseCache> caches;
        Tensor pred = mlp_forward(model, x, &caches);
        batch_loss += multilabel_xent_loss(pred, targets[idx]);
        MultiHotVector bits = detail::threshold_row(pred);
        for (std::size_t j = 0; j < bits.size(); ++j) {
          if (bits[j] && targets[idx][j]) ++counts.tp;
          else if (bits[j] && !targets[idx][j]) ++counts.fp;
          else if (!bits[j] && targets[idx][j]) ++counts.fn;
        }
        Tensor grad_pred = multilabel_xent_grad(pred, targets[idx]);
        mlp_backward(model, x, caches, grad_pred, grads);
      }
      if (!std::isfinite(batch_loss)) detail::throw_diverged(epoch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (const Tensor* g : grad_tensors)
        for (double& v : const_cast<Tensor*>(g)->values) v *= inv;
      adam.step(params, grad_tensors);
      loss_sum += batch_loss;
    }
    for (const Tensor* p : params)
      if (!all_finite(*p)) detail::throw_diverged(epoch);
    log.push_back({epoch, loss_sum / static_cast<double>(n), counts.f1()});
  }
  return log;
}

inline std::vector<std::vector<double>> mlp_predict(const MlpModel& model,
                                                    const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != model.input_dim) throw std::runtime_error("mlp_predict: row width mismatch");
    Tensor pred = mlp_forward(model, Tensor({model.input_dim}, r));
    out.push_back(std::move(pred.values));
  }
  return out;
}

}  // namespace latefuse
