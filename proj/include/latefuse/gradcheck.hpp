#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "latefuse/nn_engine.hpp"
#include "latefuse/rng.hpp"
#include "latefuse/tensor.hpp"

namespace latefuse {

struct GradCheckOptions {
  std::uint64_t seed = 42;
  std::size_t configs = 20;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::string corrupt_kind;  // inject a deliberate analytic error into this kind
};

struct GradCheckResult {
  std::string kind;
  std::size_t configs = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

inline const std::vector<std::string>& gradcheck_kinds() {
  static const std::vector<std::string> kinds = {
      "embedding",     "conv1d",     "global_max_pool", "dense_relu",
      "dense_sigmoid", "dense_tanh", "multilabel_xent"};
  return kinds;
}

namespace detail {

// Central differences over every component of every listed block.
inline std::vector<double> finite_difference(const std::vector<Tensor*>& blocks,
                                             const std::function<double()>& objective,
                                             double eps) {
  std::vector<double> fd;
  for (Tensor* block : blocks) {
    for (std::size_t i = 0; i < block->size(); ++i) {
      const double orig = (*block)[i];
      (*block)[i] = orig + eps;
      const double hi = objective();
      (*block)[i] = orig - eps;
      const double lo = objective();
      (*block)[i] = orig;
      fd.push_back((hi - lo) / (2.0 * eps));
    }
  }
  return fd;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

inline void append_tensor(std::vector<double>& flat, const Tensor& t) {
  flat.insert(flat.end(), t.values.begin(), t.values.end());
}

// One randomized configuration of one kind; fills analytic and fd with
// gradients flattened in matching order.
inline void gradcheck_config(const std::string& kind, std::uint64_t seed, std::size_t index,
                             double eps, std::vector<double>& analytic, std::vector<double>& fd) {
  RngStream rng(seed, "gradcheck:" + kind, index);
  analytic.clear();
  fd.clear();

  if (kind == "embedding") {
    const std::size_t vocab = 3 + rng.below(6);
    const std::size_t dim = 2 + rng.below(4);
    const std::size_t len = 2 + rng.below(5);
    EmbeddingTable table;
    table.dim = dim;
    table.matrix = random_tensor({vocab, dim}, rng);
    table.covered.assign(vocab, 0);
    std::vector<std::size_t> indices(len);
    for (auto& i : indices) i = rng.below(vocab);
    const Tensor coeff = random_tensor({len, dim}, rng);
    Tensor grad_table({vocab, dim});
    embedding_backward(indices, coeff, grad_table);
    append_tensor(analytic, grad_table);
    auto objective = [&]() {
      const Tensor out = embedding_forward(indices, table);
      double j = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) j += coeff[i] * out[i];
      return j;
    };
    fd = finite_difference({&table.matrix}, objective, eps);
    return;
  }

  if (kind == "conv1d") {
    const std::size_t k = 2 + rng.below(3);
    const std::size_t dim = 2 + rng.below(3);
    const std::size_t filters = 2 + rng.below(4);
    const std::size_t len = k + rng.below(4);
    Tensor x = random_tensor({len, dim}, rng);
    Conv1dLayer conv{k, dim, filters, random_tensor({k, dim, filters}, rng),
                     random_tensor({filters}, rng)};
    const Tensor coeff = random_tensor({len - k + 1, filters}, rng);
    Conv1dLayer grad_conv{k, dim, filters, Tensor({k, dim, filters}), Tensor({filters})};
    const Tensor grad_x = conv1d_backward(x, conv, coeff, grad_conv);
    append_tensor(analytic, grad_x);
    append_tensor(analytic, grad_conv.weights);
    append_tensor(analytic, grad_conv.bias);
    auto objective = [&]() {
      const Tensor out = conv1d_forward(x, conv);
      double j = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) j += coeff[i] * out[i];
      return j;
    };
    fd = finite_difference({&x, &conv.weights, &conv.bias}, objective, eps);
    return;
  }

  if (kind == "global_max_pool") {
    const std::size_t steps = 2 + rng.below(5);
    const std::size_t filters = 2 + rng.below(4);
    Tensor x = random_tensor({steps, filters}, rng);
    // Keep a clear winner per filter so the finite-difference probe cannot
    // flip the argmax.
    const double margin = 1e-3;
    for (std::size_t f = 0; f < filters; ++f) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < steps; ++t)
        if (x.at2(t, f) > x.at2(best, f)) best = t;
      double runner_up = -1e300;
      for (std::size_t t = 0; t < steps; ++t)
        if (t != best && x.at2(t, f) > runner_up) runner_up = x.at2(t, f);
      if (x.at2(best, f) - runner_up < margin) x.at2(best, f) = runner_up + 2.0 * margin;
    }
    const Tensor coeff = random_tensor({filters}, rng);
    MaxPoolCache cache;
    global_max_pool(x, &cache);
    const Tensor grad_x = global_max_pool_backward(x, cache, coeff);
    append_tensor(analytic, grad_x);
    auto objective = [&]() {
      const Tensor out = global_max_pool(x);
      double j = 0.0;
      for (std::size_t f = 0; f < out.size(); ++f) j += coeff[f] * out[f];
      return j;
    };
    fd = finite_difference({&x}, objective, eps);
    return;
  }

  if (kind == "dense_relu" || kind == "dense_sigmoid" || kind == "dense_tanh") {
    const Activation act = kind == "dense_relu"    ? Activation::relu
                           : kind == "dense_sigmoid" ? Activation::sigmoid
                                                     : Activation::tanh;
    const std::size_t in = 2 + rng.below(5);
    const std::size_t out_dim = 2 + rng.below(5);
    Tensor x = random_tensor({in}, rng);
    DenseLayer layer{in, out_dim, act, random_tensor({in, out_dim}, rng),
                     random_tensor({out_dim}, rng)};
    if (act == Activation::relu) {
      // Push every pre-activation away from the kink via the bias.
      const double margin = 1e-3;
      DenseCache cache;
      dense_forward(x, layer, &cache);
      for (std::size_t j = 0; j < out_dim; ++j) {
        const double z = cache.z[j];
        if (std::fabs(z) < margin)
          layer.bias[j] += (z >= 0.0 ? 2.0 * margin - z : -2.0 * margin - z);
      }
    }
    const Tensor coeff = random_tensor({out_dim}, rng);
    DenseCache cache;
    dense_forward(x, layer, &cache);
    DenseLayer grad_layer{in, out_dim, act, Tensor({in, out_dim}), Tensor({out_dim})};
    const Tensor grad_x = dense_backward(x, layer, cache, coeff, grad_layer);
    append_tensor(analytic, grad_x);
    append_tensor(analytic, grad_layer.weights);
    append_tensor(analytic, grad_layer.bias);
    auto objective = [&]() {
      const Tensor out = dense_forward(x, layer);
      double j = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) j += coeff[i] * out[i];
      return j;
    };
    fd = finite_difference({&x, &layer.weights, &layer.bias}, objective, eps);
    return;
  }

  if (kind == "multilabel_xent") {
    const std::size_t labels = 2 + rng.below(7);
    Tensor pred = random_tensor({labels}, rng, 0.05, 0.95);
    MultiHotVector target(labels);
    for (auto& t : target) t = rng.below(2) ? 1 : 0;
    const Tensor grad = multilabel_xent_grad(pred, target);
    append_tensor(analytic, grad);
    auto objective = [&]() { return multilabel_xent_loss(pred, target); };
    fd = finite_difference({&pred}, objective, eps);
    return;
  }

  throw std::runtime_error("unknown gradient check kind: " + kind);
}

}  // namespace detail

inline GradCheckResult run_gradient_check(const std::string& kind,
                                          const GradCheckOptions& options = {}) {
  GradCheckResult result;
  result.kind = kind;
  result.configs = options.configs;
  std::vector<double> analytic, fd;
  for (std::size_t i = 0; i < options.configs; ++i) {
    detail::gradcheck_config(kind, options.seed, i, options.epsilon, analytic, fd);
    if (analytic.size() != fd.size())
      throw std::runtime_error("gradient check: flattened gradient size mismatch");
    if (options.corrupt_kind == kind && !analytic.empty()) analytic[0] += 1e-2;
    double max_diff = 0.0, amax = 0.0, fmax = 0.0;
    for (std::size_t j = 0; j < analytic.size(); ++j) {
      max_diff = std::max(max_diff, std::fabs(analytic[j] - fd[j]));
      amax = std::max(amax, std::fabs(analytic[j]));
      fmax = std::max(fmax, std::fabs(fd[j]));
    }
    const double rel = max_diff / std::max({amax, fmax, 1e-12});
    result.max_rel_error = std::max(result.max_rel_error, rel);
  }
  result.pass = result.max_rel_error < options.tolerance;
  return result;
}

inline std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& options = {}) {
  std::vector<GradCheckResult> results;
  for (const auto& kind : gradcheck_kinds()) results.push_back(run_gradient_check(kind, options));
  return results;
}

}  // namespace latefuse
