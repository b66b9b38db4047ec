#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "latefuse/label_space.hpp"
#include "latefuse/nn_engine.hpp"
#include "latefuse/prediction_matrix.hpp"
#include "latefuse/tensor.hpp"

namespace latefuse {

// ---------------------------------------------------------------------------
// Alignment: fusion consumes ids present in every modality. Order follows
// the first matrix; everything else is reported as dropped.
// ---------------------------------------------------------------------------

struct AlignmentResult {
  std::vector<std::string> modalities;
  std::uint64_t labels_hash = 0;
  std::size_t label_count = 0;
  std::vector<std::string> ids;                        // common ids, first-matrix order
  std::vector<std::vector<std::vector<double>>> rows;  // [modality][n][label]
  std::vector<std::string> dropped_ids;                // sorted union of non-common ids
};

inline AlignmentResult align_matrices(const std::vector<PredictionMatrix>& matrices) {
  if (matrices.empty()) throw std::runtime_error("align: no prediction matrices given");
  AlignmentResult result;
  result.labels_hash = matrices[0].labels_hash;
  result.label_count = matrices[0].label_count;
  std::set<std::string> names;
  for (const auto& m : matrices) {
    if (m.labels_hash != result.labels_hash)
      throw std::runtime_error("align: label hash mismatch between modalities " +
                               matrices[0].modality + " and " + m.modality);
    if (m.label_count != result.label_count)
      throw std::runtime_error("align: label count mismatch between modalities");
    if (!names.insert(m.modality).second)
      throw std::runtime_error("align: duplicate modality name: " + m.modality);
    result.modalities.push_back(m.modality);
  }

  std::vector<std::unordered_map<std::string, std::size_t>> index(matrices.size());
  for (std::size_t k = 0; k < matrices.size(); ++k)
    for (std::size_t i = 0; i < matrices[k].ids.size(); ++i)
      index[k].emplace(matrices[k].ids[i], i);

  std::set<std::string> dropped;
  for (const auto& id : matrices[0].ids) {
    bool everywhere = true;
    for (std::size_t k = 1; k < matrices.size() && everywhere; ++k)
      everywhere = index[k].count(id) > 0;
    if (everywhere)
      result.ids.push_back(id);
    else
      dropped.insert(id);
  }
  for (std::size_t k = 1; k < matrices.size(); ++k)
    for (const auto& id : matrices[k].ids) {
      bool everywhere = true;
      for (std::size_t j = 0; j < matrices.size() && everywhere; ++j)
        everywhere = index[j].count(id) > 0;
      if (!everywhere) dropped.insert(id);
    }

  if (result.ids.empty()) throw std::runtime_error("align: no ids common to all modalities");
  result.dropped_ids.assign(dropped.begin(), dropped.end());

  result.rows.resize(matrices.size());
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    result.rows[k].reserve(result.ids.size());
    for (const auto& id : result.ids) result.rows[k].push_back(matrices[k].rows[index[k].at(id)]);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Static policies
// ---------------------------------------------------------------------------

namespace detail {

inline void check_stacks(const std::vector<std::vector<std::vector<double>>>& stacks) {
  if (stacks.empty()) throw std::runtime_error("fuse: no modalities");
  const std::size_t n = stacks[0].size();
  for (const auto& s : stacks)
    if (s.size() != n) throw std::runtime_error("fuse: modality row counts differ");
  if (n == 0) throw std::runtime_error("fuse: no rows");
  const std::size_t width = stacks[0][0].size();
  for (const auto& s : stacks)
    for (const auto& row : s)
      if (row.size() != width) throw std::runtime_error("fuse: row widths differ");
}

}  // namespace detail

inline std::vector<std::vector<double>> fuse_max(
    const std::vector<std::vector<std::vector<double>>>& stacks) {
  detail::check_stacks(stacks);
  const std::size_t n = stacks[0].size(), width = stacks[0][0].size();
  std::vector<std::vector<double>> out(n, std::vector<double>(width));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      double best = stacks[0][i][j];
      for (std::size_t k = 1; k < stacks.size(); ++k) best = std::max(best, stacks[k][i][j]);
      out[i][j] = best;
    }
  return out;
}

// Each entry's addends are summed in ascending value order, making the
// result bit-identical under any permutation of the input modalities. The
// all-equal shortcut keeps the mean exactly idempotent (fl(3x)/3 != x for
// many doubles, e.g. x = 0.1).
inline std::vector<std::vector<double>> fuse_mean(
    const std::vector<std::vector<std::vector<double>>>& stacks) {
  detail::check_stacks(stacks);
  const std::size_t n = stacks[0].size(), width = stacks[0][0].size();
  const double inv = 1.0 / static_cast<double>(stacks.size());
  std::vector<double> vals(stacks.size());
  std::vector<std::vector<double>> out(n, std::vector<double>(width));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t k = 0; k < stacks.size(); ++k) vals[k] = stacks[k][i][j];
      std::sort(vals.begin(), vals.end());
      if (vals.front() == vals.back()) {
        out[i][j] = vals.front();
        continue;
      }
      double sum = 0.0;
      for (double v : vals) sum += v;
      out[i][j] = sum * inv;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Feature building shared by the trained fusers
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> concat_features(
    const std::vector<std::vector<std::vector<double>>>& stacks) {
  detail::check_stacks(stacks);
  const std::size_t n = stacks[0].size(), width = stacks[0][0].size();
  std::vector<std::vector<double>> features(n);
  for (std::size_t i = 0; i < n; ++i) {
    features[i].reserve(stacks.size() * width);
    for (const auto& s : stacks) features[i].insert(features[i].end(), s[i].begin(), s[i].end());
  }
  return features;
}

// ---------------------------------------------------------------------------
// Ridge regression fuser: per output class, minimize
// ||X w - y||^2 + alpha ||w||^2 over the concatenated modality scores.
// The optional intercept column is not regularized.
// ---------------------------------------------------------------------------

struct RidgeOptions {
  double alpha = 1.0;
  bool intercept = false;
};

struct RidgeModel {
  std::uint64_t labels_hash = 0;
  std::vector<std::string> modalities;
  std::size_t label_count = 0;
  RidgeOptions options;
  Tensor weights;  // [feature_dim (+1 with intercept), label_count]

  std::size_t feature_dim() const { return weights.dim(0); }
};

namespace detail {

// In-place Cholesky solve for SPD systems: A [n x n] row-major, B [n x m].
// On return B holds the solution.
inline void cholesky_solve(std::vector<double>& a, std::size_t n, std::vector<double>& b,
                           std::size_t m) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0) || !std::isfinite(diag))
      throw std::runtime_error("ridge: normal equations are not positive definite; "
                               "increase alpha");
    const double root = std::sqrt(diag);
    a[j * n + j] = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / root;
    }
  }
  // Forward substitution: L z = b, then back substitution: L^T x = z.
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = b[i * m + c];
      for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k * m + c];
      b[i * m + c] = v / a[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
      double v = b[i * m + c];
      for (std::size_t k = i + 1; k < n; ++k) v -= a[k * n + i] * b[k * m + c];
      b[i * m + c] = v / a[i * n + i];
    }
  }
}

}  // namespace detail

inline RidgeModel train_ridge(const std::vector<std::vector<std::vector<double>>>& stacks,
                              const std::vector<MultiHotVector>& targets,
                              const RidgeOptions& options = {}) {
  const std::vector<std::vector<double>> features = concat_features(stacks);
  const std::size_t n = features.size();
  if (targets.size() != n) throw std::runtime_error("train_ridge: target count mismatch");
  const std::size_t labels = stacks[0][0].size();
  for (const auto& t : targets)
    if (t.size() != labels) throw std::runtime_error("train_ridge: target width mismatch");
  if (options.alpha < 0.0) throw std::runtime_error("train_ridge: alpha must be >= 0");

  const std::size_t base_dim = features[0].size();
  const std::size_t dim = base_dim + (options.intercept ? 1 : 0);

  // Normal equations: (X^T X + alpha I) W = X^T Y.
  std::vector<double> gram(dim * dim, 0.0);
  std::vector<double> rhs(dim * labels, 0.0);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(features[i].begin(), features[i].end(), x.begin());
    if (options.intercept) x[base_dim] = 1.0;
    for (std::size_t p = 0; p < dim; ++p) {
      for (std::size_t q = p; q < dim; ++q) gram[p * dim + q] += x[p] * x[q];
      for (std::size_t c = 0; c < labels; ++c)
        if (targets[i][c]) rhs[p * labels + c] += x[p];
    }
  }
  for (std::size_t p = 0; p < dim; ++p)
    for (std::size_t q = 0; q < p; ++q) gram[p * dim + q] = gram[q * dim + p];
  for (std::size_t p = 0; p < base_dim; ++p) gram[p * dim + p] += options.alpha;

  detail::cholesky_solve(gram, dim, rhs, labels);

  RidgeModel model;
  model.label_count = labels;
  model.options = options;
  model.weights = Tensor({dim, labels}, std::move(rhs));
  return model;
}

// Scores are clamped to [0,1] at application time only; the stored weights
// stay untouched.
inline std::vector<std::vector<double>> apply_ridge(
    const RidgeModel& model, const std::vector<std::vector<std::vector<double>>>& stacks) {
  const std::vector<std::vector<double>> features = concat_features(stacks);
  const std::size_t base_dim = model.options.intercept ? model.feature_dim() - 1
                                                       : model.feature_dim();
  if (!features.empty() && features[0].size() != base_dim)
    throw std::runtime_error("apply_ridge: feature width does not match the trained model");
  std::vector<std::vector<double>> out(features.size(),
                                       std::vector<double>(model.label_count, 0.0));
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t c = 0; c < model.label_count; ++c) {
      double v = model.options.intercept ? model.weights.at2(base_dim, c) : 0.0;
      for (std::size_t p = 0; p < base_dim; ++p) v += features[i][p] * model.weights.at2(p, c);
      out[i][c] = std::min(1.0, std::max(0.0, v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policy networks: small dense nets over the concatenated scores.
// Two modalities: sigmoid everywhere. Three: sigmoid, tanh, sigmoid.
// ---------------------------------------------------------------------------

inline std::vector<LayerSpec> bimodal_policy_spec(std::size_t label_count) {
  std::vector<LayerSpec> specs(3);
  specs[0] = {LayerSpec::Kind::dense, 0, 0, 200, Activation::sigmoid, 0.0};
  specs[1] = {LayerSpec::Kind::dense, 0, 0, 150, Activation::sigmoid, 0.0};
  specs[2] = {LayerSpec::Kind::dense, 0, 0, label_count, Activation::sigmoid, 0.0};
  return specs;
}

inline std::vector<LayerSpec> trimodal_policy_spec(std::size_t label_count) {
  std::vector<LayerSpec> specs(3);
  specs[0] = {LayerSpec::Kind::dense, 0, 0, 200, Activation::sigmoid, 0.0};
  specs[1] = {LayerSpec::Kind::dense, 0, 0, 150, Activation::tanh, 0.0};
  specs[2] = {LayerSpec::Kind::dense, 0, 0, label_count, Activation::sigmoid, 0.0};
  return specs;
}

inline MlpModel mlp_from_specs(std::size_t input_dim, const std::vector<LayerSpec>& specs,
                               std::uint64_t seed) {
  std::vector<std::size_t> sizes;
  std::vector<Activation> acts;
  for (const auto& s : specs) {
    if (s.kind != LayerSpec::Kind::dense)
      throw std::runtime_error("policy network: all layers must be dense");
    if (s.units == 0) throw std::runtime_error("policy network: layer width must be > 0");
    sizes.push_back(s.units);
    acts.push_back(s.activation);
  }
  return init_mlp(input_dim, sizes, acts, seed);
}

struct PolicyNetworkModel {
  std::uint64_t labels_hash = 0;
  std::vector<std::string> modalities;
  std::size_t label_count = 0;
  std::uint64_t seed = 0;
  MlpModel mlp;
};

inline std::vector<LayerSpec> policy_spec_for(std::size_t modality_count,
                                              std::size_t label_count) {
  if (modality_count == 2) return bimodal_policy_spec(label_count);
  if (modality_count == 3) return trimodal_policy_spec(label_count);
  throw std::runtime_error("policy network supports exactly 2 or 3 modalities, got " +
                           std::to_string(modality_count));
}

inline PolicyNetworkModel train_policy_network(
    const std::vector<std::vector<std::vector<double>>>& stacks,
    const std::vector<MultiHotVector>& targets, const TrainConfig& config) {
  detail::check_stacks(stacks);
  const std::size_t labels = stacks[0][0].size();
  PolicyNetworkModel model;
  model.label_count = labels;
  model.seed = config.seed;
  model.mlp = mlp_from_specs(stacks.size() * labels, policy_spec_for(stacks.size(), labels),
                             config.seed);
  train_mlp(model.mlp, concat_features(stacks), targets, config);
  return model;
}

inline std::vector<std::vector<double>> apply_policy_network(
    const PolicyNetworkModel& model, const std::vector<std::vector<std::vector<double>>>& stacks) {
  return mlp_predict(model.mlp, concat_features(stacks));
}

}  // namespace latefuse
