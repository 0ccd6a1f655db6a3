// Sensing-reconstruction network: a bias-free linear ternary sensing layer,
// a fixed (not gradient-trained) per-measurement scaling layer, L fully
// connected hidden layers with batch normalization and ReLU, and a linear
// output layer back to the patch dimension.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "tcs/numerics.hpp"

namespace tcs {

/// Architecture hyperparameters. n, m, K are derived from the patch side,
/// the sensing rate R, and the sparsity ratio gamma.
struct NetworkConfig {
  std::uint32_t patch_side = 32;
  double sensing_rate = 0.25;
  double sparsity_ratio = 0.05;
  std::uint32_t hidden_layers = 2;
  std::uint32_t hidden_units = 2048;

  std::uint32_t n() const { return patch_side * patch_side; }
  std::uint32_t m() const { return static_cast<std::uint32_t>(std::lround(n() * sensing_rate)); }
  std::uint32_t k() const {
    const long v = std::lround(n() * sparsity_ratio);
    return static_cast<std::uint32_t>(v < 1 ? 1 : v);  // at least one nonzero per column
  }

  void validate() const {
    if (patch_side == 0) throw std::invalid_argument("NetworkConfig: patch_side must be positive");
    if (!(sensing_rate > 0.0 && sensing_rate < 1.0))
      throw std::invalid_argument("NetworkConfig: sensing rate must lie in (0,1)");
    if (!(sparsity_ratio > 0.0 && sparsity_ratio <= 1.0))
      throw std::invalid_argument("NetworkConfig: sparsity ratio must lie in (0,1]");
    if (m() < 1 || m() >= n()) throw std::invalid_argument("NetworkConfig: need 1 <= m < n");
    if (k() > n()) throw std::invalid_argument("NetworkConfig: need K <= n");
    if (hidden_layers == 0 || hidden_units == 0)
      throw std::invalid_argument("NetworkConfig: hidden layers/units must be positive");
  }
};

/// "1-1" connected scaling weights; refreshed from the projection, never
/// gradient-trained.
struct ScalingLayer {
  std::vector<double> alpha;
};

struct DenseLayer {
  DenseMatrix weights;  // fan_in x fan_out
  std::vector<double> bias;
};

struct BatchNormLayer {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

struct HiddenBlock {
  DenseLayer fc;
  BatchNormLayer bn;
};

struct ReconstructionNet {
  ScalingLayer scaling;
  std::vector<HiddenBlock> hidden;
  DenseLayer output;  // linear, no batch norm
};

/// Symmetric uniform init with bound 1/sqrt(fan_in), row-major draw order.
inline DenseMatrix init_dense_weights(std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  DenseMatrix w(fan_in, fan_out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.values()) v = rng.uniform_real(-bound, bound);
  return w;
}

/// Continuous sensing weights Theta, n x m, same fan-based init (fan = n).
inline DenseMatrix init_theta(const NetworkConfig& cfg, SeededRng& rng) {
  return init_dense_weights(cfg.n(), cfg.m(), rng);
}

inline ReconstructionNet make_network(const NetworkConfig& cfg, SeededRng& rng) {
  cfg.validate();
  ReconstructionNet net;
  net.scaling.alpha.assign(cfg.m(), 1.0);
  std::size_t fan_in = cfg.m();
  for (std::uint32_t l = 0; l < cfg.hidden_layers; ++l) {
    HiddenBlock block;
    block.fc.weights = init_dense_weights(fan_in, cfg.hidden_units, rng);
    block.fc.bias.assign(cfg.hidden_units, 0.0);
    block.bn.gamma.assign(cfg.hidden_units, 1.0);
    block.bn.beta.assign(cfg.hidden_units, 0.0);
    block.bn.running_mean.assign(cfg.hidden_units, 0.0);
    block.bn.running_var.assign(cfg.hidden_units, 1.0);
    net.hidden.push_back(std::move(block));
    fan_in = cfg.hidden_units;
  }
  net.output.weights = init_dense_weights(fan_in, cfg.n(), rng);
  net.output.bias.assign(cfg.n(), 0.0);
  return net;
}

/// y = Theta_sb^T x: the linear measurement, no bias, no activation.
inline std::vector<double> sense(const SparseTernaryMatrix& theta_sb, std::span<const double> x) {
  return ternary_matvec(theta_sb, x);
}

/// Elementwise alpha_j * y_j.
inline std::vector<double> scale(std::span<const double> alpha, std::span<const double> y) {
  if (alpha.size() != y.size()) throw std::invalid_argument("scale: dimension mismatch");
  std::vector<double> out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = alpha[j] * y[j];
  return out;
}

/// Batched sensing: row b of the result is sense(theta_sb, batch row b).
inline DenseMatrix sense_batch(const SparseTernaryMatrix& theta_sb, const DenseMatrix& batch) {
  if (batch.cols() != theta_sb.n) throw std::invalid_argument("sense_batch: dimension mismatch");
  DenseMatrix y(batch.rows(), theta_sb.m, 0.0);
  const std::int64_t rows = static_cast<std::int64_t>(batch.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < rows; ++b) {
    const double* x = batch.row_ptr(static_cast<std::size_t>(b));
    double* out = y.row_ptr(static_cast<std::size_t>(b));
    for (std::uint32_t j = 0; j < theta_sb.m; ++j) {
      double acc = 0.0;
      for (const TernaryEntry& e : theta_sb.column(j)) {
        if (e.sign > 0)
          acc += x[e.row];
        else
          acc -= x[e.row];
      }
      out[j] = acc;
    }
  }
  return y;
}

/// Everything backward needs: per-layer pre-norm activations, normalized
/// values, post-ReLU outputs, and the batch statistics used.
struct ForwardCache {
  DenseMatrix sensed;  // B x m
  DenseMatrix scaled;  // B x m
  struct LayerCache {
    DenseMatrix pre_bn;      // B x H
    DenseMatrix normalized;  // x-hat
    DenseMatrix post;        // after affine + ReLU
    std::vector<double> mean;
    std::vector<double> var;
  };
  std::vector<LayerCache> layers;
  DenseMatrix output;  // B x n
};

namespace detail {

/// Z = act * W + bias; bias seeds the accumulator, then ascending-k updates.
inline DenseMatrix fc_forward(const DenseMatrix& act, const DenseLayer& layer) {
  if (act.cols() != layer.weights.rows()) throw std::invalid_argument("fc_forward: dimension mismatch");
  DenseMatrix z(act.rows(), layer.weights.cols());
  const std::int64_t rows = static_cast<std::int64_t>(act.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < rows; ++b) {
    double* zrow = z.row_ptr(static_cast<std::size_t>(b));
    for (std::size_t j = 0; j < layer.weights.cols(); ++j) zrow[j] = layer.bias[j];
    const double* arow = act.row_ptr(static_cast<std::size_t>(b));
    for (std::size_t k = 0; k < layer.weights.rows(); ++k) {
      const double av = arow[k];
      const double* wrow = layer.weights.row_ptr(k);
      for (std::size_t j = 0; j < layer.weights.cols(); ++j) zrow[j] += av * wrow[j];
    }
  }
  return z;
}

}  // namespace detail

/// Training-mode forward pass: batch-norm uses the batch statistics (biased
/// variance) and running statistics are updated with the layer momentum.
/// Requires B >= 2 so the statistics are defined.
inline DenseMatrix forward_train_from_sensed(ReconstructionNet& net, const DenseMatrix& sensed,
                                             ForwardCache& cache) {
  const std::size_t batch = sensed.rows();
  if (batch < 2) throw std::invalid_argument("forward_train: batch size must be at least 2");
  if (sensed.cols() != net.scaling.alpha.size())
    throw std::invalid_argument("forward_train: sensed width != scaling width");

  cache.sensed = sensed;
  cache.scaled = sensed;
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = cache.scaled.row_ptr(b);
    for (std::size_t j = 0; j < net.scaling.alpha.size(); ++j) row[j] *= net.scaling.alpha[j];
  }

  cache.layers.clear();
  cache.layers.resize(net.hidden.size());
  const DenseMatrix* act = &cache.scaled;
  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    HiddenBlock& block = net.hidden[l];
    ForwardCache::LayerCache& lc = cache.layers[l];
    lc.pre_bn = detail::fc_forward(*act, block.fc);
    const std::size_t units = block.fc.weights.cols();
    lc.mean.assign(units, 0.0);
    lc.var.assign(units, 0.0);
    lc.normalized = DenseMatrix(batch, units);
    lc.post = DenseMatrix(batch, units);
    const std::int64_t units64 = static_cast<std::int64_t>(units);
#pragma omp parallel for schedule(static)
    for (std::int64_t h64 = 0; h64 < units64; ++h64) {
      const std::size_t h = static_cast<std::size_t>(h64);
      double sum = 0.0;
      for (std::size_t b = 0; b < batch; ++b) sum += lc.pre_bn(b, h);
      const double mean = sum / static_cast<double>(batch);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double d = lc.pre_bn(b, h) - mean;
        sq += d * d;
      }
      const double var = sq / static_cast<double>(batch);
      lc.mean[h] = mean;
      lc.var[h] = var;
      const double inv_sd = 1.0 / std::sqrt(var + block.bn.epsilon);
      for (std::size_t b = 0; b < batch; ++b) {
        const double xhat = (lc.pre_bn(b, h) - mean) * inv_sd;
        lc.normalized(b, h) = xhat;
        const double y = block.bn.gamma[h] * xhat + block.bn.beta[h];
        lc.post(b, h) = y > 0.0 ? y : 0.0;
      }
      block.bn.running_mean[h] = block.bn.momentum * block.bn.running_mean[h] + (1.0 - block.bn.momentum) * mean;
      block.bn.running_var[h] = block.bn.momentum * block.bn.running_var[h] + (1.0 - block.bn.momentum) * var;
    }
    act = &lc.post;
  }
  cache.output = detail::fc_forward(*act, net.output);
  return cache.output;
}

inline DenseMatrix forward_train(ReconstructionNet& net, const SparseTernaryMatrix& theta_sb,
                                 const DenseMatrix& batch, ForwardCache& cache) {
  return forward_train_from_sensed(net, sense_batch(theta_sb, batch), cache);
}

/// Inference from a measurement vector: scaling, then hidden layers with
/// running batch-norm statistics, then the linear output. Pure function of
/// (parameters, y).
inline std::vector<double> infer_from_measurements(const ReconstructionNet& net, std::span<const double> y) {
  std::vector<double> act = scale(net.scaling.alpha, y);
  for (const HiddenBlock& block : net.hidden) {
    const std::size_t units = block.fc.weights.cols();
    std::vector<double> z = block.fc.bias;
    for (std::size_t k = 0; k < block.fc.weights.rows(); ++k) {
      const double av = act[k];
      const double* wrow = block.fc.weights.row_ptr(k);
      for (std::size_t j = 0; j < units; ++j) z[j] += av * wrow[j];
    }
    for (std::size_t h = 0; h < units; ++h) {
      const double xhat = (z[h] - block.bn.running_mean[h]) / std::sqrt(block.bn.running_var[h] + block.bn.epsilon);
      const double v = block.bn.gamma[h] * xhat + block.bn.beta[h];
      z[h] = v > 0.0 ? v : 0.0;
    }
    act = std::move(z);
  }
  std::vector<double> out = net.output.bias;
  for (std::size_t k = 0; k < net.output.weights.rows(); ++k) {
    const double av = act[k];
    const double* wrow = net.output.weights.row_ptr(k);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += av * wrow[j];
  }
  return out;
}

inline std::vector<double> forward_infer(const ReconstructionNet& net, const SparseTernaryMatrix& theta_sb,
                                         std::span<const double> x) {
  return infer_from_measurements(net, sense(theta_sb, x));
}

}  // namespace tcs
