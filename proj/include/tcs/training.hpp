// End-to-end training: per-sample-mean squared-error loss, exact reverse-mode
// gradients (batch-norm statistics path included), Adam updates with an L2
// penalty on the reconstruction dense weights, a stepped learning-rate decay,
// and the epoch loop with seeded shuffling.
//
// The sensing weights follow the straight-through contract: the ternary
// Theta_sb is used in the forward and backward passes, and the gradient taken
// with respect to it is applied, unclipped, to the continuous Theta.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tcs/network.hpp"
#include "tcs/numerics.hpp"
#include "tcs/projection.hpp"

namespace tcs {

struct TrainConfig {
  std::uint32_t epochs = 50;
  std::uint32_t batch_size = 5000;
  double base_lr = 0.01;
  double lr_decay_factor = 0.6;
  std::uint32_t lr_decay_every = 5;
  double weight_decay = 0.001;  // L2 weight on reconstruction dense weights
  std::uint64_t seed = 1;

  void validate() const {
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be at least 2");
    if (!(base_lr > 0.0)) throw std::invalid_argument("TrainConfig: base_lr must be positive");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0))
      throw std::invalid_argument("TrainConfig: lr_decay_factor must lie in (0,1]");
    if (lr_decay_every == 0) throw std::invalid_argument("TrainConfig: lr_decay_every must be positive");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be nonnegative");
  }
};

/// Per-tensor Adam accumulator.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

/// L = (1/B) sum_b ||x_b - xhat_b||^2  (mean over samples, not over pixels).
inline double mse_loss(const DenseMatrix& x, const DenseMatrix& xhat) {
  if (!x.same_shape(xhat)) throw std::invalid_argument("mse_loss: shape mismatch");
  if (x.rows() == 0) throw std::invalid_argument("mse_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.values()[i] - xhat.values()[i];
    total += d * d;
  }
  return total / static_cast<double>(x.rows());
}

struct NetGradients {
  DenseMatrix d_theta_sb;  // n x m, dense: off-support entries included
  struct LayerGrads {
    DenseMatrix d_weights;
    std::vector<double> d_bias;
    std::vector<double> d_gamma;
    std::vector<double> d_beta;
  };
  std::vector<LayerGrads> hidden;
  DenseMatrix d_out_weights;
  std::vector<double> d_out_bias;
};

namespace detail {

inline std::vector<double> column_sums(const DenseMatrix& a) {
  std::vector<double> s(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* row = a.row_ptr(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += row[j];
  }
  return s;
}

/// Reverse-mode batch normalization through the batch statistics. Follows the
/// forward graph exactly (mean and dvar->dmean coupling kept, not simplified
/// with sum(z - mean) = 0).
inline DenseMatrix batchnorm_backward(const ForwardCache::LayerCache& lc, const BatchNormLayer& bn,
                                      const DenseMatrix& d_out, std::vector<double>& d_gamma,
                                      std::vector<double>& d_beta) {
  const std::size_t batch = d_out.rows();
  const std::size_t units = d_out.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  DenseMatrix dz(batch, units);
  d_gamma.assign(units, 0.0);
  d_beta.assign(units, 0.0);
  const std::int64_t units64 = static_cast<std::int64_t>(units);
#pragma omp parallel for schedule(static)
  for (std::int64_t h64 = 0; h64 < units64; ++h64) {
    const std::size_t h = static_cast<std::size_t>(h64);
    const double sd = std::sqrt(lc.var[h] + bn.epsilon);
    double dg = 0.0, db = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      dg += d_out(b, h) * lc.normalized(b, h);
      db += d_out(b, h);
    }
    d_gamma[h] = dg;
    d_beta[h] = db;

    double d_var = 0.0;
    double sum_dxhat = 0.0;
    double sum_centered = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double dxhat = d_out(b, h) * bn.gamma[h];
      const double centered = lc.pre_bn(b, h) - lc.mean[h];
      d_var += dxhat * centered;
      sum_dxhat += dxhat;
      sum_centered += centered;
    }
    d_var *= -0.5 / (sd * sd * sd);
    const double d_mean = -sum_dxhat / sd - d_var * 2.0 * inv_b * sum_centered;
    for (std::size_t b = 0; b < batch; ++b) {
      const double dxhat = d_out(b, h) * bn.gamma[h];
      const double centered = lc.pre_bn(b, h) - lc.mean[h];
      dz(b, h) = dxhat / sd + d_var * 2.0 * centered * inv_b + d_mean * inv_b;
    }
  }
  return dz;
}

}  // namespace detail

/// Exact gradients of mse_loss(x_batch, cache.output) with respect to every
/// trainable tensor and to Theta_sb treated as a continuous dense matrix.
/// alpha is a constant of the graph: no gradient is produced for it.
inline NetGradients backward(const ReconstructionNet& net, const ForwardCache& cache,
                             const DenseMatrix& x_batch) {
  if (!cache.output.same_shape(x_batch))
    throw std::invalid_argument("backward: stale cache (output/batch shape mismatch)");
  if (cache.layers.size() != net.hidden.size())
    throw std::invalid_argument("backward: stale cache (layer count mismatch)");
  if (cache.sensed.rows() != x_batch.rows())
    throw std::invalid_argument("backward: stale cache (batch size mismatch)");
  const std::size_t batch = x_batch.rows();

  NetGradients g;
  g.hidden.resize(net.hidden.size());

  // d mse / d output
  DenseMatrix d_act(batch, x_batch.cols());
  const double scale_b = 2.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < d_act.size(); ++i)
    d_act.values()[i] = scale_b * (cache.output.values()[i] - x_batch.values()[i]);

  const DenseMatrix& last_act = net.hidden.empty() ? cache.scaled : cache.layers.back().post;
  g.d_out_weights = matmul_transpose_a(last_act, d_act);
  g.d_out_bias = detail::column_sums(d_act);
  d_act = matmul_transpose_b(d_act, net.output.weights);

  for (std::size_t l = net.hidden.size(); l-- > 0;) {
    const ForwardCache::LayerCache& lc = cache.layers[l];
    const HiddenBlock& block = net.hidden[l];
    // ReLU kink: zero gradient where the affine batch-norm output was <= 0
    for (std::size_t b = 0; b < batch; ++b) {
      const double* post = lc.post.row_ptr(b);
      double* row = d_act.row_ptr(b);
      for (std::size_t h = 0; h < lc.post.cols(); ++h)
        if (!(post[h] > 0.0)) row[h] = 0.0;
    }
    DenseMatrix dz = detail::batchnorm_backward(lc, block.bn, d_act, g.hidden[l].d_gamma, g.hidden[l].d_beta);
    const DenseMatrix& prev_act = (l == 0) ? cache.scaled : cache.layers[l - 1].post;
    g.hidden[l].d_weights = matmul_transpose_a(prev_act, dz);
    g.hidden[l].d_bias = detail::column_sums(dz);
    d_act = matmul_transpose_b(dz, block.fc.weights);
  }

  // scaling layer: alpha constant, gradient passes through elementwise
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = d_act.row_ptr(b);
    for (std::size_t j = 0; j < net.scaling.alpha.size(); ++j) row[j] *= net.scaling.alpha[j];
  }
  // sensing layer: d L / d Theta_sb[i][j] = sum_b x[b][i] * d_sensed[b][j]
  g.d_theta_sb = matmul_transpose_a(x_batch, d_act);
  return g;
}

/// Bias-corrected Adam step: param <- param - lr * mhat / (sqrt(vhat) + eps).
inline void adam_update(std::span<double> param, std::span<const double> grad, AdamState& state, double lr) {
  if (param.size() != grad.size()) throw std::invalid_argument("adam_update: shape mismatch");
  if (state.m.size() != param.size()) throw std::invalid_argument("adam_update: state shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

/// Straight-through update: the continuous Theta absorbs the gradient taken
/// with respect to Theta_sb, on- and off-support alike, with no clipping and
/// no L2 term. Cached projections are left stale until the next refresh.
inline void straight_through_update(SensingWeights& sensing, const DenseMatrix& grad_theta_sb,
                                    AdamState& state, double lr) {
  if (!grad_theta_sb.same_shape(sensing.theta))
    throw std::invalid_argument("straight_through_update: gradient shape mismatch");
  adam_update(sensing.theta.values(), grad_theta_sb.values(), state, lr);
}

/// base_lr * factor^floor(epoch / decay_every).
inline double lr_at(std::uint32_t epoch, const TrainConfig& cfg) {
  return cfg.base_lr * std::pow(cfg.lr_decay_factor, static_cast<double>(epoch / cfg.lr_decay_every));
}

/// Full trainable state for Algorithm-1-style steps. alpha and Theta_sb carry
/// no Adam state: both are derived from Theta at refresh time.
struct TrainState {
  SensingWeights sensing;
  ReconstructionNet net;
  AdamState adam_theta;
  std::vector<AdamState> adam_fc_weights;
  std::vector<AdamState> adam_fc_bias;
  std::vector<AdamState> adam_bn_gamma;
  std::vector<AdamState> adam_bn_beta;
  AdamState adam_out_weights;
  AdamState adam_out_bias;
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  SeededRng rng{0};
};

inline TrainState make_train_state(SensingWeights sensing, ReconstructionNet net, const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.sensing = std::move(sensing);
  st.net = std::move(net);
  st.net.scaling.alpha = st.sensing.alpha;
  st.adam_theta = AdamState(st.sensing.theta.size());
  for (const HiddenBlock& block : st.net.hidden) {
    st.adam_fc_weights.emplace_back(block.fc.weights.size());
    st.adam_fc_bias.emplace_back(block.fc.bias.size());
    st.adam_bn_gamma.emplace_back(block.bn.gamma.size());
    st.adam_bn_beta.emplace_back(block.bn.beta.size());
  }
  st.adam_out_weights = AdamState(st.net.output.weights.size());
  st.adam_out_bias = AdamState(st.net.output.bias.size());
  st.lr = cfg.base_lr;
  st.rng = SeededRng(cfg.seed);
  return st;
}

/// One training step on a normalized batch: refresh the projection from the
/// current Theta, forward with batch statistics, backward, then Adam on the
/// reconstruction parameters (dense weights carrying the 2*lambda*W term) and
/// the straight-through Adam step on Theta. Returns the data loss (Eq.-style
/// mean squared error, penalty excluded).
inline double train_step(TrainState& st, const DenseMatrix& batch, double weight_decay) {
  refresh(st.sensing);
  st.net.scaling.alpha = st.sensing.alpha;

  ForwardCache cache;
  forward_train(st.net, st.sensing.theta_sb, batch, cache);
  const double loss = mse_loss(batch, cache.output);
  NetGradients g = backward(st.net, cache, batch);

  if (weight_decay != 0.0) {
    for (std::size_t l = 0; l < st.net.hidden.size(); ++l) {
      auto& dw = g.hidden[l].d_weights.values();
      const auto& w = st.net.hidden[l].fc.weights.values();
      for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += 2.0 * weight_decay * w[i];
    }
    auto& dw = g.d_out_weights.values();
    const auto& w = st.net.output.weights.values();
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += 2.0 * weight_decay * w[i];
  }

  for (std::size_t l = 0; l < st.net.hidden.size(); ++l) {
    HiddenBlock& block = st.net.hidden[l];
    adam_update(block.fc.weights.values(), g.hidden[l].d_weights.values(), st.adam_fc_weights[l], st.lr);
    adam_update(block.fc.bias, g.hidden[l].d_bias, st.adam_fc_bias[l], st.lr);
    adam_update(block.bn.gamma, g.hidden[l].d_gamma, st.adam_bn_gamma[l], st.lr);
    adam_update(block.bn.beta, g.hidden[l].d_beta, st.adam_bn_beta[l], st.lr);
  }
  adam_update(st.net.output.weights.values(), g.d_out_weights.values(), st.adam_out_weights, st.lr);
  adam_update(st.net.output.bias, g.d_out_bias, st.adam_out_bias, st.lr);
  straight_through_update(st.sensing, g.d_theta_sb, st.adam_theta, st.lr);

  st.step += 1;
  return loss;
}

struct LossRecord {
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

/// Epoch loop over seeded-shuffled mini-batches. A trailing batch smaller
/// than 2 samples is dropped (batch statistics would be undefined). Ends with
/// a refresh so the cached projection matches the final Theta.
inline std::vector<LossRecord> train(TrainState& st, const DenseMatrix& dataset, const TrainConfig& cfg,
                                     const std::function<void(const LossRecord&)>& on_step = {}) {
  cfg.validate();
  if (dataset.rows() == 0) throw std::invalid_argument("train: empty dataset");
  if (dataset.cols() != st.sensing.n()) throw std::invalid_argument("train: patch width != sensing rows");

  std::vector<LossRecord> log;
  std::vector<std::size_t> order(dataset.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    st.epoch = epoch;
    st.lr = lr_at(epoch, cfg);
    st.rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t size = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      if (size < 2) break;
      DenseMatrix batch(size, dataset.cols());
      for (std::size_t b = 0; b < size; ++b) {
        const double* src = dataset.row_ptr(order[start + b]);
        std::copy(src, src + dataset.cols(), batch.row_ptr(b));
      }
      const double loss = train_step(st, batch, cfg.weight_decay);
      LossRecord rec{epoch, st.step, loss, st.lr};
      log.push_back(rec);
      if (on_step) on_step(rec);
    }
  }
  refresh(st.sensing);
  st.net.scaling.alpha = st.sensing.alpha;
  return log;
}

}  // namespace tcs
