// The deployable unit: network configuration, corpus normalization scalars,
// the sensing weights with their derived ternary projection, and the
// reconstruction network.
#pragma once

#include <span>
#include <vector>

#include "tcs/imaging.hpp"
#include "tcs/network.hpp"
#include "tcs/projection.hpp"

namespace tcs {

struct Model {
  NetworkConfig config;
  NormalizationStats stats;
  SensingWeights sensing;
  ReconstructionNet net;
};

/// Re-derives mask/Theta_sb/alpha from Theta and mirrors alpha into the
/// scaling layer.
inline void refresh_model(Model& model) {
  refresh(model.sensing);
  model.net.scaling.alpha = model.sensing.alpha;
}

/// Fresh model with fan-based uniform init; draw order is Theta first, then
/// the reconstruction layers front to back.
inline Model make_model(const NetworkConfig& cfg, const NormalizationStats& stats, SeededRng& rng) {
  cfg.validate();
  Model model;
  model.config = cfg;
  model.stats = stats;
  model.sensing = make_sensing_weights(init_theta(cfg, rng), cfg.k());
  model.net = make_network(cfg, rng);
  model.net.scaling.alpha = model.sensing.alpha;
  return model;
}

/// Normalize -> sense -> reconstruct -> denormalize for one raw patch.
inline std::vector<double> reconstruct_patch(const Model& model, std::span<const double> raw_patch) {
  std::vector<double> x(raw_patch.begin(), raw_patch.end());
  normalize_in_place(x, model.stats);
  std::vector<double> out = forward_infer(model.net, model.sensing.theta_sb, x);
  denormalize_in_place(out, model.stats);
  return out;
}

}  // namespace tcs
