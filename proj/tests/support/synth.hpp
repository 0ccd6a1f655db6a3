// Shared test utilities: a procedural grayscale image generator (smooth
// fields, soft-edged shapes, and gratings give the patch corpus both
// low-frequency structure and edges), a dense->sparse bridge used as the
// inverse of densify, and a finite-difference gradient oracle.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "tcs/imaging.hpp"
#include "tcs/network.hpp"
#include "tcs/numerics.hpp"
#include "tcs/training.hpp"

namespace tcs::test {

/// Seed-deterministic natural-ish image: low-frequency cosine field, soft-
/// edged ellipses, mid- and fine-scale gratings, correlated micro-texture,
/// and pixel noise, quantized to integers in [0,255]. The fine detail matters:
/// it makes reconstruction quality information-limited, the regime where the
/// number and spread of measurements governs PSNR as it does on photographs.
inline GrayImage synth_image(std::uint32_t width, std::uint32_t height, SeededRng& rng) {
  GrayImage img = make_image(width, height, 128.0);

  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int w = 0; w < 4; ++w) {
    const double period = rng.uniform_real(40.0, 180.0);
    const double angle = rng.uniform_real(0.0, 2.0 * std::numbers::pi);
    waves.push_back({std::cos(angle) / period, std::sin(angle) / period,
                     rng.uniform_real(0.0, 2.0 * std::numbers::pi), rng.uniform_real(12.0, 38.0)});
  }
  struct Blob {
    double cx, cy, ax, ay, angle, delta, softness;
  };
  std::vector<Blob> blobs;
  const int blob_count = 5 + static_cast<int>(rng.uniform_int(5));
  for (int s = 0; s < blob_count; ++s) {
    // half the shapes get crisp (sub-pixel) edges
    const double softness = (s % 2 == 0) ? rng.uniform_real(0.15, 0.6) : rng.uniform_real(0.8, 3.0);
    blobs.push_back({rng.uniform_real(0.0, width), rng.uniform_real(0.0, height),
                     rng.uniform_real(6.0, width / 3.0), rng.uniform_real(6.0, height / 3.0),
                     rng.uniform_real(0.0, std::numbers::pi), rng.uniform_real(-70.0, 70.0), softness});
  }
  struct Grating {
    double gx, gy, phase, amp;
  };
  std::vector<Grating> gratings;
  {
    const double period = rng.uniform_real(6.0, 16.0);
    const double angle = rng.uniform_real(0.0, std::numbers::pi);
    gratings.push_back({std::cos(angle) / period, std::sin(angle) / period,
                        rng.uniform_real(0.0, 2.0 * std::numbers::pi), rng.uniform_real(6.0, 12.0)});
  }

  // localized oscillatory atoms: free-form fine detail whose position,
  // frequency, and phase vary across the image, the kind of content mixed
  // measurements capture but sparse point samples alias
  struct Atom {
    double cx, cy, sigma, fx, fy, phase, amp;
  };
  std::vector<Atom> atoms;
  const std::size_t atom_count = std::max<std::size_t>(2, static_cast<std::size_t>(width) * height / 300);
  for (std::size_t s = 0; s < atom_count; ++s) {
    const double period = rng.uniform_real(2.2, 5.0);
    const double angle = rng.uniform_real(0.0, std::numbers::pi);
    atoms.push_back({rng.uniform_real(0.0, width), rng.uniform_real(0.0, height),
                     rng.uniform_real(2.5, 5.0), std::cos(angle) / period, std::sin(angle) / period,
                     rng.uniform_real(0.0, 2.0 * std::numbers::pi), rng.uniform_real(18.0, 36.0)});
  }
  std::vector<double> atom_field(static_cast<std::size_t>(width) * height, 0.0);
  for (const Atom& atom : atoms) {
    const int reach = static_cast<int>(std::ceil(3.0 * atom.sigma));
    const int x0 = std::max(0, static_cast<int>(atom.cx) - reach);
    const int x1 = std::min<int>(width - 1, static_cast<int>(atom.cx) + reach);
    const int y0 = std::max(0, static_cast<int>(atom.cy) - reach);
    const int y1 = std::min<int>(height - 1, static_cast<int>(atom.cy) + reach);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - atom.cx, dy = y - atom.cy;
        const double envelope = std::exp(-(dx * dx + dy * dy) / (2.0 * atom.sigma * atom.sigma));
        atom_field[static_cast<std::size_t>(y) * width + x] +=
            atom.amp * envelope *
            std::cos(2.0 * std::numbers::pi * (atom.fx * dx + atom.fy * dy) + atom.phase);
      }
  }

  // correlated micro-texture: iid field box-blurred 3x3 (std ~0.19), scaled;
  // pixel noise stays mild so point-sampling gets no artificial advantage
  std::vector<double> raw(static_cast<std::size_t>(width) * height);
  for (double& v : raw) v = rng.uniform_real(-1.0, 1.0);
  const double texture_amp = 14.0;
  const double pixel_noise_amp = 2.0;

  for (std::uint32_t y = 0; y < height; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      double v = 128.0;
      for (const Wave& w : waves)
        v += w.amp * std::cos(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
      for (const Blob& b : blobs) {
        const double dx = x - b.cx, dy = y - b.cy;
        const double u = std::cos(b.angle) * dx + std::sin(b.angle) * dy;
        const double w = -std::sin(b.angle) * dx + std::cos(b.angle) * dy;
        const double q = (u * u) / (b.ax * b.ax) + (w * w) / (b.ay * b.ay);
        v += b.delta / (1.0 + std::exp((q - 1.0) * 4.0 / b.softness));
      }
      for (const Grating& g : gratings)
        v += g.amp * std::cos(2.0 * std::numbers::pi * (g.gx * x + g.gy * y) + g.phase);
      v += atom_field[static_cast<std::size_t>(y) * width + x];
      double blur = 0.0;
      int taps = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = static_cast<int>(y) + dy, xx = static_cast<int>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<int>(height) || xx >= static_cast<int>(width)) continue;
          blur += raw[static_cast<std::size_t>(yy) * width + xx];
          ++taps;
        }
      v += texture_amp * blur / taps;
      v += pixel_noise_amp * rng.uniform_real(-1.0, 1.0);
      img.at(y, x) = std::clamp(std::round(v), 0.0, 255.0);
    }
  }
  return img;
}

inline std::vector<GrayImage> synth_corpus(std::size_t count, std::uint32_t width, std::uint32_t height,
                                           std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<GrayImage> images;
  images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) images.push_back(synth_image(width, height, rng));
  return images;
}

/// Inverse of densify for matrices with a uniform per-column nonzero count.
inline SparseTernaryMatrix sparsify_dense(const DenseMatrix& d, std::uint32_t k) {
  SparseTernaryMatrix t;
  t.n = static_cast<std::uint32_t>(d.rows());
  t.m = static_cast<std::uint32_t>(d.cols());
  t.k = k;
  for (std::size_t j = 0; j < d.cols(); ++j)
    for (std::size_t i = 0; i < d.rows(); ++i)
      if (d(i, j) != 0.0) t.entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::int8_t>(d(i, j) > 0 ? 1 : -1)});
  t.validate();
  return t;
}

/// Random valid sparse ternary matrix.
inline SparseTernaryMatrix random_sparse_ternary(std::uint32_t n, std::uint32_t m, std::uint32_t k,
                                                 SeededRng& rng) {
  SparseTernaryMatrix t;
  t.n = n;
  t.m = m;
  t.k = k;
  std::vector<std::uint32_t> rows(n);
  for (std::uint32_t i = 0; i < n; ++i) rows[i] = i;
  for (std::uint32_t j = 0; j < m; ++j) {
    rng.shuffle(rows);
    std::vector<std::uint32_t> pick(rows.begin(), rows.begin() + k);
    std::sort(pick.begin(), pick.end());
    for (std::uint32_t r : pick)
      t.entries.push_back({r, static_cast<std::int8_t>(rng.uniform_int(2) == 0 ? -1 : 1)});
  }
  return t;
}

// ---- finite-difference gradient oracle ----

/// Train-mode loss as a function of parameters, with the sensing layer
/// densified so individual Theta_sb entries can be perturbed as continuous
/// values. Running statistics are restored, so evaluations are side-effect
/// free.
inline double train_loss_dense_sensing(ReconstructionNet& net, const DenseMatrix& theta_sb_dense,
                                       const DenseMatrix& batch) {
  ReconstructionNet snapshot = net;  // keep running stats unchanged
  ForwardCache cache;
  const DenseMatrix sensed = matmul(batch, theta_sb_dense);
  const DenseMatrix out = forward_train_from_sensed(snapshot, sensed, cache);
  return mse_loss(batch, out);
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error, with pairs below 1e-8 on both sides treated as matching
/// zeros. The zero case is real: a hidden-layer bias shift cancels against
/// the batch-norm mean subtraction, so its true gradient is 0 and both sides
/// are rounding noise (<= ~1e-10) where relative error is undefined. All
/// other parameters get a pure relative comparison.
inline void gradcheck_accumulate(GradCheckReport& report, double analytic, double numeric) {
  report.checked += 1;
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-8) return;
  report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / scale);
}

/// Central finite differences over every reconstruction parameter and every
/// Theta_sb entry against the analytic backward pass.
inline GradCheckReport gradient_check(ReconstructionNet& net, const SparseTernaryMatrix& theta_sb,
                                      const DenseMatrix& batch, double h = 1e-5) {
  ForwardCache cache;
  forward_train(net, theta_sb, batch, cache);
  const NetGradients grads = backward(net, cache, batch);
  DenseMatrix theta_dense = densify(theta_sb);

  GradCheckReport report;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = train_loss_dense_sensing(net, theta_dense, batch);
    param = saved - h;
    const double down = train_loss_dense_sensing(net, theta_dense, batch);
    param = saved;
    gradcheck_accumulate(report, analytic, (up - down) / (2.0 * h));
  };

  for (std::size_t l = 0; l < net.hidden.size(); ++l) {
    HiddenBlock& block = net.hidden[l];
    for (std::size_t i = 0; i < block.fc.weights.size(); ++i)
      probe(block.fc.weights.values()[i], grads.hidden[l].d_weights.values()[i]);
    for (std::size_t i = 0; i < block.fc.bias.size(); ++i)
      probe(block.fc.bias[i], grads.hidden[l].d_bias[i]);
    for (std::size_t i = 0; i < block.bn.gamma.size(); ++i)
      probe(block.bn.gamma[i], grads.hidden[l].d_gamma[i]);
    for (std::size_t i = 0; i < block.bn.beta.size(); ++i)
      probe(block.bn.beta[i], grads.hidden[l].d_beta[i]);
  }
  for (std::size_t i = 0; i < net.output.weights.size(); ++i)
    probe(net.output.weights.values()[i], grads.d_out_weights.values()[i]);
  for (std::size_t i = 0; i < net.output.bias.size(); ++i)
    probe(net.output.bias[i], grads.d_out_bias[i]);
  for (std::size_t i = 0; i < theta_dense.size(); ++i)
    probe(theta_dense.values()[i], grads.d_theta_sb.values()[i]);
  return report;
}

/// Smallest |affine batch-norm output| across the cache: finite differences
/// near a ReLU kink are invalid, so tests assert a healthy margin before
/// trusting the oracle.
inline double min_relu_margin(const ReconstructionNet& net, const SparseTernaryMatrix& theta_sb,
                              const DenseMatrix& batch) {
  ReconstructionNet snapshot = net;
  ForwardCache cache;
  forward_train(snapshot, theta_sb, batch, cache);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < cache.layers.size(); ++l) {
    const auto& layer = cache.layers[l];
    const BatchNormLayer& bn = net.hidden[l].bn;
    for (std::size_t b = 0; b < layer.normalized.rows(); ++b)
      for (std::size_t h = 0; h < layer.normalized.cols(); ++h) {
        const double affine = bn.gamma[h] * layer.normalized(b, h) + bn.beta[h];
        margin = std::min(margin, std::abs(affine));
      }
  }
  return margin;
}

/// Scratch directory under the system temp root, unique per call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("tcs_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tcs::test
