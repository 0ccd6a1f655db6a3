// End-to-end drivers shared by the command-line tool and the test suites:
// training from an image directory, block-wise sensing and reconstruction,
// and PSNR evaluation against the basis-pursuit baseline.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcs/baseline_bp.hpp"
#include "tcs/imaging.hpp"
#include "tcs/model.hpp"
#include "tcs/persistence.hpp"
#include "tcs/training.hpp"

namespace tcs {

/// PGM/PPM files of a directory in lexicographic order; deterministic input
/// ordering is part of the reproducibility contract.
inline std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::invalid_argument("image directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no .pgm/.ppm images in directory: " + dir.string());
  return files;
}

struct TrainRunOptions {
  std::filesystem::path images_dir;
  std::filesystem::path out_path;  // empty: do not write a checkpoint
  NetworkConfig net;
  TrainConfig train;
  std::size_t patch_count = 200000;
};

struct TrainRunResult {
  Model model;
  std::vector<LossRecord> log;
};

/// Full training pipeline: load images, sample patches, compute corpus
/// statistics, normalize, train, final refresh, optionally save. One RNG
/// stream seeded from the training seed drives sampling, initialization, and
/// shuffling, in that order.
inline TrainRunResult train_from_images(const std::vector<GrayImage>& images, const TrainRunOptions& opts,
                                        std::ostream* loss_stream = nullptr,
                                        std::ostream* info_stream = nullptr) {
  opts.net.validate();
  opts.train.validate();
  SeededRng rng(opts.train.seed);

  const PatchSet sampled = sample_random_patches(images, opts.net.patch_side, opts.patch_count, rng);
  const NormalizationStats stats = compute_normalization_stats(sampled.vectors);
  if (!(stats.std > 0.0)) throw std::runtime_error("degenerate training corpus: zero pixel variance");
  const DenseMatrix dataset = normalize(sampled.vectors, stats);

  Model model = make_model(opts.net, stats, rng);
  if (info_stream) {
    *info_stream << "config: S=" << opts.net.patch_side << " R=" << opts.net.sensing_rate
                 << " gamma=" << opts.net.sparsity_ratio << " L=" << opts.net.hidden_layers
                 << " H=" << opts.net.hidden_units << " n=" << opts.net.n() << " m=" << opts.net.m()
                 << " K=" << opts.net.k() << " patches=" << opts.patch_count
                 << " mean=" << stats.mean << " std=" << stats.std << "\n";
  }

  TrainConfig cfg = opts.train;
  cfg.seed = rng.next_u64();  // shuffle stream continues after sampling + init
  TrainState state = make_train_state(std::move(model.sensing), std::move(model.net), cfg);
  auto log = train(state, dataset, cfg, [&](const LossRecord& rec) {
    if (loss_stream)
      *loss_stream << rec.epoch << "," << rec.step << "," << std::setprecision(17) << rec.loss << ","
                   << std::setprecision(17) << rec.lr << "\n";
  });

  TrainRunResult result;
  result.model.config = opts.net;
  result.model.stats = stats;
  result.model.sensing = std::move(state.sensing);
  result.model.net = std::move(state.net);
  result.log = std::move(log);
  if (!opts.out_path.empty()) save_checkpoint(result.model, opts.out_path);
  return result;
}

inline TrainRunResult run_train(const TrainRunOptions& opts, std::ostream* loss_stream = nullptr,
                                std::ostream* info_stream = nullptr) {
  std::vector<GrayImage> images;
  for (const auto& path : list_image_files(opts.images_dir)) images.push_back(load_image(path));
  return train_from_images(images, opts, loss_stream, info_stream);
}

/// Block-wise acquisition: normalized patches at the given stride measured
/// through the ternary projection.
inline MeasurementSet sense_image(const SparseTernaryMatrix& theta_sb, const NormalizationStats& stats,
                                  const GrayImage& image, std::uint32_t patch_side, std::uint32_t stride) {
  if (static_cast<std::uint64_t>(patch_side) * patch_side != theta_sb.n)
    throw std::invalid_argument("sense_image: patch side does not match the projection");
  PatchSet patches = extract_patches(image, patch_side, stride);
  normalize_in_place(patches.vectors.values(), stats);
  MeasurementSet set;
  set.width = image.width;
  set.height = image.height;
  set.patch_side = patch_side;
  set.stride = stride;
  set.y = sense_batch(theta_sb, patches.vectors);
  return set;
}

/// Per-patch inference, denormalization, overlap averaging, and clamping.
inline GrayImage reconstruct_from_measurements(const Model& model, const MeasurementSet& set) {
  if (set.patch_side != model.config.patch_side)
    throw std::invalid_argument("reconstruct: measurement patch side does not match the model");
  if (set.y.cols() != model.config.m())
    throw std::invalid_argument("reconstruct: measurement width does not match the model");
  PatchSet recon;
  recon.patch_side = set.patch_side;
  const std::uint32_t rows = (set.height - set.patch_side) / set.stride + 1;
  const std::uint32_t cols = (set.width - set.patch_side) / set.stride + 1;
  if (static_cast<std::size_t>(rows) * cols != set.y.rows())
    throw std::invalid_argument("reconstruct: patch count inconsistent with dims and stride");
  recon.origins.reserve(set.y.rows());
  for (std::uint32_t oy = 0; oy < rows; ++oy)
    for (std::uint32_t ox = 0; ox < cols; ++ox) recon.origins.push_back({oy * set.stride, ox * set.stride});
  recon.vectors = DenseMatrix(set.y.rows(), model.config.n());
  const std::int64_t count = static_cast<std::int64_t>(set.y.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < count; ++p) {
    const std::size_t idx = static_cast<std::size_t>(p);
    std::vector<double> out =
        infer_from_measurements(model.net, {set.y.row_ptr(idx), set.y.cols()});
    denormalize_in_place(out, model.stats);
    std::copy(out.begin(), out.end(), recon.vectors.row_ptr(idx));
  }
  GrayImage image = overlap_average(recon, set.width, set.height);
  clamp_pixels(image);
  return image;
}

/// Sense + reconstruct in memory with the model's own projection.
inline GrayImage reconstruct_image(const Model& model, const GrayImage& image, std::uint32_t stride) {
  const MeasurementSet set =
      sense_image(model.sensing.theta_sb, model.stats, image, model.config.patch_side, stride);
  return reconstruct_from_measurements(model, set);
}

/// Baseline arm: measure raw patches with a dense ternary phi and solve each
/// patch by ISTA over the DCT basis, then overlap-average.
inline GrayImage bp_reconstruct_image(const DenseMatrix& phi, const DctBasis& basis, const GrayImage& image,
                                      std::uint32_t stride, const BpConfig& cfg) {
  const std::uint32_t side = basis.side;
  PatchSet patches = extract_patches(image, side, stride);
  const DenseMatrix a = matmul(phi, basis.psi);
  PatchSet recon;
  recon.patch_side = side;
  recon.origins = patches.origins;
  recon.vectors = DenseMatrix(patches.count(), patches.vectors.cols());
  const std::int64_t count = static_cast<std::int64_t>(patches.count());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t p = 0; p < count; ++p) {
    const std::size_t idx = static_cast<std::size_t>(p);
    const std::vector<double> y =
        dense_matvec(phi, {patches.vectors.row_ptr(idx), patches.vectors.cols()});
    const BpResult res = bp_reconstruct_with_operator(a, basis, y, cfg);
    std::copy(res.patch.begin(), res.patch.end(), recon.vectors.row_ptr(idx));
  }
  GrayImage out = overlap_average(recon, image.width, image.height);
  clamp_pixels(out);
  return out;
}

// ---- evaluation ----

struct EvaluateOptions {
  std::uint32_t stride = 2;
  bool baseline_bp = false;
  bool identity = false;  // reconstructor bypass: reassemble the true patches
  std::uint64_t seed = 1;
  BpConfig bp;  // lambda <= 0 selects the per-patch default
};

struct EvalRecord {
  std::string image;
  std::string method;
  double psnr_db = 0.0;
};

inline std::vector<EvalRecord> evaluate_images(const Model& model, const std::vector<GrayImage>& images,
                                               const std::vector<std::string>& names,
                                               const EvaluateOptions& opts) {
  if (images.size() != names.size()) throw std::invalid_argument("evaluate_images: names/images mismatch");
  std::vector<EvalRecord> records;
  DenseMatrix phi;
  DctBasis basis;
  if (opts.baseline_bp) {
    SeededRng rng(opts.seed);
    phi = random_ternary_projection(model.config.n(), model.config.m(), rng);
    basis = dct_basis(model.config.patch_side);
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const GrayImage& reference = images[i];
    {
      const GrayImage rec = reconstruct_image(model, reference, opts.stride);
      records.push_back({names[i], "proposed", psnr(reference, rec)});
    }
    if (opts.baseline_bp) {
      const GrayImage rec = bp_reconstruct_image(phi, basis, reference, opts.stride, opts.bp);
      records.push_back({names[i], "bp", psnr(reference, rec)});
    }
    if (opts.identity) {
      const PatchSet patches = extract_patches(reference, model.config.patch_side, opts.stride);
      GrayImage rec = overlap_average(patches, reference.width, reference.height);
      clamp_pixels(rec);
      records.push_back({names[i], "identity", psnr(reference, rec)});
    }
  }
  return records;
}

inline double mean_psnr(const std::vector<EvalRecord>& records, const std::string& method) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const EvalRecord& r : records)
    if (r.method == method) {
      sum += r.psnr_db;
      ++count;
    }
  if (count == 0) throw std::invalid_argument("mean_psnr: no records for method " + method);
  return sum / static_cast<double>(count);
}

inline std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

/// CSV report: header, one row per (image, method), then one mean row per
/// method in first-appearance order.
inline void write_eval_csv(const std::vector<EvalRecord>& records, std::ostream& out) {
  out << "image,method,psnr_db\n";
  std::vector<std::string> methods;
  for (const EvalRecord& r : records) {
    out << r.image << "," << r.method << "," << format_psnr(r.psnr_db) << "\n";
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  for (const std::string& method : methods)
    out << "mean," << method << "," << format_psnr(mean_psnr(records, method)) << "\n";
}

}  // namespace tcs
