// Grayscale image handling for block-based sensing: patch extraction and
// sampling, corpus normalization, overlap-average reassembly, PSNR, and
// binary PGM (P5) / PPM (P6) input-output.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcs/numerics.hpp"

namespace tcs {

/// 8-bit-valued grayscale raster kept in doubles: pixels in [0, 255], row-major.
struct GrayImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> pixels;

  double& at(std::uint32_t row, std::uint32_t col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  double at(std::uint32_t row, std::uint32_t col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

inline GrayImage make_image(std::uint32_t width, std::uint32_t height, double fill = 0.0) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<std::size_t>(width) * height, fill);
  return img;
}

struct PatchOrigin {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

/// Vectorized S x S windows; vectors.row(p) is the raster scan of patch p.
struct PatchSet {
  std::uint32_t patch_side = 0;
  std::vector<PatchOrigin> origins;
  DenseMatrix vectors;  // count x S^2

  std::size_t count() const { return vectors.rows(); }
};

/// Global scalar statistics of the training patch corpus.
struct NormalizationStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Fixed Rec.601 luma: 0.299 r + 0.587 g + 0.114 b.
inline GrayImage to_grayscale(std::span<const double> r, std::span<const double> g,
                              std::span<const double> b, std::uint32_t width, std::uint32_t height) {
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (r.size() != count || g.size() != count || b.size() != count)
    throw std::invalid_argument("to_grayscale: channel size mismatch");
  GrayImage img = make_image(width, height);
  for (std::size_t i = 0; i < count; ++i) img.pixels[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return img;
}

/// All windows at origins (i*stride, j*stride) fully inside the image,
/// origins in row-major order.
inline PatchSet extract_patches(const GrayImage& img, std::uint32_t patch_side, std::uint32_t stride) {
  if (patch_side == 0 || patch_side > std::min(img.width, img.height))
    throw std::invalid_argument("extract_patches: patch side exceeds image");
  if (stride == 0) throw std::invalid_argument("extract_patches: stride must be positive");
  const std::uint32_t rows = (img.height - patch_side) / stride + 1;
  const std::uint32_t cols = (img.width - patch_side) / stride + 1;
  PatchSet set;
  set.patch_side = patch_side;
  set.origins.reserve(static_cast<std::size_t>(rows) * cols);
  set.vectors = DenseMatrix(static_cast<std::size_t>(rows) * cols,
                            static_cast<std::size_t>(patch_side) * patch_side);
  std::size_t p = 0;
  for (std::uint32_t oy = 0; oy < rows; ++oy) {
    for (std::uint32_t ox = 0; ox < cols; ++ox, ++p) {
      const std::uint32_t base_row = oy * stride;
      const std::uint32_t base_col = ox * stride;
      set.origins.push_back({base_row, base_col});
      double* dst = set.vectors.row_ptr(p);
      for (std::uint32_t dy = 0; dy < patch_side; ++dy)
        for (std::uint32_t dx = 0; dx < patch_side; ++dx)
          *dst++ = img.at(base_row + dy, base_col + dx);
    }
  }
  return set;
}

/// Draws `count` patches uniformly over all valid (image, origin) pairs, so
/// larger images contribute proportionally more windows.
inline PatchSet sample_random_patches(const std::vector<GrayImage>& images, std::uint32_t patch_side,
                                      std::size_t count, SeededRng& rng) {
  if (count < 1) throw std::invalid_argument("sample_random_patches: count must be positive");
  struct Window {
    std::size_t image;
    std::uint32_t rows;
    std::uint32_t cols;
  };
  std::vector<Window> windows;
  std::vector<std::uint64_t> cumulative;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const GrayImage& img = images[i];
    if (img.width < patch_side || img.height < patch_side) continue;
    const std::uint32_t rows = img.height - patch_side + 1;
    const std::uint32_t cols = img.width - patch_side + 1;
    windows.push_back({i, rows, cols});
    total += static_cast<std::uint64_t>(rows) * cols;
    cumulative.push_back(total);
  }
  if (total == 0) throw std::invalid_argument("sample_random_patches: no valid windows");

  PatchSet set;
  set.patch_side = patch_side;
  set.origins.reserve(count);
  set.vectors = DenseMatrix(count, static_cast<std::size_t>(patch_side) * patch_side);
  for (std::size_t p = 0; p < count; ++p) {
    const std::uint64_t draw = rng.uniform_int(total);
    const std::size_t w = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), draw) - cumulative.begin());
    const std::uint64_t offset = draw - (w == 0 ? 0 : cumulative[w - 1]);
    const Window& win = windows[w];
    const std::uint32_t oy = static_cast<std::uint32_t>(offset / win.cols);
    const std::uint32_t ox = static_cast<std::uint32_t>(offset % win.cols);
    set.origins.push_back({oy, ox});
    const GrayImage& img = images[win.image];
    double* dst = set.vectors.row_ptr(p);
    for (std::uint32_t dy = 0; dy < patch_side; ++dy)
      for (std::uint32_t dx = 0; dx < patch_side; ++dx) *dst++ = img.at(oy + dy, ox + dx);
  }
  return set;
}

/// Scalar mean and population standard deviation over every patch pixel.
inline NormalizationStats compute_normalization_stats(const DenseMatrix& patches) {
  if (patches.size() == 0) throw std::invalid_argument("compute_normalization_stats: empty corpus");
  double sum = 0.0;
  for (double v : patches.values()) sum += v;
  const double mean = sum / static_cast<double>(patches.size());
  double sq = 0.0;
  for (double v : patches.values()) {
    const double d = v - mean;
    sq += d * d;
  }
  NormalizationStats stats;
  stats.mean = mean;
  stats.std = std::sqrt(sq / static_cast<double>(patches.size()));
  return stats;
}

inline void normalize_in_place(std::span<double> values, const NormalizationStats& stats) {
  if (!(stats.std > 0.0)) throw std::invalid_argument("normalize: std must be positive");
  for (double& v : values) v = (v - stats.mean) / stats.std;
}

inline void denormalize_in_place(std::span<double> values, const NormalizationStats& stats) {
  if (!(stats.std > 0.0)) throw std::invalid_argument("denormalize: std must be positive");
  for (double& v : values) v = v * stats.std + stats.mean;
}

inline DenseMatrix normalize(const DenseMatrix& patches, const NormalizationStats& stats) {
  DenseMatrix out = patches;
  normalize_in_place(out.values(), stats);
  return out;
}

inline DenseMatrix denormalize(const DenseMatrix& patches, const NormalizationStats& stats) {
  DenseMatrix out = patches;
  denormalize_in_place(out.values(), stats);
  return out;
}

/// Per-pixel mean of every patch covering that pixel (count-weighted at the
/// borders). Every pixel must be covered by at least one patch.
inline GrayImage overlap_average(const PatchSet& patches, std::uint32_t width, std::uint32_t height) {
  const std::uint32_t s = patches.patch_side;
  GrayImage sum = make_image(width, height, 0.0);
  std::vector<std::uint32_t> hits(static_cast<std::size_t>(width) * height, 0);
  for (std::size_t p = 0; p < patches.count(); ++p) {
    const PatchOrigin o = patches.origins[p];
    if (o.row + s > height || o.col + s > width)
      throw std::invalid_argument("overlap_average: patch outside the target image");
    const double* src = patches.vectors.row_ptr(p);
    for (std::uint32_t dy = 0; dy < s; ++dy) {
      const std::size_t base = static_cast<std::size_t>(o.row + dy) * width + o.col;
      for (std::uint32_t dx = 0; dx < s; ++dx) {
        sum.pixels[base + dx] += *src++;
        ++hits[base + dx];
      }
    }
  }
  for (std::size_t i = 0; i < sum.pixels.size(); ++i) {
    if (hits[i] == 0) throw std::invalid_argument("overlap_average: uncovered pixel");
    sum.pixels[i] /= static_cast<double>(hits[i]);
  }
  return sum;
}

inline void clamp_pixels(GrayImage& img) {
  for (double& v : img.pixels) v = std::clamp(v, 0.0, 255.0);
}

/// 10 log10(255^2 / MSE); +infinity when the images are identical.
inline double psnr(const GrayImage& reference, const GrayImage& test) {
  if (reference.width != test.width || reference.height != test.height)
    throw std::invalid_argument("psnr: dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    const double d = reference.pixels[i] - test.pixels[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(reference.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// ---- PGM / PPM ----

namespace detail {

inline int pnm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok.empty() ? EOF : 0;
}

inline std::uint32_t pnm_read_uint(std::istream& in, const char* what) {
  std::string tok;
  if (pnm_next_token(in, tok) == EOF) throw std::runtime_error(std::string("pnm: missing ") + what);
  try {
    const unsigned long v = std::stoul(tok);
    if (v > 0xFFFFFFFFul) throw std::out_of_range(tok);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("pnm: bad ") + what + " '" + tok + "'");
  }
}

}  // namespace detail

/// Loads a binary P5 PGM or P6 PPM (converted through to_grayscale), maxval <= 255.
inline GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image file: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw std::runtime_error("unsupported image format (want binary PGM P5 or PPM P6): " + path.string());
  const bool color = magic[1] == '6';
  const std::uint32_t width = detail::pnm_read_uint(in, "width");
  const std::uint32_t height = detail::pnm_read_uint(in, "height");
  const std::uint32_t maxval = detail::pnm_read_uint(in, "maxval");
  if (maxval == 0 || maxval > 255) throw std::runtime_error("pnm: unsupported maxval");
  // header ends with exactly one whitespace byte before the raster
  const std::size_t count = static_cast<std::size_t>(width) * height;
  const std::size_t bytes = count * (color ? 3 : 1);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw std::runtime_error("pnm: truncated raster in " + path.string());
  if (!color) {
    GrayImage img = make_image(width, height);
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = static_cast<double>(raw[i]);
    return img;
  }
  std::vector<double> r(count), g(count), b(count);
  for (std::size_t i = 0; i < count; ++i) {
    r[i] = static_cast<double>(raw[3 * i]);
    g[i] = static_cast<double>(raw[3 * i + 1]);
    b[i] = static_cast<double>(raw[3 * i + 2]);
  }
  return to_grayscale(r, g, b, width, height);
}

inline GrayImage load_pgm(const std::filesystem::path& path) { return load_image(path); }

/// Writes binary P5, rounding to the nearest integer and clamping to [0, 255].
inline void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image file: " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 255.0);
    raw[i] = static_cast<unsigned char>(std::lround(v));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("failed writing image file: " + path.string());
}

}  // namespace tcs
