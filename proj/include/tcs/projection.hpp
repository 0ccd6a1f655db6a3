// Maps continuous sensing weights to a sparse ternary projection plus
// per-column scale factors: column-wise top-k support selection, masking,
// sign binarization, and the least-squares scale alpha_j = ||theta_s(j)||_1 / k.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "tcs/numerics.hpp"

namespace tcs {

/// Per-column support sets, row indices ascending.
using ColumnMask = std::vector<std::vector<std::uint32_t>>;

/// For each column, the k row indices with largest |theta|. Ties break toward
/// the lower row index, so the selection is deterministic.
inline ColumnMask top_k_select(const DenseMatrix& theta, std::size_t k) {
  const std::size_t n = theta.rows();
  const std::size_t m = theta.cols();
  if (k < 1 || k > n) throw std::invalid_argument("top_k_select: k out of range");
  ColumnMask mask(m);
  std::vector<std::uint32_t> order(n);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
      const double va = std::abs(theta(a, j));
      const double vb = std::abs(theta(b, j));
      if (va != vb) return va > vb;
      return a < b;
    };
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), better);
    auto& col = mask[j];
    col.assign(order.begin(), order.begin() + k);
    std::sort(col.begin(), col.end());
  }
  return mask;
}

/// Theta_s = M (.) Theta: keeps masked entries, zeroes the rest.
inline DenseMatrix apply_mask(const DenseMatrix& theta, const ColumnMask& mask) {
  if (mask.size() != theta.cols()) throw std::invalid_argument("apply_mask: mask/theta column mismatch");
  DenseMatrix s(theta.rows(), theta.cols(), 0.0);
  for (std::size_t j = 0; j < theta.cols(); ++j)
    for (std::uint32_t i : mask[j]) s(i, j) = theta(i, j);
  return s;
}

/// Signs of the masked entries; a masked entry equal to exactly 0 maps to +1
/// so every column keeps exactly k nonzeros.
inline SparseTernaryMatrix binarize(const DenseMatrix& theta_s, const ColumnMask& mask) {
  if (mask.size() != theta_s.cols()) throw std::invalid_argument("binarize: mask/theta_s column mismatch");
  SparseTernaryMatrix t;
  t.n = static_cast<std::uint32_t>(theta_s.rows());
  t.m = static_cast<std::uint32_t>(theta_s.cols());
  t.k = mask.empty() ? 0 : static_cast<std::uint32_t>(mask.front().size());
  t.entries.reserve(static_cast<std::size_t>(t.m) * t.k);
  for (std::size_t j = 0; j < theta_s.cols(); ++j) {
    if (mask[j].size() != t.k) throw std::invalid_argument("binarize: ragged mask");
    for (std::uint32_t i : mask[j])
      t.entries.push_back({i, static_cast<std::int8_t>(theta_s(i, j) < 0.0 ? -1 : 1)});
  }
  return t;
}

/// alpha_j = ||theta_s(j)||_1 / k, summed ascending. Zero column gives 0.
inline double compute_alpha(std::span<const double> theta_s_col, std::size_t k) {
  if (k == 0) throw std::invalid_argument("compute_alpha: k must be positive");
  double l1 = 0.0;
  for (double v : theta_s_col) l1 += std::abs(v);
  return l1 / static_cast<double>(k);
}

/// E = ||theta - alpha * theta_sb||^2 for one column; the projection quality
/// measure the (sign, alpha) pair minimizes.
inline double approximation_error(std::span<const double> theta_col,
                                  std::span<const double> theta_sb_col, double alpha) {
  if (theta_col.size() != theta_sb_col.size())
    throw std::invalid_argument("approximation_error: dimension mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < theta_col.size(); ++i) {
    const double r = theta_col[i] - alpha * theta_sb_col[i];
    e += r * r;
  }
  return e;
}

/// Continuous sensing weights with cached projection state. The caches are
/// valid with respect to theta only after refresh(); training updates theta
/// in place and re-derives them at the start of the next step.
struct SensingWeights {
  DenseMatrix theta;  // n x m
  std::size_t k = 0;
  ColumnMask mask;
  SparseTernaryMatrix theta_sb;
  std::vector<double> alpha;

  std::size_t n() const { return theta.rows(); }
  std::size_t m() const { return theta.cols(); }
};

/// Recomputes mask, theta_sb, and alpha from the current theta:
/// top_k_select -> apply_mask -> binarize -> compute_alpha.
inline void refresh(SensingWeights& w) {
  if (!w.theta.is_finite()) throw std::invalid_argument("refresh: theta has non-finite entries");
  w.mask = top_k_select(w.theta, w.k);
  const DenseMatrix theta_s = apply_mask(w.theta, w.mask);
  w.theta_sb = binarize(theta_s, w.mask);
  w.alpha.resize(w.m());
  std::vector<double> col(w.n());
  for (std::size_t j = 0; j < w.m(); ++j) {
    for (std::size_t i = 0; i < w.n(); ++i) col[i] = theta_s(i, j);
    w.alpha[j] = compute_alpha(col, w.k);
  }
}

inline SensingWeights make_sensing_weights(DenseMatrix theta, std::size_t k) {
  SensingWeights w;
  w.theta = std::move(theta);
  w.k = k;
  refresh(w);
  return w;
}

}  // namespace tcs
