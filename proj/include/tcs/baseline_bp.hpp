// Conventional recovery baseline: dense random ternary projections with
// l1-regularized recovery in an orthonormal 2D DCT patch basis, solved by
// iterative soft thresholding (the Lagrangian/BPDN relaxation of basis
// pursuit).
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "tcs/numerics.hpp"

namespace tcs {

/// Orthonormal separable 2D type-II DCT synthesis matrix: x = psi * u for a
/// row-major raster x of an S x S patch.
struct DctBasis {
  std::uint32_t side = 0;
  DenseMatrix psi;  // n x n
};

inline DctBasis dct_basis(std::uint32_t side) {
  if (side == 0) throw std::invalid_argument("dct_basis: side must be positive");
  const std::size_t s = side;
  DenseMatrix d1(s, s);
  for (std::size_t k = 0; k < s; ++k) {
    const double scale = (k == 0) ? std::sqrt(1.0 / static_cast<double>(s)) : std::sqrt(2.0 / static_cast<double>(s));
    for (std::size_t i = 0; i < s; ++i)
      d1(k, i) = scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * s));
  }
  // psi[(i,j), (k,l)] = d1[k][i] * d1[l][j]: transpose of the separable 2D analysis
  DctBasis basis;
  basis.side = side;
  basis.psi = DenseMatrix(s * s, s * s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      double* row = basis.psi.row_ptr(i * s + j);
      for (std::size_t k = 0; k < s; ++k)
        for (std::size_t l = 0; l < s; ++l) row[k * s + l] = d1(k, i) * d1(l, j);
    }
  return basis;
}

/// Dense m x n projection with i.i.d. entries equiprobable over {-1, 0, +1},
/// drawn row-major.
inline DenseMatrix random_ternary_projection(std::uint32_t signal_dim, std::uint32_t measurements,
                                             SeededRng& rng) {
  if (measurements >= signal_dim)
    throw std::invalid_argument("random_ternary_projection: need m < n");
  DenseMatrix phi(measurements, signal_dim);
  for (double& v : phi.values()) v = static_cast<double>(static_cast<int>(rng.uniform_int(3)) - 1);
  return phi;
}

struct BpConfig {
  double lambda = 0.0;  // l1 weight; <= 0 selects 0.01 * ||A^T y||_inf per solve
  std::size_t max_iters = 1000;
  double tol = 1e-8;  // relative objective-change stop; 0 disables it

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("BpConfig: max_iters must be at least 1");
    if (!(tol >= 0.0)) throw std::invalid_argument("BpConfig: tol must be nonnegative");
  }
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

/// Largest squared singular value of A by power iteration on A^T A, from a
/// fixed seeded start so the estimate is deterministic. Converges from below;
/// callers pad the result when a guaranteed-safe step size is needed.
inline double spectral_norm_sq(const DenseMatrix& a, std::size_t iters = 100) {
  SeededRng rng(0x5DEECE66Dull);
  std::vector<double> v(a.cols());
  double vnorm = 0.0;
  for (double& x : v) {
    x = rng.uniform_real(-1.0, 1.0);
    vnorm += x * x;
  }
  vnorm = std::sqrt(vnorm);
  for (double& x : v) x /= vnorm;

  double lambda = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const std::vector<double> av = dense_matvec(a, v);
    std::vector<double> w(a.cols(), 0.0);  // A^T (A v)
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* row = a.row_ptr(i);
      for (std::size_t j = 0; j < a.cols(); ++j) w[j] += row[j] * av[i];
    }
    double wnorm = 0.0;
    for (double x : w) wnorm += x * x;
    wnorm = std::sqrt(wnorm);
    if (wnorm == 0.0) return 0.0;
    lambda = wnorm;  // ||A^T A v|| with v unit
    for (std::size_t j = 0; j < w.size(); ++j) w[j] /= wnorm;
    v = std::move(w);
  }
  return lambda;
}

inline double default_bp_lambda(const DenseMatrix& a, std::span<const double> y) {
  double peak = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) dot += a(i, j) * y[i];
    peak = std::max(peak, std::abs(dot));
  }
  return 0.01 * peak;
}

struct IstaResult {
  std::vector<double> coeffs;
  std::size_t iterations = 0;
  double objective = 0.0;
  std::vector<double> objective_trace;  // one entry per iterate, nonincreasing
};

/// ISTA for min_u 1/2 ||A u - y||^2 + lambda ||u||_1 from u = 0, with step
/// 1 / (1.01 * ||A||_2^2) so the objective is monotone nonincreasing.
inline IstaResult ista_solve(const DenseMatrix& a, std::span<const double> y, const BpConfig& cfg) {
  cfg.validate();
  if (y.size() != a.rows()) throw std::invalid_argument("ista_solve: dimension mismatch");
  const double norm_sq = spectral_norm_sq(a);
  if (norm_sq == 0.0) throw std::invalid_argument("ista_solve: zero matrix");
  const double step = 1.0 / (norm_sq * 1.01);
  const double lambda = cfg.lambda > 0.0 ? cfg.lambda : default_bp_lambda(a, y);

  const std::size_t n = a.cols();
  std::vector<double> u(n, 0.0);
  std::vector<double> residual(y.begin(), y.end());  // A u - y at u = 0 is -y
  for (double& r : residual) r = -r;

  auto objective = [&](const std::vector<double>& coeffs, const std::vector<double>& res) {
    double quad = 0.0;
    for (double r : res) quad += r * r;
    double l1 = 0.0;
    for (double c : coeffs) l1 += std::abs(c);
    return 0.5 * quad + lambda * l1;
  };

  IstaResult result;
  double prev_obj = objective(u, residual);
  result.objective_trace.push_back(prev_obj);
  std::vector<double> u_prev(n, 0.0);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    // gradient of the quadratic part: A^T residual
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* row = a.row_ptr(i);
      const double r = residual[i];
      for (std::size_t j = 0; j < n; ++j) grad[j] += row[j] * r;
    }
    u_prev = u;
    for (std::size_t j = 0; j < n; ++j) u[j] = soft_threshold(u[j] - step * grad[j], step * lambda);

    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* row = a.row_ptr(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * u[j];
      residual[i] = acc - y[i];
    }
    const double obj = objective(u, residual);
    result.objective_trace.push_back(obj);
    result.iterations = it + 1;
    const double rel_change = std::abs(prev_obj - obj) / std::max(std::abs(prev_obj), 1.0);
    prev_obj = obj;
    if (u == u_prev) break;  // exact fixed point of the iteration map
    if (cfg.tol > 0.0 && rel_change <= cfg.tol) break;
  }
  result.coeffs = std::move(u);
  result.objective = prev_obj;
  return result;
}

struct BpResult {
  std::vector<double> patch;  // psi * coeffs
  IstaResult ista;
};

/// Recovery with A = phi * psi precomputed (shared across the patches of an
/// image): ISTA on the coefficients, then synthesis psi * u.
inline BpResult bp_reconstruct_with_operator(const DenseMatrix& a, const DctBasis& basis,
                                             std::span<const double> y, const BpConfig& cfg) {
  BpResult result;
  result.ista = ista_solve(a, y, cfg);
  result.patch = dense_matvec(basis.psi, result.ista.coeffs);
  return result;
}

/// y = (phi psi) u; recovers u by ISTA and synthesizes the patch psi * u.
inline BpResult bp_reconstruct(const DenseMatrix& phi, const DctBasis& basis, std::span<const double> y,
                               const BpConfig& cfg) {
  if (phi.cols() != basis.psi.rows()) throw std::invalid_argument("bp_reconstruct: phi/psi dimension mismatch");
  const DenseMatrix a = matmul(phi, basis.psi);
  return bp_reconstruct_with_operator(a, basis, y, cfg);
}

}  // namespace tcs
