#pragma once

// Lawson-Hanson active-set solver for min ||A x - b||_2 subject to x >= 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace autotune {

struct NnlsResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;  // ||A x - b||_2
  int iterations = 0;
};

inline NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                       int max_iterations = 0) {
  const auto m = a.rows();
  const auto n = a.cols();
  if (b.size() != m) throw std::invalid_argument("nnls: A and b disagree on rows");
  if (max_iterations <= 0) max_iterations = 30 * static_cast<int>(n) + 30;

  const double tol = 10.0 * std::numeric_limits<double>::epsilon() *
                     a.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(m, n));

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Eigen::VectorXd w = a.transpose() * (b - a * x);

  // Least squares restricted to the passive columns; zero elsewhere.
  auto solve_passive = [&]() {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    Eigen::MatrixXd ap(m, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      ap.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    const Eigen::VectorXd sp = ap.colPivHouseholderQr().solve(b);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k)
      s(cols[k]) = sp(static_cast<Eigen::Index>(k));
    return s;
  };

  int it = 0;
  while (it < max_iterations) {
    Eigen::Index t = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > wmax) {
        wmax = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    passive[static_cast<std::size_t>(t)] = true;

    while (it < max_iterations) {
      ++it;
      Eigen::VectorXd s = solve_passive();
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) feasible = false;
      if (feasible) {
        x = s;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          const double d = x(j) - s(j);
          if (d > 0.0) alpha = std::min(alpha, x(j) / d);
        }
      }
      if (!std::isfinite(alpha)) alpha = 0.0;
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
    w = a.transpose() * (b - a * x);
  }

  NnlsResult r;
  r.x = x;
  r.residual_norm = (a * x - b).norm();
  r.iterations = it;
  return r;
}

/// Largest violation of the KKT conditions for x, relative to
/// max(1, ||A^T b||_inf): |g_k| where x_k > 0 and max(0, -g_k) where
/// x_k = 0, with g = A^T (A x - b).
inline double kkt_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = a.transpose() * (a * x - b);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) < 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, x(k) > 0.0 ? std::abs(g(k)) : std::max(0.0, -g(k)));
  }
  const double scale = std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
  return worst / scale;
}

}  // namespace autotune
