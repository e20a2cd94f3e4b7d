#pragma once

// Evaluation metrics: graded-relevance nDCG between two rankings, the
// sampling total-cost model, and improvement over a baseline.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace autotune {

/// Relevance level for an item ranked `predicted` whose true rank is
/// `truth`, out of n. With d = |predicted - truth| / (n - 1):
///   d <= 0.1 -> 5, d <= 0.25 -> 4, d <= 0.55 -> 3, d <= 0.9 -> 2, else 0.
/// Thresholds are compared in exact integer arithmetic.
inline int relevance(long predicted, long truth, long n) {
  if (n < 2) throw std::invalid_argument("relevance: n must be >= 2");
  const long delta = std::labs(predicted - truth);
  const long span = n - 1;
  if (10 * delta <= span) return 5;
  if (4 * delta <= span) return 4;
  if (20 * delta <= 11 * span) return 3;
  if (10 * delta <= 9 * span) return 2;
  return 0;
}

/// sum_i (2^rel_i - 1) / log2(i + 1), positions 1-based.
inline double dcg(std::span<const int> relevances) {
  if (relevances.empty()) throw std::invalid_argument("dcg: empty relevance list");
  double s = 0.0;
  for (std::size_t i = 0; i < relevances.size(); ++i)
    s += (std::exp2(relevances[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

/// nDCG of a predicted ranking against the true ranking. Both arguments
/// hold 1-based ranks per item. Items are laid out in true-rank order; each
/// position scores the relevance of that item's predicted rank. The ideal
/// is every position at relevance 5.
inline double ndcg(std::span<const long> predicted, std::span<const long> truth) {
  const auto n = static_cast<long>(truth.size());
  if (predicted.size() != truth.size()) throw std::invalid_argument("ndcg: size mismatch");
  if (n < 2) throw std::invalid_argument("ndcg: need at least 2 items");
  std::vector<int> rel(static_cast<std::size_t>(n), -1);
  std::vector<bool> seen_p(static_cast<std::size_t>(n), false);
  for (long i = 0; i < n; ++i) {
    const long t = truth[static_cast<std::size_t>(i)];
    const long p = predicted[static_cast<std::size_t>(i)];
    if (t < 1 || t > n || p < 1 || p > n || rel[static_cast<std::size_t>(t - 1)] != -1 ||
        seen_p[static_cast<std::size_t>(p - 1)])
      throw std::invalid_argument("ndcg: ranks must be permutations of 1..n");
    seen_p[static_cast<std::size_t>(p - 1)] = true;
    rel[static_cast<std::size_t>(t - 1)] = relevance(p, t, n);
  }
  const std::vector<int> ideal(static_cast<std::size_t>(n), 5);
  return dcg(rel) / dcg(ideal);
}

/// 1-based ranks of `times` in ascending order; equal times are ranked by
/// position (earlier sample first).
inline std::vector<long> ranks_from_times(std::span<const double> times) {
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  std::vector<long> rank(times.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<long>(r + 1);
  return rank;
}

/// nDCG of the ranking induced by `predicted_times` against the one induced
/// by `true_times`.
inline double ndcg_from_times(std::span<const double> predicted_times,
                              std::span<const double> true_times) {
  const auto p = ranks_from_times(predicted_times);
  const auto t = ranks_from_times(true_times);
  return ndcg(p, t);
}

/// Sampling cost of a model trained on n samples and tested on n more,
/// plus the cost of prediction error over |S| settings weighted by R.
inline double total_cost(double n, double epsilon, double settings, double weight) {
  if (n < 0.0 || epsilon < 0.0 || settings < 0.0 || weight < 0.0)
    throw std::invalid_argument("total_cost: arguments must be non-negative");
  return 2.0 * n + epsilon * settings * weight;
}

/// (et - baseline) / baseline * 100. Negative means faster than baseline.
inline double improvement(double et, double baseline) {
  if (baseline == 0.0) throw std::invalid_argument("improvement: zero baseline");
  return (et - baseline) / baseline * 100.0;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: bad sizes");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman rank correlation (average ranks for ties).
inline double spearman(std::span<const double> x, std::span<const double> y) {
  auto avg_rank = [](std::span<const double> v) {
    std::vector<std::size_t> o(v.size());
    std::iota(o.begin(), o.end(), 0);
    std::sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < o.size();) {
      std::size_t j = i;
      while (j + 1 < o.size() && v[o[j + 1]] == v[o[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[o[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = avg_rank(x);
  const auto ry = avg_rank(y);
  return pearson(rx, ry);
}

}  // namespace autotune
