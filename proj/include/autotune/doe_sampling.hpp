#pragma once

// Latin hypercube sampling and the bound-and-sample region used by
// multiple bound-and-search (MBS).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"

namespace autotune {

/// Axis-aligned box in encoded space, inclusive on both ends. For
/// categorical and boolean dimensions the bounds are category codes.
struct Region {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dimension() const { return lower.size(); }

  bool contains(std::span<const double> x) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
  }

  friend bool operator==(const Region&, const Region&) = default;
};

/// The whole configuration bound as a region.
inline Region full_region(const ConfigurationSpace& space) {
  Region r;
  for (const auto& p : space.params()) {
    r.lower.push_back(p.code_lower());
    r.upper.push_back(p.code_upper());
  }
  return r;
}

/// h points in [0,1)^n such that on every dimension each interval
/// [k/h, (k+1)/h) holds exactly one point. Dimension i uses its own random
/// permutation; the position inside the interval is uniform.
inline std::vector<std::vector<double>> lhs_unit(std::size_t h, std::size_t n,
                                                 Rng& rng) {
  if (h == 0) throw std::invalid_argument("lhs: interval count must be >= 1");
  std::vector<std::vector<double>> pts(h, std::vector<double>(n));
  const double hd = static_cast<double>(h);
  for (std::size_t i = 0; i < n; ++i) {
    const auto perm = rng.permutation(h);
    for (std::size_t j = 0; j < h; ++j) {
      const double k = static_cast<double>(perm[j]);
      double u = (k + rng.uniform()) / hd;
      while (std::floor(u * hd) > k) u = std::nextafter(u, 0.0);
      while (std::floor(u * hd) < k) u = std::nextafter(u, 1.0);
      pts[j][i] = u;
    }
  }
  return pts;
}

/// Continuous sampling interval for one dimension of a region. Discrete
/// dimensions cover [lo, hi + 1) so that flooring hits every code in
/// [lo, hi] with equal probability.
struct SamplingInterval {
  double lo;
  double hi;
};

inline std::vector<SamplingInterval> sampling_intervals(
    const ConfigurationSpace& space, const Region& region) {
  if (region.dimension() != space.dimension())
    throw std::invalid_argument("region dimension does not match space");
  std::vector<SamplingInterval> out;
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    double lo = region.lower[i], hi = region.upper[i];
    if (lo > hi) throw std::invalid_argument("region has lower > upper");
    if (!space[i].is_numeric() && hi > lo) hi += 1.0;
    out.push_back({lo, hi});
  }
  return out;
}

/// Raw LHS coordinates inside `region`, before rounding to typed values.
inline std::vector<std::vector<double>> lhs_points(const ConfigurationSpace& space,
                                                   const Region& region,
                                                   std::size_t h,
                                                   std::uint64_t seed) {
  const auto iv = sampling_intervals(space, region);
  Rng rng(seed);
  auto pts = lhs_unit(h, space.dimension(), rng);
  for (auto& p : pts)
    for (std::size_t i = 0; i < p.size(); ++i)
      p[i] = iv[i].lo + (iv[i].hi - iv[i].lo) * p[i];
  return pts;
}

inline Configuration materialize(const ConfigurationSpace& space,
                                 std::span<const double> point) {
  Configuration c;
  c.values.reserve(point.size());
  for (std::size_t i = 0; i < point.size(); ++i)
    c.values.push_back(materialize_value(space[i], point[i]));
  return c;
}

/// LHS restricted to `region`, materialized into valid configurations.
inline std::vector<Configuration> sample_region(const ConfigurationSpace& space,
                                                const Region& region,
                                                std::size_t h,
                                                std::uint64_t seed) {
  std::vector<Configuration> out;
  for (const auto& p : lhs_points(space, region, h, seed))
    out.push_back(materialize(space, p));
  return out;
}

/// LHS over the whole configuration bound.
inline std::vector<Configuration> lhs(const ConfigurationSpace& space,
                                      std::size_t h, std::uint64_t seed) {
  return sample_region(space, full_region(space), h, seed);
}

/// MBS bounding: on each dimension the region spans from the largest pool
/// value strictly below the incumbent to the smallest pool value strictly
/// above it, falling back to the configuration bound when no such value
/// exists.
inline Region bound_region(const ConfigurationSpace& space,
                           const Configuration& incumbent,
                           std::span<const Configuration> pool) {
  const auto inc = encode(space, incumbent);
  Region r = full_region(space);
  std::vector<std::vector<double>> enc;
  enc.reserve(pool.size());
  for (const auto& c : pool) enc.push_back(encode(space, c));
  for (std::size_t j = 0; j < inc.size(); ++j) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& e : enc) {
      if (e[j] < inc[j]) lo = std::max(lo, e[j]);
      if (e[j] > inc[j]) hi = std::min(hi, e[j]);
    }
    if (std::isfinite(lo)) r.lower[j] = lo;
    if (std::isfinite(hi)) r.upper[j] = hi;
  }
  return r;
}

}  // namespace autotune
