#pragma once

// Testbed planning.
//
// A job's execution time at data scale ds on nm machines is modelled as
//
//   t = [theta0 + theta1 * ds/nm] + [theta2 * ln(nm) + theta3 * nm]
//
// (serial work, parallel work, tree aggregation, all-to-one communication),
// fitted with non-negative least squares. The planner buys (ds, nm)
// samples delta at a time, tracks the model's held-out error as a learning
// curve, extrapolates that curve to the cost-optimal sample count, and
// finally lists every (ds, nm) whose predicted time is the requested
// fraction of the full-scale default-configuration time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autotune/error.hpp"
#include "autotune/eval_metrics.hpp"
#include "autotune/nnls.hpp"
#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"
#include "autotune/target_harness.hpp"

namespace autotune {

struct ScalingSample {
  double ds = 1.0;
  int nm = 1;
  double time = 0.0;
};

/// Feature vector (1, ds/nm, ln nm, nm). nm is taken as a real so that the
/// model can be probed between machine counts.
inline std::array<double, 4> scaling_features(double ds, double nm) {
  if (!(ds > 0.0)) throw std::invalid_argument("features: ds must be > 0");
  if (!(nm >= 1.0)) throw std::invalid_argument("features: nm must be >= 1");
  return {1.0, ds / nm, std::log(nm), nm};
}

struct ScalingModel {
  std::array<double, 4> theta{};
  double residual = 0.0;  // ||X theta - t||_2 on the training samples
  double kkt = 0.0;       // relative KKT residual of the fit
  std::size_t n = 0;

  double predict(double ds, double nm) const {
    const auto f = scaling_features(ds, nm);
    return theta[0] * f[0] + theta[1] * f[1] + theta[2] * f[2] + theta[3] * f[3];
  }

  /// Mean absolute percentage error on `samples`, as a fraction.
  double mape(std::span<const ScalingSample> samples) const {
    if (samples.empty()) throw std::invalid_argument("mape: no samples");
    double s = 0.0;
    for (const auto& x : samples) s += std::abs(predict(x.ds, x.nm) - x.time) / x.time;
    return s / static_cast<double>(samples.size());
  }
};

inline ScalingModel nnls_fit(std::span<const ScalingSample> samples) {
  std::set<int> nms;
  std::set<double> dss;
  for (const auto& s : samples) {
    if (!(s.time > 0.0) || !(s.ds > 0.0 && s.ds <= 1.0) || s.nm < 1)
      throw FitError("invalid scaling sample");
    nms.insert(s.nm);
    dss.insert(s.ds);
  }
  if (samples.size() < 4 || nms.size() < 2 || dss.size() < 2)
    throw FitError("scaling fit needs >= 4 samples spanning >= 2 machine counts and >= 2 "
                   "data scales (have " + std::to_string(samples.size()) + " samples, " +
                   std::to_string(nms.size()) + " machine counts, " +
                   std::to_string(dss.size()) + " data scales)");
  const auto m = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(m, 4);
  Eigen::VectorXd t(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto f = scaling_features(s.ds, s.nm);
    for (Eigen::Index k = 0; k < 4; ++k) x(i, k) = f[static_cast<std::size_t>(k)];
    t(i) = s.time;
  }
  const auto r = nnls(x, t);
  ScalingModel model;
  for (Eigen::Index k = 0; k < 4; ++k) model.theta[static_cast<std::size_t>(k)] = r.x(k);
  model.residual = r.residual_norm;
  model.kkt = kkt_residual(x, t, r.x);
  model.n = samples.size();
  return model;
}

// ---------------------------------------------------------------------------
// Learning curves

struct LearningCurvePoint {
  double n = 0.0;
  double error = 0.0;
};

enum class CurveKind { PowerLaw, Logarithmic, Exponential, WeissTian };

inline constexpr std::array<CurveKind, 4> kAllCurveKinds = {
    CurveKind::PowerLaw, CurveKind::Logarithmic, CurveKind::Exponential, CurveKind::WeissTian};

inline const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::PowerLaw: return "power-law";
    case CurveKind::Logarithmic: return "logarithmic";
    case CurveKind::Exponential: return "exponential";
    case CurveKind::WeissTian: return "weiss-tian";
  }
  return "?";
}

/// Fitted learning curve. Forms, all with a, b >= 0:
///   power-law    e(n) = a * n^-b + c
///   logarithmic  e(n) = a - b * ln n
///   exponential  e(n) = a * exp(-b n) + c
///   weiss-tian   e(n) = a / (b + n) + c
struct CurveFit {
  CurveKind kind = CurveKind::PowerLaw;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double sse = 0.0;
  double correlation = 0.0;

  /// Projected error rate, floored at zero.
  double operator()(double n) const {
    double e = 0.0;
    switch (kind) {
      case CurveKind::PowerLaw: e = a * std::pow(n, -b) + c; break;
      case CurveKind::Logarithmic: e = a - b * std::log(n); break;
      case CurveKind::Exponential: e = a * std::exp(-b * n) + c; break;
      case CurveKind::WeissTian: e = a / (b + n) + c; break;
    }
    return std::max(0.0, e);
  }
};

namespace detail {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double sse = 0.0;
};

/// y ~ intercept + slope * phi with slope >= 0.
inline LinearFit fit_nonneg_slope(std::span<const double> phi, std::span<const double> y) {
  const double n = static_cast<double>(y.size());
  double mp = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mp += phi[i];
    my += y[i];
  }
  mp /= n;
  my /= n;
  double spy = 0.0, spp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    spy += (phi[i] - mp) * (y[i] - my);
    spp += (phi[i] - mp) * (phi[i] - mp);
  }
  LinearFit f;
  f.slope = spp > 0.0 ? std::max(0.0, spy / spp) : 0.0;
  f.intercept = my - f.slope * mp;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * phi[i];
    f.sse += r * r;
  }
  return f;
}

/// Fits y ~ c + a * shape(n, b) by profiling b: log-spaced grid over
/// [b_lo, b_hi] followed by golden-section refinement of the best bracket.
inline CurveFit profile_fit(CurveKind kind, std::span<const double> n,
                            std::span<const double> y,
                            const std::function<double(double, double)>& shape, double b_lo,
                            double b_hi) {
  std::vector<double> phi(n.size());
  auto eval = [&](double b) {
    for (std::size_t i = 0; i < n.size(); ++i) phi[i] = shape(n[i], b);
    return fit_nonneg_slope(phi, y);
  };
  constexpr int kGrid = 400;
  const double l0 = std::log(b_lo), l1 = std::log(b_hi);
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= kGrid; ++g) {
    const double sse = eval(std::exp(l0 + (l1 - l0) * g / kGrid)).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best = g;
    }
  }
  double lo = l0 + (l1 - l0) * std::max(0, best - 1) / kGrid;
  double hi = l0 + (l1 - l0) * std::min(kGrid, best + 1) / kGrid;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = eval(std::exp(x1)).sse, f2 = eval(std::exp(x2)).sse;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = eval(std::exp(x1)).sse;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = eval(std::exp(x2)).sse;
    }
  }
  double b = std::exp(0.5 * (lo + hi));
  auto lf = eval(b);
  if (lf.sse > best_sse) {
    b = std::exp(l0 + (l1 - l0) * best / kGrid);
    lf = eval(b);
  }
  CurveFit cf;
  cf.kind = kind;
  cf.b = b;
  cf.a = lf.slope;
  cf.c = lf.intercept;
  cf.sse = lf.sse;
  return cf;
}

}  // namespace detail

/// Correlation used to rank curve families: Pearson correlation between the
/// coordinates in which each family is a straight line,
///   power-law   (ln n, ln e)      logarithmic (ln n, e)
///   exponential (n, ln e)         weiss-tian  (n / (n + 1), e)
/// A well-behaved decreasing curve gives a value near -1 for the family
/// that describes it best.
inline double curve_correlation(CurveKind kind, std::span<const LearningCurvePoint> pts) {
  std::vector<double> x, y;
  constexpr double kFloor = 1e-12;
  for (const auto& p : pts) {
    const double e = std::max(p.error, kFloor);
    switch (kind) {
      case CurveKind::PowerLaw: x.push_back(std::log(p.n)); y.push_back(std::log(e)); break;
      case CurveKind::Logarithmic: x.push_back(std::log(p.n)); y.push_back(p.error); break;
      case CurveKind::Exponential: x.push_back(p.n); y.push_back(std::log(e)); break;
      case CurveKind::WeissTian: x.push_back(p.n / (p.n + 1.0)); y.push_back(p.error); break;
    }
  }
  return pearson(x, y);
}

inline CurveFit fit_curve(std::span<const LearningCurvePoint> pts, CurveKind kind) {
  if (pts.size() < 3) throw FitError("curve fit needs at least 3 points");
  std::vector<double> n, y;
  for (const auto& p : pts) {
    if (!(p.n > 0.0)) throw FitError("curve points need n > 0");
    n.push_back(p.n);
    y.push_back(p.error);
  }
  const bool constant =
      std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
  if (constant) {
    CurveFit cf;
    cf.kind = kind;
    cf.c = y.front();
    if (kind == CurveKind::Logarithmic) cf.a = y.front(), cf.c = 0.0;
    return cf;
  }
  const double nmax = *std::max_element(n.begin(), n.end());
  CurveFit cf;
  switch (kind) {
    case CurveKind::PowerLaw:
      cf = detail::profile_fit(kind, n, y, [](double x, double b) { return std::pow(x, -b); },
                               1e-4, 8.0);
      break;
    case CurveKind::Exponential:
      cf = detail::profile_fit(kind, n, y, [](double x, double b) { return std::exp(-b * x); },
                               1e-4 / nmax, 50.0 / nmax);
      break;
    case CurveKind::WeissTian:
      cf = detail::profile_fit(kind, n, y, [](double x, double b) { return 1.0 / (b + x); },
                               1e-6, 1e3 * nmax);
      break;
    case CurveKind::Logarithmic: {
      std::vector<double> phi;
      for (double x : n) phi.push_back(-std::log(x));
      const auto lf = detail::fit_nonneg_slope(phi, y);
      cf.kind = kind;
      cf.a = lf.intercept;
      cf.b = lf.slope;
      cf.sse = lf.sse;
      break;
    }
  }
  cf.correlation = curve_correlation(kind, pts);
  return cf;
}

struct FamilySelection {
  CurveFit best;
  double best_corr = 0.0;
  std::array<CurveFit, 4> fits;
};

/// Fits every family and keeps the one with the most negative correlation.
/// Callers keep sampling while best_corr >= 0.
inline FamilySelection select_family(std::span<const LearningCurvePoint> pts) {
  FamilySelection s;
  for (std::size_t i = 0; i < kAllCurveKinds.size(); ++i)
    s.fits[i] = fit_curve(pts, kAllCurveKinds[i]);
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.fits.size(); ++i)
    if (s.fits[i].correlation < s.fits[best].correlation) best = i;
  s.best = s.fits[best];
  s.best_corr = s.best.correlation;
  return s;
}

/// argmin over integer n in [1, n_max] of 2n + e(n) * settings * weight.
/// The first minimum wins.
inline std::size_t optimal_n(const CurveFit& curve, double settings, double weight,
                             std::size_t n_max) {
  if (n_max < 1) throw std::invalid_argument("optimal_n: n_max must be >= 1");
  std::size_t best = 1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double c = total_cost(static_cast<double>(n), curve(static_cast<double>(n)), settings,
                                weight);
    if (c < best_cost) {
      best_cost = c;
      best = n;
    }
  }
  return best;
}

/// Geometric progressive-sampling schedule n_i = n0 * a^i, capped at n_max.
inline std::vector<std::size_t> geometric_schedule(std::size_t n0, double a, std::size_t n_max) {
  if (n0 < 1 || !(a > 1.0)) throw std::invalid_argument("geometric_schedule: need n0>=1, a>1");
  std::vector<std::size_t> s;
  double n = static_cast<double>(n0);
  while (static_cast<std::size_t>(n) <= n_max) {
    const auto v = static_cast<std::size_t>(n);
    if (s.empty() || v != s.back()) s.push_back(v);
    n *= a;
  }
  return s;
}

struct ProgressiveResult {
  std::size_t n_star = 0;
  double error = 0.0;
  double cost = 0.0;
  std::vector<LearningCurvePoint> curve;
};

/// Progressive-sampling baseline: evaluates error_at(n) along the geometric
/// schedule and stops at the first schedule step whose total cost does not
/// improve on the previous one. Returns the cheapest point seen.
inline ProgressiveResult progressive_sampling(const std::function<double(std::size_t)>& error_at,
                                              double settings, double weight,
                                              std::size_t n_max, std::size_t n0 = 5,
                                              double a = 2.0) {
  ProgressiveResult r;
  r.cost = std::numeric_limits<double>::infinity();
  for (auto n : geometric_schedule(n0, a, n_max)) {
    const double e = error_at(n);
    r.curve.push_back({static_cast<double>(n), e});
    const double c = total_cost(static_cast<double>(n), e, settings, weight);
    if (c < r.cost) {
      r.cost = c;
      r.n_star = n;
      r.error = e;
    } else {
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Planner

struct TestbedSetting {
  double ds = 1.0;
  int nm = 1;
  double predicted_ms = 0.0;
  double relative_gap = 0.0;  // |predicted / (t0 * f) - 1|
};

struct PlanOptions {
  double tc_ms = 0.0;
  double scale_factor = 1.0 / 16.0;
  int production_nm = 1;
  int rc_max_nm = std::numeric_limits<int>::max();
  double rc_max_ds = 1.0;
  std::size_t delta = 5;
  double tolerance = 0.2;
  double cost_weight = 1.0;  // R in the total-cost model
  std::vector<double> ds_ladder = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  std::uint64_t seed = 0;
};

struct PlanSample {
  ScalingSample sample;
  bool training = true;
  std::uint64_t seed = 0;
};

struct TestbedPlan {
  std::vector<TestbedSetting> settings;  // ranked by |predicted - t0 f|
  std::optional<TestbedSetting> recommended;
  std::optional<ScalingModel> model;
  std::optional<FamilySelection> family;
  std::vector<LearningCurvePoint> curve;
  std::vector<PlanSample> samples;
  std::size_t n = 0;       // training-set size reached
  std::size_t n_star = 0;  // projected optimal training-set size
  double t0_ms = 0.0;
  bool t0_measured = false;
  double spent_ms = 0.0;
  bool budget_exhausted = false;
  std::vector<std::string> diagnostics;

  bool empty() const { return settings.empty(); }
};

/// Candidate (ds, nm) grid: the ds ladder crossed with 1..production_nm.
inline std::vector<std::pair<double, int>> candidate_grid(const PlanOptions& opt) {
  std::vector<std::pair<double, int>> g;
  for (double ds : opt.ds_ladder)
    for (int nm = 1; nm <= opt.production_nm; ++nm) g.emplace_back(ds, nm);
  return g;
}

/// Algorithm: buy delta training and delta test samples per round, refit,
/// append (n, held-out error) to the learning curve and re-select the curve
/// family; repeat while the budget allows and the best correlation is not
/// yet negative. Then top up to the projected optimal n, measure the
/// default configuration at full scale, and return every grid setting whose
/// predicted time is within `tolerance` of t0 * f and inside the resource
/// constraint. Every execution is charged against tc_ms.
inline TestbedPlan plan_testbeds(const TargetSystem& target, const ConfigurationSpace& space,
                                 const PlanOptions& opt) {
  if (!(opt.scale_factor > 0.0 && opt.scale_factor <= 1.0))
    throw std::invalid_argument("scale factor must be in (0, 1]");
  if (opt.delta < 1) throw std::invalid_argument("delta must be >= 1");
  if (opt.production_nm < 1) throw std::invalid_argument("production_nm must be >= 1");
  if (opt.ds_ladder.empty()) throw std::invalid_argument("empty ds ladder");
  for (double ds : opt.ds_ladder)
    if (!(ds > 0.0 && ds <= 1.0)) throw std::invalid_argument("ds ladder values must be in (0, 1]");

  TestbedPlan plan;
  const Configuration c0 = default_configuration(space);
  const auto grid = candidate_grid(opt);
  const std::size_t n_max = grid.size();

  Rng draw(derive_seed(opt.seed, {1}));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::uint64_t run_counter = 0;

  auto next_setting = [&]() {
    if (cursor == order.size()) {
      order = draw.permutation(grid.size());
      cursor = 0;
    }
    return grid[order[cursor++]];
  };
  auto run = [&](double ds, int nm) -> std::optional<double> {
    if (plan.spent_ms >= opt.tc_ms) {
      plan.budget_exhausted = true;
      return std::nullopt;
    }
    const auto s = derive_seed(opt.seed, {2, run_counter++});
    const double t = target.execute(c0, ds, nm, s);
    plan.spent_ms += t;
    return t;
  };
  std::vector<ScalingSample> train, test;
  auto acquire = [&]() {
    std::size_t got = 0;
    for (std::size_t k = 0; k < 2 * opt.delta; ++k) {
      const auto [ds, nm] = next_setting();
      const auto t = run(ds, nm);
      if (!t) break;
      const bool is_train = k < opt.delta;
      const ScalingSample s{ds, nm, *t};
      (is_train ? train : test).push_back(s);
      plan.samples.push_back({s, is_train, derive_seed(opt.seed, {2, run_counter - 1})});
      ++got;
    }
    return got == 2 * opt.delta;
  };
  auto add_curve_point = [&]() {
    if (test.empty()) return;
    try {
      const auto m = nnls_fit(train);
      plan.curve.push_back({static_cast<double>(train.size()), m.mape(test)});
    } catch (const FitError&) {
      // Not enough diversity yet; this round contributes no curve point.
    }
  };

  double best_corr = std::numeric_limits<double>::infinity();
  bool complete = true;
  do {
    complete = acquire();
    add_curve_point();
    if (plan.curve.size() >= 3) {
      plan.family = select_family(plan.curve);
      best_corr = plan.family->best_corr;
    }
  } while (complete && best_corr >= 0.0 && train.size() < n_max);

  plan.n_star = train.size();
  if (plan.family) {
    plan.n_star = optimal_n(plan.family->best, static_cast<double>(grid.size()),
                            opt.cost_weight, std::max(n_max, train.size()));
    while (complete && train.size() < plan.n_star) {
      complete = acquire();
      add_curve_point();
    }
  } else {
    plan.diagnostics.push_back("learning curve has fewer than 3 points; no family selected");
  }
  plan.n = train.size();

  try {
    plan.model = nnls_fit(train);
  } catch (const FitError& e) {
    try {
      std::vector<ScalingSample> all = train;
      all.insert(all.end(), test.begin(), test.end());
      plan.model = nnls_fit(all);
      plan.diagnostics.push_back("model fitted on training and test samples combined");
    } catch (const FitError&) {
      plan.diagnostics.push_back(std::string("no scaling model: ") + e.what());
      if (plan.budget_exhausted) plan.diagnostics.push_back("time constraint exhausted");
      return plan;
    }
  }

  if (auto t0 = run(1.0, opt.production_nm)) {
    plan.t0_ms = *t0;
    plan.t0_measured = true;
  } else {
    plan.t0_ms = plan.model->predict(1.0, opt.production_nm);
    plan.diagnostics.push_back("no budget left for the full-scale default run; t0 predicted");
  }

  const double target_ms = plan.t0_ms * opt.scale_factor;
  for (const auto& [ds, nm] : grid) {
    if (nm > opt.rc_max_nm || ds > opt.rc_max_ds) continue;
    const double pred = plan.model->predict(ds, nm);
    const double gap = std::abs(pred / target_ms - 1.0);
    if (gap <= opt.tolerance) plan.settings.push_back({ds, nm, pred, gap});
  }
  std::stable_sort(plan.settings.begin(), plan.settings.end(),
                   [](const TestbedSetting& a, const TestbedSetting& b) {
                     return a.relative_gap < b.relative_gap;
                   });
  for (const auto& s : plan.settings) {
    if (!plan.recommended || s.nm > plan.recommended->nm ||
        (s.nm == plan.recommended->nm && s.ds < plan.recommended->ds))
      plan.recommended = s;
  }
  if (plan.settings.empty())
    plan.diagnostics.push_back("no grid setting within tolerance of t0 * f");
  return plan;
}

}  // namespace autotune
