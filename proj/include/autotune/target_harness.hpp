#pragma once

// Target systems: the black box that answers "run configuration C at data
// scale ds on nm machines and report the execution time".
//
// Two backends ship: a synthetic simulator with a known optimum and a known
// scaling law, and a replay backend that serves times from a recorded log.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "autotune/error.hpp"
#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"
#include "autotune/trial_log.hpp"

namespace autotune {

/// The program/dataset pair being tuned.
struct WorkloadSpec {
  std::string program;
  double dataset_gb = 1.0;
};

/// Per-machine resources plus cluster size.
struct EnvironmentSpec {
  int cores = 4;
  double cpu_ghz = 2.5;
  double memory_gb = 32.0;
  double disk_gb = 250.0;
  double network_gbps = 1.5;
  int machines = 5;
};

class TargetSystem {
 public:
  virtual ~TargetSystem() = default;

  /// Execution time in ms. Must be thread-safe and a pure function of its
  /// arguments.
  virtual double execute(const Configuration& config, double ds, int nm,
                         std::uint64_t seed) const = 0;

  /// True when repeated executions of the same input return the same time.
  virtual bool deterministic() const = 0;

  virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic surface

struct QuadraticTerm {
  std::size_t param = 0;
  double optimum = 0.0;  // in the parameter's own units
  double weight = 0.0;
};

struct InteractionTerm {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

struct CategoricalTerm {
  std::size_t param = 0;
  std::vector<double> offsets;  // one per category, in declaration order
};

/// offset + (u - u*)' Q (u - u*) + sum of categorical offsets, where u is
/// the configuration rescaled to [0, 1] per numeric parameter.
struct BaseSurface {
  double offset = 1.0;
  std::vector<QuadraticTerm> quadratic;
  std::vector<InteractionTerm> interactions;
  std::vector<CategoricalTerm> categorical;

  double value(const ConfigurationSpace& space, std::span<const double> enc) const {
    auto unit = [&](std::size_t i, double x) {
      const auto& p = space[i];
      return (x - p.lower) / (p.upper - p.lower);
    };
    double v = offset;
    std::vector<double> delta(enc.size(), 0.0);
    for (const auto& t : quadratic) {
      const double d = unit(t.param, enc[t.param]) - unit(t.param, t.optimum);
      delta[t.param] = d;
      v += t.weight * d * d;
    }
    for (const auto& t : interactions) v += t.weight * delta[t.a] * delta[t.b];
    for (const auto& t : categorical)
      v += t.offsets[static_cast<std::size_t>(enc[t.param])];
    return v;
  }

  /// Minimizer of this surface; parameters without a term keep the default.
  Configuration optimum(const ConfigurationSpace& space) const {
    Configuration c = default_configuration(space);
    for (const auto& t : quadratic) c[t.param] = decode_value(space[t.param], t.optimum);
    for (const auto& t : categorical) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < t.offsets.size(); ++k)
        if (t.offsets[k] < t.offsets[best]) best = k;
      c[t.param] = decode_value(space[t.param], static_cast<double>(best));
    }
    return c;
  }

  double minimum() const {
    double v = offset;
    for (const auto& t : categorical) v += *std::min_element(t.offsets.begin(), t.offsets.end());
    return v;
  }

  void check(const ConfigurationSpace& space) const {
    std::map<std::size_t, std::size_t> slot;
    for (const auto& t : quadratic) {
      const auto& p = space[t.param];
      if (!p.is_numeric()) throw SpaceError("quadratic term on non-numeric '" + p.name + "'");
      if (t.weight < 0.0) throw SpaceError("negative weight on '" + p.name + "'");
      if (t.optimum < p.lower || t.optimum > p.upper)
        throw SpaceError("optimum of '" + p.name + "' outside its bounds");
      if (p.kind == ParamKind::Integer && t.optimum != std::floor(t.optimum))
        throw SpaceError("optimum of integer '" + p.name + "' must be integral");
      if (!slot.emplace(t.param, slot.size()).second)
        throw SpaceError("duplicate quadratic term on '" + p.name + "'");
    }
    // The optimum is analytic only if the quadratic form is PSD.
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(slot.size()),
                                              static_cast<Eigen::Index>(slot.size()));
    for (const auto& t : quadratic) {
      const auto i = static_cast<Eigen::Index>(slot.at(t.param));
      q(i, i) += t.weight;
    }
    for (const auto& t : interactions) {
      if (!slot.contains(t.a) || !slot.contains(t.b) || t.a == t.b)
        throw SpaceError("interaction must join two distinct quadratic terms");
      const auto i = static_cast<Eigen::Index>(slot.at(t.a));
      const auto j = static_cast<Eigen::Index>(slot.at(t.b));
      q(i, j) += 0.5 * t.weight;
      q(j, i) += 0.5 * t.weight;
    }
    if (q.size() > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
      if (eig.eigenvalues().minCoeff() < -1e-12)
        throw SpaceError("quadratic form is not positive semidefinite");
    }
    for (const auto& t : categorical) {
      const auto& p = space[t.param];
      if (p.is_numeric()) throw SpaceError("categorical term on numeric '" + p.name + "'");
      if (t.offsets.size() != p.cardinality())
        throw SpaceError("offset count mismatch on '" + p.name + "'");
    }
    if (!(minimum() > 0.0)) throw SpaceError("surface minimum must be positive");
  }
};

/// time(C, ds, nm) = law(ds, nm) * blend(C, ds, nm) * lognormal noise, with
/// law = t0 + t1 * ds/nm + t2 * ln nm + t3 * nm and blend mixing the base
/// surface with a decoy surface. The decoy weight is
/// (1 - fidelity) * min(1, log2(1/ds)/5 + |nm - production_nm|/production_nm),
/// so it vanishes at full scale and grows as the testbed shrinks.
struct SyntheticSurface {
  std::array<double, 4> theta{0.0, 1.0, 0.0, 0.0};
  int production_nm = 1;
  double fidelity = 1.0;
  double noise_sigma = 0.0;
  BaseSurface base;
  BaseSurface decoy;

  double law(double ds, int nm) const {
    const double m = static_cast<double>(nm);
    return theta[0] + theta[1] * ds / m + theta[2] * std::log(m) + theta[3] * m;
  }

  double decoy_weight(double ds, int nm) const {
    const double ds_term = std::clamp(std::log2(1.0 / ds) / 5.0, 0.0, 1.0);
    const double nm_term =
        std::abs(static_cast<double>(nm - production_nm)) / static_cast<double>(production_nm);
    return (1.0 - fidelity) * std::min(1.0, ds_term + nm_term);
  }

  double noiseless(const ConfigurationSpace& space, const Configuration& c, double ds,
                   int nm) const {
    const auto enc = encode(space, c);
    const double w = decoy_weight(ds, nm);
    double b = base.value(space, enc);
    if (w > 0.0) b = (1.0 - w) * b + w * decoy.value(space, enc);
    return law(ds, nm) * b;
  }

  Configuration optimum(const ConfigurationSpace& space) const { return base.optimum(space); }

  void check(const ConfigurationSpace& space) const {
    for (double t : theta)
      if (t < 0.0) throw SpaceError("scaling coefficients must be non-negative");
    if (theta[0] + theta[1] + theta[2] + theta[3] <= 0.0)
      throw SpaceError("scaling law is identically zero");
    if (production_nm < 1) throw SpaceError("production_nm must be >= 1");
    if (fidelity < 0.0 || fidelity > 1.0) throw SpaceError("fidelity must be in [0, 1]");
    if (noise_sigma < 0.0) throw SpaceError("noise_sigma must be >= 0");
    base.check(space);
    decoy.check(space);
  }
};

/// A decoy with the same weights as `base` but a random optimum and shuffled
/// categorical offsets.
inline BaseSurface make_decoy(const ConfigurationSpace& space, const BaseSurface& base,
                              std::uint64_t seed) {
  Rng rng(seed);
  BaseSurface d = base;
  for (auto& t : d.quadratic) {
    const auto& p = space[t.param];
    const double x = rng.uniform(p.lower, p.upper);
    t.optimum = p.kind == ParamKind::Integer ? static_cast<double>(round_half_away(x)) : x;
  }
  for (auto& t : d.categorical) rng.shuffle(t.offsets);
  return d;
}

inline BaseSurface base_from_json(const ConfigurationSpace& space, const nlohmann::json& j) {
  auto index = [&](const std::string& name) {
    auto i = space.index_of(name);
    if (!i) throw SpaceError("surface references unknown parameter '" + name + "'");
    return *i;
  };
  BaseSurface b;
  b.offset = j.value("offset", 1.0);
  for (const auto& t : j.value("quadratic", nlohmann::json::array()))
    b.quadratic.push_back({index(t.at("param")), t.at("optimum").get<double>(),
                           t.at("weight").get<double>()});
  for (const auto& t : j.value("interactions", nlohmann::json::array()))
    b.interactions.push_back({index(t.at("a")), index(t.at("b")), t.at("weight").get<double>()});
  for (const auto& t : j.value("categorical", nlohmann::json::array())) {
    const auto i = index(t.at("param"));
    CategoricalTerm ct{i, std::vector<double>(space[i].cardinality(), 0.0)};
    for (const auto& [label, off] : t.at("offsets").items()) {
      auto k = space[i].category_index(label);
      if (!k) throw SpaceError("unknown category '" + label + "' for '" + space[i].name + "'");
      ct.offsets[*k] = off.get<double>();
    }
    b.categorical.push_back(std::move(ct));
  }
  return b;
}

inline nlohmann::json base_to_json(const ConfigurationSpace& space, const BaseSurface& b) {
  nlohmann::json j;
  j["offset"] = b.offset;
  j["quadratic"] = nlohmann::json::array();
  for (const auto& t : b.quadratic)
    j["quadratic"].push_back(
        {{"param", space[t.param].name}, {"optimum", t.optimum}, {"weight", t.weight}});
  j["interactions"] = nlohmann::json::array();
  for (const auto& t : b.interactions)
    j["interactions"].push_back(
        {{"a", space[t.a].name}, {"b", space[t.b].name}, {"weight", t.weight}});
  j["categorical"] = nlohmann::json::array();
  for (const auto& t : b.categorical) {
    nlohmann::json off = nlohmann::json::object();
    for (std::size_t k = 0; k < t.offsets.size(); ++k)
      off[space[t.param].categories[k]] = t.offsets[k];
    j["categorical"].push_back({{"param", space[t.param].name}, {"offsets", off}});
  }
  return j;
}

/// Surface definition file:
///   {"production_nm": 5, "scaling_theta": [t0, t1, t2, t3],
///    "fidelity": 0.8, "noise_sigma": 0.02,
///    "base": {"offset": .., "quadratic": [{"param", "optimum", "weight"}],
///             "interactions": [{"a", "b", "weight"}],
///             "categorical": [{"param", "offsets": {label: value}}]},
///    "decoy": <same shape as base> | {"seed": N}}
inline SyntheticSurface surface_from_json(const ConfigurationSpace& space,
                                          const nlohmann::json& j) {
  try {
    SyntheticSurface s;
    const auto th = j.at("scaling_theta").get<std::vector<double>>();
    if (th.size() != 4) throw SpaceError("scaling_theta needs 4 coefficients");
    std::copy(th.begin(), th.end(), s.theta.begin());
    s.production_nm = j.at("production_nm").get<int>();
    s.fidelity = j.value("fidelity", 1.0);
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.base = base_from_json(space, j.at("base"));
    if (!j.contains("decoy")) {
      s.decoy = make_decoy(space, s.base, 0);
    } else if (j["decoy"].contains("seed")) {
      s.decoy = make_decoy(space, s.base, j["decoy"]["seed"].get<std::uint64_t>());
    } else {
      s.decoy = base_from_json(space, j["decoy"]);
    }
    s.check(space);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SpaceError(std::string("surface definition: ") + e.what());
  }
}

inline nlohmann::json surface_to_json(const ConfigurationSpace& space,
                                      const SyntheticSurface& s) {
  nlohmann::json j;
  j["production_nm"] = s.production_nm;
  j["scaling_theta"] = s.theta;
  j["fidelity"] = s.fidelity;
  j["noise_sigma"] = s.noise_sigma;
  j["base"] = base_to_json(space, s.base);
  j["decoy"] = base_to_json(space, s.decoy);
  return j;
}

inline SyntheticSurface load_surface(const std::string& path, const ConfigurationSpace& space) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot open surface file '" + path + "'");
  try {
    return surface_from_json(space, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw SpaceError("surface file '" + path + "': " + e.what());
  }
}

class SimulatorTarget final : public TargetSystem {
 public:
  SimulatorTarget(ConfigurationSpace space, SyntheticSurface surface)
      : space_(std::move(space)), surface_(std::move(surface)) {
    surface_.check(space_);
  }

  double execute(const Configuration& config, double ds, int nm,
                 std::uint64_t seed) const override {
    if (!(ds > 0.0 && ds <= 1.0)) throw std::invalid_argument("ds must be in (0, 1]");
    if (nm < 1) throw std::invalid_argument("nm must be >= 1");
    if (!validate(space_, config).ok())
      throw SpaceError("simulator: configuration outside the space");
    double t = surface_.noiseless(space_, config, ds, nm);
    if (surface_.noise_sigma > 0.0) {
      Rng rng(seed);
      t *= std::exp(surface_.noise_sigma * rng.normal());
    }
    return t;
  }

  bool deterministic() const override { return surface_.noise_sigma == 0.0; }

  std::string describe() const override { return "simulator(" + space_.name() + ")"; }

  const SyntheticSurface& surface() const { return surface_; }
  const ConfigurationSpace& space() const { return space_; }

  double noiseless(const Configuration& c, double ds, int nm) const {
    return surface_.noiseless(space_, c, ds, nm);
  }

 private:
  ConfigurationSpace space_;
  SyntheticSurface surface_;
};

/// Serves execution times recorded in a trial log. A lookup matches the
/// configuration, ds and nm exactly; among matches the record with the same
/// seed wins, otherwise the earliest.
class ReplayTarget final : public TargetSystem {
 public:
  explicit ReplayTarget(const TrialLog& log) {
    for (const auto& r : log.records) {
      if (r.reused) continue;
      entries_[key(r.config, r.ds, r.nm)].push_back({r.seed, r.time_ms});
    }
  }

  double execute(const Configuration& config, double ds, int nm,
                 std::uint64_t seed) const override {
    auto it = entries_.find(key(config, ds, nm));
    if (it == entries_.end())
      throw ReplayMiss("no recorded sample for configuration at ds=" + std::to_string(ds) +
                       ", nm=" + std::to_string(nm));
    for (const auto& e : it->second)
      if (e.seed == seed) return e.time;
    return it->second.front().time;
  }

  bool deterministic() const override { return true; }

  std::string describe() const override { return "replay"; }

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::uint64_t seed;
    double time;
  };

  static std::string key(const Configuration& c, double ds, int nm) {
    std::string k = config_to_json(c).dump();
    k += '|';
    k += nlohmann::json(ds).dump();
    k += '|';
    k += std::to_string(nm);
    return k;
  }

  std::map<std::string, std::vector<Entry>> entries_;
};

struct RepeatStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  std::vector<double> times;
};

inline RepeatStats repeat_and_average(const TargetSystem& target, const Configuration& config,
                                      double ds, int nm, std::size_t reps,
                                      std::uint64_t seed) {
  if (reps == 0) throw std::invalid_argument("repeat_and_average: reps must be >= 1");
  RepeatStats s;
  for (std::size_t r = 0; r < reps; ++r) {
    // Repetition 0 uses the caller's seed so that reps=1 equals execute().
    const std::uint64_t rs = r == 0 ? seed : derive_seed(seed, {r});
    s.times.push_back(target.execute(config, ds, nm, rs));
  }
  for (double t : s.times) s.mean += t;
  s.mean /= static_cast<double>(reps);
  if (reps > 1) {
    double ss = 0.0;
    for (double t : s.times) ss += (t - s.mean) * (t - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(reps - 1));
  }
  return s;
}

}  // namespace autotune
