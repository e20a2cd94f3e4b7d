#pragma once

// The tuner: LHS initialization on the testbed, iterated exploration plus
// surrogate-guided bound-and-search exploitation, and final validation of
// the best candidates on the production system, all charged against one
// time constraint. Random search and recursive bound-and-search baselines
// run through the same execution and accounting machinery.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "autotune/doe_sampling.hpp"
#include "autotune/error.hpp"
#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"
#include "autotune/surrogate_rf.hpp"
#include "autotune/target_harness.hpp"
#include "autotune/trial_log.hpp"

namespace autotune {

// ---------------------------------------------------------------------------
// Budget

struct TuningBudget {
  double tc_ms = 0.0;
  double alpha = 0.3;
  double beta = 0.2;
  double gamma = 0.5;
  double t_tb_ms = 0.0;
  double t_ps_ms = 0.0;
  std::size_t iter = 5;
  std::size_t h = 1;  // initial LHS size, also the candidate count per LHS draw
  std::size_t b = 1;  // incumbent-set size and explore runs per iteration
  std::size_t q = 1;  // production validations
  std::vector<std::string> diagnostics;
};

/// h = floor(alpha TC / t_TB), q = floor(beta TC / t_PS),
/// b = floor(gamma TC / (iter t_TB)); each clamped to >= 1, then b <= h.
inline TuningBudget derive_budget(double tc_ms, double alpha, double beta, double gamma,
                                  double t_tb_ms, double t_ps_ms, std::size_t iter) {
  if (!(tc_ms > 0.0) || !(t_tb_ms > 0.0) || !(t_ps_ms > 0.0) || iter == 0)
    throw std::invalid_argument("derive_budget: TC, t_TB, t_PS and iter must be positive");
  for (double f : {alpha, beta, gamma})
    if (!(f >= 0.0 && f <= 1.0))
      throw std::invalid_argument("derive_budget: fractions must lie in [0, 1]");
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-9)
    throw std::invalid_argument("derive_budget: alpha + beta + gamma must equal 1");

  TuningBudget bu;
  bu.tc_ms = tc_ms;
  bu.alpha = alpha;
  bu.beta = beta;
  bu.gamma = gamma;
  bu.t_tb_ms = t_tb_ms;
  bu.t_ps_ms = t_ps_ms;
  bu.iter = iter;
  auto floor_count = [](double x) {
    return x < 1.0 ? std::size_t{0} : static_cast<std::size_t>(std::floor(x + 1e-9));
  };
  const std::size_t h = floor_count(alpha * tc_ms / t_tb_ms);
  const std::size_t q = floor_count(beta * tc_ms / t_ps_ms);
  const std::size_t b =
      floor_count(gamma * tc_ms / (static_cast<double>(iter) * t_tb_ms));
  bu.h = std::max<std::size_t>(1, h);
  bu.q = std::max<std::size_t>(1, q);
  bu.b = std::max<std::size_t>(1, b);
  if (h == 0) bu.diagnostics.push_back("h clamped to 1: no initialization budget");
  if (q == 0) bu.diagnostics.push_back("q clamped to 1: no validation budget");
  if (b == 0) bu.diagnostics.push_back("b clamped to 1: no E&E budget");
  if (bu.b > bu.h) {
    bu.b = bu.h;
    bu.diagnostics.push_back("b reduced to h");
  }
  return bu;
}

// ---------------------------------------------------------------------------
// Execution

struct Platform {
  const TargetSystem* target = nullptr;
  double ds = 1.0;
  int nm = 1;
};

struct SessionOptions {
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  std::vector<TrialRecord> resume;
  std::function<void(const TrialRecord&)> on_record;
};

/// Executes batches of configurations on a platform, appends one record
/// per execution, and charges the reported times. On deterministic targets
/// a configuration already measured on the same platform is not re-run:
/// the logged time is reused and charged zero. With parallel > 1, runs are
/// computed concurrently but committed in submission order, so the log is
/// independent of the dispatch width.
class TrialSession {
 public:
  TrialSession(const ConfigurationSpace& space, Platform testbed, Platform production,
               SessionOptions opt)
      : space_(space), opt_(std::move(opt)) {
    platforms_[0] = testbed;
    platforms_[1] = production;
    for (const auto& p : platforms_)
      if (p.target == nullptr) throw std::invalid_argument("platform without a target");
    log_.header.space = space.name();
    log_.header.params = space.names();
    log_.header.seed = opt_.seed;
  }

  TrialLog& log() { return log_; }
  const TrialLog& log() const { return log_; }
  double spent() const { return log_.records.empty() ? 0.0 : log_.records.back().clock_ms; }
  bool exhausted() const { return exhausted_; }

  const Platform& platform(PlatformKind k) const {
    return platforms_[k == PlatformKind::Testbed ? 0 : 1];
  }

  /// Runs `configs` in order while spent() < cap. Returns the indices of
  /// the records written; fewer than requested means the cap was reached.
  std::vector<std::size_t> run(const std::vector<Configuration>& configs, PlatformKind kind,
                               Phase phase, std::size_t iteration, double cap) {
    std::vector<std::size_t> out;
    const auto& pf = platform(kind);
    const std::size_t width = std::max<std::size_t>(1, opt_.parallel);
    for (std::size_t start = 0; start < configs.size(); start += width) {
      const std::size_t end = std::min(configs.size(), start + width);
      const std::size_t base = log_.records.size();

      std::vector<std::optional<double>> times(end - start);
      std::vector<std::exception_ptr> errors(end - start);
      std::vector<std::size_t> dispatch;
      std::map<std::string, std::size_t> chunk_keys;
      for (std::size_t i = start; i < end; ++i) {
        const std::string k = key(configs[i], kind);
        if (base + (i - start) < opt_.resume.size()) continue;
        if (pf.target->deterministic() &&
            (measured_.count(k) != 0 || chunk_keys.count(k) != 0))
          continue;
        chunk_keys.emplace(k, i);
        dispatch.push_back(i);
      }
      auto exec = [&](std::size_t i) {
        try {
          times[i - start] = pf.target->execute(configs[i], pf.ds, pf.nm,
                                                run_seed(base + (i - start)));
        } catch (...) {
          errors[i - start] = std::current_exception();
        }
      };
      if (width == 1 || dispatch.size() <= 1) {
        for (auto i : dispatch) exec(i);
      } else {
        std::vector<std::jthread> pool;
        pool.reserve(dispatch.size());
        for (auto i : dispatch) pool.emplace_back(exec, i);
      }

      for (std::size_t i = start; i < end; ++i) {
        if (spent() >= cap) {
          exhausted_ = true;
          return out;
        }
        TrialRecord r;
        r.phase = phase;
        r.platform = kind;
        r.iteration = iteration;
        r.config = configs[i];
        r.ds = pf.ds;
        r.nm = pf.nm;
        r.seed = run_seed(log_.records.size());
        const std::string k = key(configs[i], kind);
        const auto prior = measured_.find(k);
        if (pf.target->deterministic() && prior != measured_.end()) {
          r.time_ms = log_.records[prior->second].time_ms;
          r.charged_ms = 0.0;
          r.reused = true;
        } else if (log_.records.size() < opt_.resume.size()) {
          r.time_ms = opt_.resume[log_.records.size()].time_ms;
          r.charged_ms = r.time_ms;
        } else {
          if (errors[i - start]) std::rethrow_exception(errors[i - start]);
          r.time_ms = *times[i - start];
          r.charged_ms = r.time_ms;
        }
        const auto& rec = log_.append(std::move(r));
        if (rec.index < opt_.resume.size() && !(rec == opt_.resume[rec.index]))
          throw ResumeMismatch("resumed run diverges from the log at record " +
                               std::to_string(rec.index));
        if (!rec.reused) measured_.emplace(k, rec.index);
        if (opt_.on_record) opt_.on_record(rec);
        out.push_back(rec.index);
      }
    }
    return out;
  }

  std::size_t run_one(const Configuration& c, PlatformKind kind, Phase phase,
                      std::size_t iteration, double cap, bool* ok) {
    const auto r = run({c}, kind, phase, iteration, cap);
    *ok = !r.empty();
    return r.empty() ? 0 : r.front();
  }

 private:
  std::uint64_t run_seed(std::size_t index) const {
    return derive_seed(opt_.seed, {0x72756eULL, index});
  }

  static std::string key(const Configuration& c, PlatformKind kind) {
    return std::string(to_string(kind)) + config_to_json(c).dump();
  }

  const ConfigurationSpace& space_;
  SessionOptions opt_;
  std::array<Platform, 2> platforms_{};
  TrialLog log_;
  std::map<std::string, std::size_t> measured_;
  bool exhausted_ = false;
};

/// Keeps the first `b` distinct configurations among `members` (record
/// indices) ordered by time, then by record index.
inline std::vector<std::size_t> best_distinct(const TrialLog& log,
                                              std::vector<std::size_t> members,
                                              std::size_t b) {
  std::sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
    const double tx = log.records[x].time_ms, ty = log.records[y].time_ms;
    return tx != ty ? tx < ty : x < y;
  });
  members.erase(std::unique(members.begin(), members.end()), members.end());
  std::vector<std::size_t> out;
  for (auto m : members) {
    if (out.size() == b) break;
    const bool dup = std::any_of(out.begin(), out.end(), [&](std::size_t o) {
      return log.records[o].config == log.records[m].config;
    });
    if (!dup) out.push_back(m);
  }
  return out;
}

/// Uniform draw from the configuration bound: reals uniform on [lower,
/// upper], integers and categories uniform over their discrete values.
inline Configuration random_configuration(const ConfigurationSpace& space, Rng& rng) {
  Configuration c;
  for (const auto& p : space.params()) {
    switch (p.kind) {
      case ParamKind::Real: c.values.emplace_back(rng.uniform(p.lower, p.upper)); break;
      case ParamKind::Integer: {
        const auto lo = static_cast<std::int64_t>(p.lower);
        const auto n = static_cast<std::size_t>(static_cast<std::int64_t>(p.upper) - lo + 1);
        c.values.emplace_back(lo + static_cast<std::int64_t>(rng.index(n)));
        break;
      }
      case ParamKind::Boolean: c.values.emplace_back(rng.index(2) == 1); break;
      case ParamKind::Categorical: c.values.emplace_back(p.categories[rng.index(p.categories.size())]); break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Tuning under the testbed protocol

enum class Algorithm { AutoTune, Random, Rbs };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::AutoTune: return "autotune";
    case Algorithm::Random: return "random";
    case Algorithm::Rbs: return "rbs";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "autotune") return Algorithm::AutoTune;
  if (s == "random") return Algorithm::Random;
  if (s == "rbs") return Algorithm::Rbs;
  throw std::invalid_argument("unknown algorithm '" + s + "'");
}

struct TuneOptions {
  Algorithm algorithm = Algorithm::AutoTune;
  double alpha = 0.3;
  double beta = 0.2;
  double gamma = 0.5;
  std::size_t iter = 5;
  std::size_t trees = 100;
  std::size_t parallel = 1;
  std::uint64_t seed = 0;
  std::vector<TrialRecord> resume;
  std::function<void(const TrialRecord&)> on_record;
};

struct TuneResult {
  Configuration best;
  double best_ms = 0.0;      // production-measured time of `best`
  std::size_t best_index = 0;
  double default_ms = 0.0;   // production-measured time of the default
  TrialLog log;
  TuningBudget budget;
  /// Incumbent set after initialization and after each E&E iteration, as
  /// record indices ordered best first.
  std::vector<std::vector<std::size_t>> incumbents;
  std::size_t iterations = 0;
  std::vector<std::string> diagnostics;
};

namespace detail {

struct Protocol {
  TrialSession session;
  TuningBudget budget;
  double search_cap = 0.0;  // cumulative cap for init + search
  double init_cap = 0.0;
  std::size_t default_tb = 0;
  std::size_t default_ps = 0;
  std::vector<std::string> diagnostics;
};

/// Probes the default configuration once on each platform, derives h, b, q
/// from the measured times, and fixes the cumulative phase caps. The
/// production probe counts as a validation run.
inline Protocol start_protocol(const Platform& tb, const Platform& ps,
                               const ConfigurationSpace& space, double tc_ms,
                               const TuneOptions& opt) {
  SessionOptions so;
  so.seed = opt.seed;
  so.parallel = opt.parallel;
  so.resume = opt.resume;
  so.on_record = opt.on_record;
  Protocol p{TrialSession(space, tb, ps, std::move(so)), {}, 0, 0, 0, 0, {}};
  p.session.log().header.algorithm = to_string(opt.algorithm);
  p.session.log().header.tc_ms = tc_ms;
  if (!(tc_ms > 0.0)) throw BudgetExhausted("time constraint must be positive");
  const Configuration c0 = default_configuration(space);
  bool ok = false;
  p.default_tb = p.session.run_one(c0, PlatformKind::Testbed, Phase::Init, 0, tc_ms, &ok);
  if (!ok) throw BudgetExhausted("no budget for the testbed probe");
  p.default_ps =
      p.session.run_one(c0, PlatformKind::Production, Phase::Validate, 0, tc_ms, &ok);
  if (!ok) throw BudgetExhausted("time constraint exhausted by the testbed probe");
  const auto& log = p.session.log();
  p.budget = derive_budget(tc_ms, opt.alpha, opt.beta, opt.gamma,
                           log.records[p.default_tb].time_ms,
                           log.records[p.default_ps].time_ms, opt.iter);
  p.init_cap = log.records[p.default_ps].charged_ms + opt.alpha * tc_ms;
  p.search_cap = p.init_cap + opt.gamma * tc_ms;
  return p;
}

/// Validates up to q configurations on production (ranked candidates first,
/// then the rest of the testbed records by time), skipping anything
/// already measured there, and returns the production-best.
inline TuneResult finish_protocol(Protocol& p, std::vector<std::size_t> ranked,
                                  std::size_t iteration) {
  auto& s = p.session;
  const auto& log = s.log();
  std::vector<std::size_t> tb;
  for (const auto& r : log.records)
    if (r.platform == PlatformKind::Testbed) tb.push_back(r.index);
  auto rest = best_distinct(log, tb, tb.size());
  ranked.insert(ranked.end(), rest.begin(), rest.end());

  std::vector<Configuration> chosen;
  for (auto i : ranked) {
    if (chosen.size() == p.budget.q) break;
    const auto& c = log.records[i].config;
    const bool validated = std::any_of(log.records.begin(), log.records.end(), [&](const auto& r) {
      return r.platform == PlatformKind::Production && r.config == c;
    });
    if (validated || std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
    chosen.push_back(c);
  }
  s.run(chosen, PlatformKind::Production, Phase::Validate, iteration, p.budget.tc_ms);
  if (s.exhausted()) p.diagnostics.push_back("time constraint reached during validation");

  TuneResult r;
  r.budget = p.budget;
  r.default_ms = log.records[p.default_ps].time_ms;
  r.best_index = p.default_ps;
  for (const auto& rec : log.records) {
    if (rec.platform == PlatformKind::Production &&
        rec.time_ms < log.records[r.best_index].time_ms)
      r.best_index = rec.index;
  }
  r.best = log.records[r.best_index].config;
  r.best_ms = log.records[r.best_index].time_ms;
  r.iterations = iteration;
  r.log = log;
  r.diagnostics = p.diagnostics;
  for (const auto& d : p.budget.diagnostics) r.diagnostics.push_back(d);
  return r;
}

inline std::vector<std::vector<double>> encode_all(const ConfigurationSpace& space,
                                                   const TrialLog& log,
                                                   std::span<const std::size_t> idx,
                                                   std::vector<double>& y) {
  std::vector<std::vector<double>> x;
  y.clear();
  for (auto i : idx) {
    x.push_back(encode(space, log.records[i].config));
    y.push_back(log.records[i].time_ms);
  }
  return x;
}

}  // namespace detail

/// AutoTune. The default configuration is candidate #0 of the initial
/// design, so the returned configuration is never worse on production than
/// the default as measured.
inline TuneResult tune(const Platform& testbed, const Platform& production,
                       const ConfigurationSpace& space, double tc_ms, const TuneOptions& opt) {
  auto p = detail::start_protocol(testbed, production, space, tc_ms, opt);
  auto& s = p.session;
  const auto& log = s.log();
  const auto& bu = p.budget;
  const std::size_t h = bu.h, b = bu.b;

  // Initialization.
  std::vector<std::size_t> t_set{p.default_tb};
  {
    auto init = s.run(lhs(space, h, derive_seed(opt.seed, {1})), PlatformKind::Testbed,
                      Phase::Init, 0, p.init_cap);
    t_set.insert(t_set.end(), init.begin(), init.end());
  }
  std::vector<std::size_t> incumbents = best_distinct(log, t_set, b);
  std::vector<std::vector<std::size_t>> history{incumbents};

  // Exploration and exploitation.
  std::size_t k = 0;
  while (s.spent() < p.search_cap) {
    ++k;
    const double before = s.spent();
    auto pool = lhs(space, h, derive_seed(opt.seed, {2, k}));
    Rng pick(derive_seed(opt.seed, {3, k}));
    const auto perm = pick.permutation(pool.size());
    std::vector<Configuration> explore;
    for (std::size_t i = 0; i < b && i < perm.size(); ++i) explore.push_back(pool[perm[i]]);
    const auto ep = s.run(explore, PlatformKind::Testbed, Phase::Explore, k, p.search_cap);
    t_set.insert(t_set.end(), ep.begin(), ep.end());

    std::vector<std::size_t> ei;
    if (t_set.size() >= 2 && s.spent() < p.search_cap) {
      std::vector<double> y;
      const auto x = detail::encode_all(space, log, t_set, y);
      ForestOptions fo;
      fo.trees = opt.trees;
      fo.threads = opt.parallel;
      const Forest model = Forest::train(x, y, derive_seed(opt.seed, {4, k}), fo);

      std::vector<Configuration> bound_pool;
      for (auto i : incumbents) bound_pool.push_back(log.records[i].config);
      for (auto i : ep) bound_pool.push_back(log.records[i].config);
      std::vector<Configuration> exploit;
      for (std::size_t j = 0; j < incumbents.size(); ++j) {
        const auto& ci = log.records[incumbents[j]].config;
        const Region region = bound_region(space, ci, bound_pool);
        const auto cands = sample_region(space, region, h, derive_seed(opt.seed, {5, k, j}));
        exploit.push_back(argbest(model, space, cands));
      }
      ei = s.run(exploit, PlatformKind::Testbed, Phase::Exploit, k, p.search_cap);
    }
    t_set.insert(t_set.end(), ei.begin(), ei.end());

    std::vector<std::size_t> merged = incumbents;
    merged.insert(merged.end(), ep.begin(), ep.end());
    merged.insert(merged.end(), ei.begin(), ei.end());
    incumbents = best_distinct(log, merged, b);
    history.push_back(incumbents);

    if (s.spent() == before) {
      p.diagnostics.push_back("iteration " + std::to_string(k) +
                              " charged nothing; stopping the search");
      break;
    }
  }
  if (k < bu.iter)
    p.diagnostics.push_back("search ran " + std::to_string(k) + " of " +
                            std::to_string(bu.iter) + " planned iterations");

  auto r = detail::finish_protocol(p, incumbents, k + 1);
  r.incumbents = std::move(history);
  r.iterations = k;
  return r;
}

/// Random search on the testbed followed by production validation of its
/// best q, under the same caps as tune().
inline TuneResult tune_random(const Platform& testbed, const Platform& production,
                              const ConfigurationSpace& space, double tc_ms,
                              const TuneOptions& opt) {
  auto p = detail::start_protocol(testbed, production, space, tc_ms, opt);
  auto& s = p.session;
  Rng rng(derive_seed(opt.seed, {6}));
  const std::size_t chunk = std::max<std::size_t>(p.budget.b, 1);
  std::size_t round = 0;
  while (s.spent() < p.search_cap) {
    const double before = s.spent();
    std::vector<Configuration> batch;
    for (std::size_t i = 0; i < chunk; ++i) batch.push_back(random_configuration(space, rng));
    s.run(batch, PlatformKind::Testbed, Phase::Explore, ++round, p.search_cap);
    if (s.spent() == before) break;
  }
  return detail::finish_protocol(p, {}, round + 1);
}

namespace detail {

inline bool degenerate(const Region& r) {
  for (std::size_t i = 0; i < r.lower.size(); ++i)
    if (r.upper[i] > r.lower[i]) return false;
  return true;
}

}  // namespace detail

/// Recursive bound-and-search: an LHS round of k samples, then repeated
/// LHS rounds inside the region bounded around the incumbent by the latest
/// round's samples. A degenerate region restarts from the full bound.
inline TuneResult tune_rbs(const Platform& testbed, const Platform& production,
                           const ConfigurationSpace& space, double tc_ms,
                           const TuneOptions& opt) {
  auto p = detail::start_protocol(testbed, production, space, tc_ms, opt);
  auto& s = p.session;
  const auto& log = s.log();
  const std::size_t k = std::max<std::size_t>(2, p.budget.b);
  std::size_t incumbent = p.default_tb;
  Region region = full_region(space);
  std::size_t round = 0;
  while (s.spent() < p.search_cap) {
    const double before = s.spent();
    ++round;
    const auto idx = s.run(sample_region(space, region, k, derive_seed(opt.seed, {7, round})),
                           PlatformKind::Testbed, Phase::Explore, round, p.search_cap);
    for (auto i : idx)
      if (log.records[i].time_ms < log.records[incumbent].time_ms) incumbent = i;
    std::vector<Configuration> latest;
    for (auto i : idx) latest.push_back(log.records[i].config);
    region = bound_region(space, log.records[incumbent].config, latest);
    if (detail::degenerate(region)) region = full_region(space);
    if (s.spent() == before) break;
  }
  return detail::finish_protocol(p, {incumbent}, round + 1);
}

inline TuneResult run_tuner(const Platform& testbed, const Platform& production,
                            const ConfigurationSpace& space, double tc_ms,
                            const TuneOptions& opt) {
  switch (opt.algorithm) {
    case Algorithm::AutoTune: return tune(testbed, production, space, tc_ms, opt);
    case Algorithm::Random: return tune_random(testbed, production, space, tc_ms, opt);
    case Algorithm::Rbs: return tune_rbs(testbed, production, space, tc_ms, opt);
  }
  throw std::invalid_argument("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Single-platform baselines

struct SearchBudget {
  double time_ms = std::numeric_limits<double>::infinity();
  std::size_t max_evals = std::numeric_limits<std::size_t>::max();
};

struct SearchResult {
  Configuration best;
  double best_ms = 0.0;
  TrialLog log;
};

namespace detail {

inline SearchResult search_result(const TrialLog& log) {
  if (log.records.empty()) throw BudgetExhausted("search budget allows no execution");
  std::size_t best = 0;
  for (const auto& r : log.records)
    if (r.time_ms < log.records[best].time_ms) best = r.index;
  return {log.records[best].config, log.records[best].time_ms, log};
}

}  // namespace detail

/// Independent uniform draws, measured on one platform.
inline SearchResult baseline_random(const Platform& platform, const ConfigurationSpace& space,
                                    const SearchBudget& budget, std::uint64_t seed) {
  SessionOptions so;
  so.seed = seed;
  TrialSession s(space, platform, platform, so);
  s.log().header.algorithm = "random";
  Rng rng(derive_seed(seed, {6}));
  std::size_t evals = 0;
  while (evals < budget.max_evals && s.spent() < budget.time_ms) {
    s.run({random_configuration(space, rng)}, PlatformKind::Testbed, Phase::Explore, evals,
          budget.time_ms);
    ++evals;
  }
  return detail::search_result(s.log());
}

/// Recursive bound-and-search with k samples per round, measured on one
/// platform.
inline SearchResult baseline_rbs(const Platform& platform, const ConfigurationSpace& space,
                                 const SearchBudget& budget, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("baseline_rbs: k must be >= 1");
  SessionOptions so;
  so.seed = seed;
  TrialSession s(space, platform, platform, so);
  s.log().header.algorithm = "rbs";
  const auto& log = s.log();
  Region region = full_region(space);
  std::optional<std::size_t> incumbent;
  std::size_t round = 0;
  while (log.records.size() < budget.max_evals && s.spent() < budget.time_ms) {
    ++round;
    const std::size_t n = std::min(k, budget.max_evals - log.records.size());
    auto cands = sample_region(space, region, k, derive_seed(seed, {7, round}));
    cands.resize(n);
    const auto idx = s.run(cands, PlatformKind::Testbed, Phase::Explore, round, budget.time_ms);
    if (idx.empty()) break;
    for (auto i : idx)
      if (!incumbent || log.records[i].time_ms < log.records[*incumbent].time_ms) incumbent = i;
    std::vector<Configuration> latest;
    for (auto i : idx) latest.push_back(log.records[i].config);
    region = bound_region(space, log.records[*incumbent].config, latest);
    if (detail::degenerate(region)) region = full_region(space);
  }
  return detail::search_result(log);
}

}  // namespace autotune
