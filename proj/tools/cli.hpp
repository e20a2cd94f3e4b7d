#pragma once

// Command implementations behind the `autotune` executable. Each command
// writes human-readable output to `out`, diagnostics to `err`, and returns
// the process exit code.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autotune/autotune.hpp"

namespace autotune::cli {

enum ExitCode : int {
  kOk = 0,
  kError = 1,
  kUsage = 2,
  kBudget = 3,  // empty plan or time constraint exhausted
  kReplayMiss = 4,
};

struct ExperimentConfig {
  std::string space_path;
  std::string surface_path;
  std::string replay_path;
  double tc_ms = 0.0;
  double alpha = 0.3;
  double beta = 0.2;
  double gamma = 0.5;
  std::size_t delta = 5;
  double scale_factor = 1.0 / 16.0;
  int rc_max_nm = 0;  // 0: no limit
  double rc_max_ds = 1.0;
  std::size_t iters = 5;
  std::size_t trees = 100;
  std::string algorithm = "autotune";
  std::uint64_t seed = 0;
  std::string out;
  std::size_t parallel = 1;
  std::string resume;
  std::optional<double> tb_ds;
  std::optional<int> tb_nm;
  std::optional<int> production_nm;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// A loaded experiment: the space plus the target backend.
struct Experiment {
  ConfigurationSpace space;
  std::unique_ptr<TargetSystem> target;
  int production_nm = 1;
  std::optional<Platform> replay_tb;
};

inline void check_config(const ExperimentConfig& c) {
  if (c.space_path.empty()) throw UsageError("--space is required");
  if (!std::filesystem::exists(c.space_path))
    throw UsageError("space file '" + c.space_path + "' does not exist");
  if (c.surface_path.empty() == c.replay_path.empty())
    throw UsageError("exactly one of --surface and --replay is required");
  const auto& target = c.surface_path.empty() ? c.replay_path : c.surface_path;
  if (!std::filesystem::exists(target))
    throw UsageError("target file '" + target + "' does not exist");
  if (c.tc_ms < 0.0 || !std::isfinite(c.tc_ms)) throw UsageError("--tc must be >= 0");
  for (double f : {c.alpha, c.beta, c.gamma})
    if (f < 0.0 || f > 1.0) throw UsageError("--alpha/--beta/--gamma must lie in [0, 1]");
  if (std::abs(c.alpha + c.beta + c.gamma - 1.0) > 1e-9)
    throw UsageError("--alpha + --beta + --gamma must equal 1");
  if (c.delta < 1) throw UsageError("--delta must be >= 1");
  if (!(c.scale_factor > 0.0 && c.scale_factor <= 1.0))
    throw UsageError("--scale-factor must lie in (0, 1]");
  if (c.iters < 1) throw UsageError("--iters must be >= 1");
  if (c.parallel < 1) throw UsageError("--parallel must be >= 1");
  if (c.rc_max_nm < 0) throw UsageError("--rc-max-nm must be >= 0");
  if (!(c.rc_max_ds > 0.0 && c.rc_max_ds <= 1.0))
    throw UsageError("--rc-max-ds must lie in (0, 1]");
  if (c.tb_ds && !(*c.tb_ds > 0.0 && *c.tb_ds <= 1.0))
    throw UsageError("--tb-ds must lie in (0, 1]");
  if (c.tb_nm && *c.tb_nm < 1) throw UsageError("--tb-nm must be >= 1");
  try {
    parse_algorithm(c.algorithm);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline Experiment load_experiment(const ExperimentConfig& c) {
  check_config(c);
  Experiment e{load_space(c.space_path), nullptr, 1, std::nullopt};
  if (!c.surface_path.empty()) {
    auto surface = load_surface(c.surface_path, e.space);
    e.production_nm = surface.production_nm;
    e.target = std::make_unique<SimulatorTarget>(e.space, std::move(surface));
  } else {
    auto loaded = load_log(c.replay_path, e.space);
    const auto& recs = loaded.log.records;
    auto first = [&](PlatformKind k) {
      return std::find_if(recs.begin(), recs.end(),
                          [&](const TrialRecord& r) { return r.platform == k; });
    };
    if (auto ps = first(PlatformKind::Production); ps != recs.end()) e.production_nm = ps->nm;
    if (auto tb = first(PlatformKind::Testbed); tb != recs.end())
      e.replay_tb = Platform{nullptr, tb->ds, tb->nm};
    e.target = std::make_unique<ReplayTarget>(loaded.log);
  }
  if (c.production_nm) e.production_nm = *c.production_nm;
  return e;
}

inline std::string fmt(double v, int precision = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

/// Runs `body`, mapping library errors to exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ReplayMiss& e) {
    err << "replay miss: " << e.what() << "\n";
    return kReplayMiss;
  } catch (const BudgetExhausted& e) {
    err << "budget exhausted: " << e.what() << "\n";
    return kBudget;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
}

// ---------------------------------------------------------------------------
// plan-testbed

inline nlohmann::json plan_to_json(const TestbedPlan& p) {
  nlohmann::json j;
  auto setting = [](const TestbedSetting& s) {
    return nlohmann::json{{"ds", s.ds}, {"nm", s.nm}, {"predicted_ms", s.predicted_ms},
                          {"relative_gap", s.relative_gap}};
  };
  j["settings"] = nlohmann::json::array();
  for (const auto& s : p.settings) j["settings"].push_back(setting(s));
  j["recommended"] = p.recommended ? setting(*p.recommended) : nlohmann::json();
  if (p.model) {
    j["theta"] = p.model->theta;
    j["residual"] = p.model->residual;
  }
  if (p.family) {
    j["family"] = to_string(p.family->best.kind);
    j["family_correlation"] = p.family->best_corr;
  }
  j["curve"] = nlohmann::json::array();
  for (const auto& c : p.curve) j["curve"].push_back({c.n, c.error});
  j["n"] = p.n;
  j["n_star"] = p.n_star;
  j["t0_ms"] = p.t0_ms;
  j["t0_measured"] = p.t0_measured;
  j["spent_ms"] = p.spent_ms;
  j["budget_exhausted"] = p.budget_exhausted;
  j["diagnostics"] = p.diagnostics;
  return j;
}

inline int cmd_plan_testbed(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto e = load_experiment(c);
    PlanOptions po;
    po.tc_ms = c.tc_ms;
    po.scale_factor = c.scale_factor;
    po.production_nm = e.production_nm;
    if (c.rc_max_nm > 0) po.rc_max_nm = c.rc_max_nm;
    po.rc_max_ds = c.rc_max_ds;
    po.delta = c.delta;
    po.seed = c.seed;
    const auto plan = plan_testbeds(*e.target, e.space, po);

    out << "testbed plan (f = " << fmt(c.scale_factor, 4) << ", production nm = "
        << e.production_nm << ")\n";
    if (plan.model) {
      out << "scaling model: t = " << fmt(plan.model->theta[0]) << " + "
          << fmt(plan.model->theta[1]) << " ds/nm + " << fmt(plan.model->theta[2])
          << " ln nm + " << fmt(plan.model->theta[3]) << " nm\n";
    }
    if (plan.family)
      out << "learning curve: " << to_string(plan.family->best.kind) << " (corr "
          << fmt(plan.family->best_corr, 3) << "), n = " << plan.n << ", n* = " << plan.n_star
          << "\n";
    out << "t0 = " << fmt(plan.t0_ms, 1) << " ms" << (plan.t0_measured ? "" : " (predicted)")
        << ", spent " << fmt(plan.spent_ms, 1) << " ms of " << fmt(c.tc_ms, 1) << "\n";
    out << std::left << std::setw(10) << "ds" << std::setw(6) << "nm" << std::setw(16)
        << "predicted_ms" << "gap\n";
    for (const auto& s : plan.settings)
      out << std::setw(10) << fmt(s.ds, 5) << std::setw(6) << s.nm << std::setw(16)
          << fmt(s.predicted_ms, 1) << fmt(100.0 * s.relative_gap, 1) << "%\n";
    if (plan.recommended)
      out << "recommended: ds = " << fmt(plan.recommended->ds, 5)
          << ", nm = " << plan.recommended->nm << "\n";
    for (const auto& d : plan.diagnostics) err << "note: " << d << "\n";
    if (!c.out.empty()) {
      std::ofstream f(c.out);
      if (!f) throw Error("cannot write '" + c.out + "'");
      f << plan_to_json(plan).dump(2) << "\n";
    }
    if (plan.empty()) {
      err << (plan.budget_exhausted ? "time constraint exhausted; " : "")
          << "no testbed setting found\n";
      return int{kBudget};
    }
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// tune

inline int cmd_tune(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto e = load_experiment(c);
    if (!(c.tc_ms > 0.0)) throw BudgetExhausted("--tc must be positive to tune");
    Platform ps{e.target.get(), 1.0, e.production_nm};
    Platform tb{e.target.get(), 1.0 / 16.0, e.production_nm};
    if (e.replay_tb) {
      tb.ds = e.replay_tb->ds;
      tb.nm = e.replay_tb->nm;
    }
    if (c.tb_ds) tb.ds = *c.tb_ds;
    if (c.tb_nm) tb.nm = *c.tb_nm;

    TuneOptions opt;
    opt.algorithm = parse_algorithm(c.algorithm);
    opt.alpha = c.alpha;
    opt.beta = c.beta;
    opt.gamma = c.gamma;
    opt.iter = c.iters;
    opt.trees = c.trees;
    opt.parallel = c.parallel;
    opt.seed = c.seed;
    if (!c.resume.empty()) {
      const auto prior = load_log(c.resume, e.space);
      for (const auto& w : prior.warnings) err << "note: " << w << "\n";
      const auto& h = prior.log.header;
      if (h.seed != c.seed || h.tc_ms != c.tc_ms || h.algorithm != c.algorithm)
        throw UsageError("resume log was written with a different seed, --tc or --algorithm");
      opt.resume = prior.log.records;
    }

    const auto result = run_tuner(tb, ps, e.space, c.tc_ms, opt);
    if (!c.out.empty()) write_log(c.out, result.log);

    out << "algorithm: " << c.algorithm << "\n";
    out << "testbed: ds = " << fmt(tb.ds, 5) << ", nm = " << tb.nm
        << "; production: ds = 1, nm = " << ps.nm << "\n";
    out << "budget: h = " << result.budget.h << ", b = " << result.budget.b
        << ", q = " << result.budget.q << "; iterations = " << result.iterations << "\n";
    out << "executions: " << result.log.size() << ", charged "
        << fmt(result.log.total_charged(), 1) << " ms of " << fmt(c.tc_ms, 1) << "\n";
    out << "best configuration:\n";
    const auto obj = config_to_object(e.space, result.best);
    for (const auto& p : e.space.params()) out << "  " << p.name << " = " << obj[p.name] << "\n";
    out << "production time: " << fmt(result.best_ms, 1) << " ms\n";
    out << "default production time: " << fmt(result.default_ms, 1) << " ms ("
        << fmt(improvement(result.best_ms, result.default_ms)) << "%)\n";
    for (const auto& d : result.diagnostics) err << "note: " << d << "\n";
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// report

struct LogSummary {
  std::string path;
  std::string algorithm;
  std::optional<double> best_ps;
  std::optional<double> default_ps;
  std::optional<double> ndcg;  // testbed vs production ranking of the validated configs
  std::size_t validated = 0;
  std::size_t executions = 0;
  double charged_ms = 0.0;
};

inline LogSummary summarize(const std::string& path, const TrialLog& log,
                            const ConfigurationSpace& space) {
  LogSummary s;
  s.path = path;
  s.algorithm = log.header.algorithm;
  s.executions = log.size();
  s.charged_ms = log.total_charged();
  const auto c0 = default_configuration(space);
  std::vector<double> tb_times, ps_times;
  for (const auto& r : log.records) {
    if (r.platform != PlatformKind::Production || r.reused) continue;
    if (!s.best_ps || r.time_ms < *s.best_ps) s.best_ps = r.time_ms;
    if (r.config == c0 && !s.default_ps) s.default_ps = r.time_ms;
    const auto tb = std::find_if(log.records.begin(), log.records.end(), [&](const auto& t) {
      return t.platform == PlatformKind::Testbed && t.config == r.config;
    });
    if (tb != log.records.end()) {
      tb_times.push_back(tb->time_ms);
      ps_times.push_back(r.time_ms);
    }
  }
  s.validated = ps_times.size();
  if (ps_times.size() >= 2) s.ndcg = ndcg_from_times(tb_times, ps_times);
  return s;
}

struct PublishedRow {
  std::string app, algorithm;
  double tb = 0.0, ps = 0.0, printed = 0.0;
};

inline std::vector<PublishedRow> load_published(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::vector<PublishedRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw FormatError("malformed fixture row: " + line);
    rows.push_back({f[0], f[1], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return rows;
}

inline int cmd_report(const std::string& space_path, const std::vector<std::string>& logs,
                      const std::string& published, const std::string& out_path,
                      std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (space_path.empty()) throw UsageError("--space is required");
    if (logs.empty() && published.empty()) throw UsageError("no trial logs given");
    const auto space = load_space(space_path);
    nlohmann::json doc;
    doc["logs"] = nlohmann::json::array();

    std::vector<LogSummary> rows;
    for (const auto& p : logs) {
      LoadedLog loaded;
      try {
        loaded = load_log(p, space);
      } catch (const FormatError& e) {
        throw UsageError(p + ": " + e.what());
      }
      for (const auto& w : loaded.warnings) err << "note: " << p << ": " << w << "\n";
      rows.push_back(summarize(p, loaded.log, space));
    }

    if (!rows.empty()) {
      out << std::left << std::setw(12) << "algorithm" << std::setw(14) << "best_ps_ms"
          << std::setw(14) << "default_ms" << std::setw(12) << "imp_def%" << std::setw(12)
          << "imp_base%" << std::setw(8) << "ndcg" << std::setw(8) << "runs" << "charged_ms\n";
      const auto& base = rows.front();
      for (const auto& r : rows) {
        std::optional<double> imp_def, imp_base;
        if (r.best_ps && r.default_ps) imp_def = improvement(*r.best_ps, *r.default_ps);
        if (r.best_ps && base.best_ps) imp_base = improvement(*r.best_ps, *base.best_ps);
        auto cell = [](const std::optional<double>& v, int prec) {
          return v ? fmt(*v, prec) : std::string("-");
        };
        out << std::setw(12) << r.algorithm << std::setw(14) << cell(r.best_ps, 1)
            << std::setw(14) << cell(r.default_ps, 1) << std::setw(12) << cell(imp_def, 2)
            << std::setw(12) << cell(imp_base, 2) << std::setw(8) << cell(r.ndcg, 3)
            << std::setw(8) << r.executions << fmt(r.charged_ms, 1) << "\n";
        auto opt = [](const std::optional<double>& v) {
          return v ? nlohmann::json(*v) : nlohmann::json();
        };
        doc["logs"].push_back({{"path", r.path},
                               {"algorithm", r.algorithm},
                               {"best_ps_ms", opt(r.best_ps)},
                               {"default_ps_ms", opt(r.default_ps)},
                               {"improvement_vs_default", opt(imp_def)},
                               {"improvement_vs_first", opt(imp_base)},
                               {"ndcg_tb_ps", opt(r.ndcg)},
                               {"validated", r.validated},
                               {"executions", r.executions},
                               {"charged_ms", r.charged_ms}});
      }
    }

    const std::vector<long> predicted{2, 1, 3}, truth{1, 2, 3};
    const double self = ndcg(predicted, truth);
    out << "ndcg self-test r=(2,1,3) r*=(1,2,3): " << fmt(self) << "\n";
    doc["ndcg_self_test"] = self;

    if (!published.empty()) {
      out << std::left << std::setw(6) << "app" << std::setw(12) << "algorithm" << std::setw(10)
          << "printed%" << "recomputed%\n";
      doc["published"] = nlohmann::json::array();
      for (const auto& r : load_published(published)) {
        const double imp = std::abs(improvement(r.tb, r.ps));
        out << std::setw(6) << r.app << std::setw(12) << r.algorithm << std::setw(10)
            << fmt(r.printed) << fmt(imp) << "\n";
        doc["published"].push_back({{"app", r.app},
                                   {"algorithm", r.algorithm},
                                   {"printed", r.printed},
                                   {"recomputed", imp}});
      }
    }
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      if (!f) throw Error("cannot write '" + out_path + "'");
      f << doc.dump(2) << "\n";
    }
    return int{kOk};
  });
}

}  // namespace autotune::cli
