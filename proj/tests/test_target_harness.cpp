#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "autotune/eval_metrics.hpp"
#include "autotune/scaling_testbed.hpp"
#include "autotune/target_harness.hpp"
#include "autotune/trial_log.hpp"
#include "autotune/tuner_core.hpp"

using namespace autotune;

namespace {

struct Spark {
  ConfigurationSpace space = load_space(AUTOTUNE_DATA_DIR "/spark_space.json");
  SyntheticSurface surface = load_surface(AUTOTUNE_DATA_DIR "/spark_surface.json", space);
};

TrialLog sample_log(const ConfigurationSpace& space, std::size_t n, std::uint64_t seed) {
  TrialLog log;
  log.header.space = space.name();
  log.header.params = space.names();
  log.header.seed = seed;
  log.header.tc_ms = 1e6;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    TrialRecord r;
    r.phase = static_cast<Phase>(i % 4);
    r.platform = i % 3 == 0 ? PlatformKind::Production : PlatformKind::Testbed;
    r.iteration = i / 10;
    r.config = random_configuration(space, rng);
    r.ds = 1.0 / static_cast<double>(1 << (i % 6));
    r.nm = 1 + static_cast<int>(i % 5);
    r.time_ms = rng.uniform(1.0, 1e6);
    r.charged_ms = i % 7 == 0 ? 0.0 : r.time_ms;
    r.reused = r.charged_ms == 0.0;
    r.seed = rng.next();
    log.append(std::move(r));
  }
  return log;
}

}  // namespace

TEST(Simulator, DeterministicPositiveAndSeedSensitive) {
  Spark s;
  const SimulatorTarget t(s.space, s.surface);
  EXPECT_FALSE(t.deterministic());
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_configuration(s.space, rng);
    const double a = t.execute(c, 0.25, 3, 99);
    EXPECT_GT(a, 0.0);
    EXPECT_EQ(a, t.execute(c, 0.25, 3, 99));
  }
  const auto c0 = default_configuration(s.space);
  EXPECT_NE(t.execute(c0, 1.0, 5, 1), t.execute(c0, 1.0, 5, 2));
}

TEST(Simulator, RejectsInvalidInputs) {
  Spark s;
  const SimulatorTarget t(s.space, s.surface);
  const auto c0 = default_configuration(s.space);
  EXPECT_THROW(t.execute(c0, 0.0, 5, 1), std::invalid_argument);
  EXPECT_THROW(t.execute(c0, 1.5, 5, 1), std::invalid_argument);
  EXPECT_THROW(t.execute(c0, 1.0, 0, 1), std::invalid_argument);
  auto bad = c0;
  bad[0] = Value{std::int64_t{1000}};
  EXPECT_THROW(t.execute(bad, 1.0, 5, 1), SpaceError);
}

TEST(Simulator, PerfectFidelityPreservesRankingAcrossScales) {
  Spark s;
  s.surface.fidelity = 1.0;
  s.surface.noise_sigma = 0.0;
  const SimulatorTarget t(s.space, s.surface);
  EXPECT_TRUE(t.deterministic());
  Rng rng(2);
  std::vector<double> small, full;
  for (int i = 0; i < 100; ++i) {
    const auto c = random_configuration(s.space, rng);
    small.push_back(t.execute(c, 1.0 / 32, 2, 0));
    full.push_back(t.execute(c, 1.0, 5, 0));
  }
  EXPECT_EQ(ndcg_from_times(small, full), 1.0);
  EXPECT_NEAR(spearman(small, full), 1.0, 1e-12);
}

TEST(Simulator, OptimumBeatsRandomConfigurations) {
  Spark s;
  const SimulatorTarget t(s.space, s.surface);
  const auto opt = s.surface.optimum(s.space);
  ASSERT_TRUE(validate(s.space, opt).ok());
  const double best = t.noiseless(opt, 1.0, 5);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i)
    ASSERT_LT(best, t.noiseless(random_configuration(s.space, rng), 1.0, 5));
  EXPECT_LT(best, t.noiseless(default_configuration(s.space), 1.0, 5));
}

TEST(Simulator, ScalingLawRefitsWithHighR2) {
  Spark s;
  s.surface.fidelity = 1.0;
  const SimulatorTarget t(s.space, s.surface);
  const auto c0 = default_configuration(s.space);
  std::vector<ScalingSample> samples;
  std::uint64_t seed = 0;
  for (double ds : {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0})
    for (int nm = 1; nm <= 5; ++nm) samples.push_back({ds, nm, t.execute(c0, ds, nm, ++seed)});
  const auto m = nnls_fit(samples);
  double mean = 0.0;
  for (const auto& x : samples) mean += x.time;
  mean /= static_cast<double>(samples.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& x : samples) {
    ss_res += std::pow(x.time - m.predict(x.ds, x.nm), 2);
    ss_tot += std::pow(x.time - mean, 2);
  }
  EXPECT_GT(1.0 - ss_res / ss_tot, 0.999);
}

TEST(Simulator, SurfaceJsonRoundTrip) {
  Spark s;
  const auto again = surface_from_json(s.space, surface_to_json(s.space, s.surface));
  const SimulatorTarget a(s.space, s.surface), b(s.space, again);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto c = random_configuration(s.space, rng);
    EXPECT_DOUBLE_EQ(a.execute(c, 0.5, 3, 7), b.execute(c, 0.5, 3, 7));
  }
}

TEST(Simulator, SurfaceRejectsUnknownParameter) {
  Spark s;
  auto j = surface_to_json(s.space, s.surface);
  j["base"]["quadratic"][0]["param"] = "spark.nonexistent";
  EXPECT_THROW(surface_from_json(s.space, j), SpaceError);
}

TEST(RepeatAndAverage, SingleRepetitionEqualsExecute) {
  Spark s;
  const SimulatorTarget t(s.space, s.surface);
  const auto c0 = default_configuration(s.space);
  const auto one = repeat_and_average(t, c0, 1.0, 5, 1, 42);
  EXPECT_EQ(one.mean, t.execute(c0, 1.0, 5, 42));
  EXPECT_EQ(one.stddev, 0.0);
  const auto many = repeat_and_average(t, c0, 1.0, 5, 200, 42);
  EXPECT_NEAR(many.mean / t.noiseless(c0, 1.0, 5), 1.0, 0.01);
  EXPECT_NEAR(many.stddev / many.mean, s.surface.noise_sigma, 0.005);
  EXPECT_THROW(repeat_and_average(t, c0, 1.0, 5, 0, 1), std::invalid_argument);
}

TEST(TrialLogFile, RoundTripsAThousandRecords) {
  Spark s;
  const auto log = sample_log(s.space, 1000, 5);
  const auto path = std::filesystem::temp_directory_path() / "autotune_log_roundtrip.jsonl";
  write_log(path.string(), log);
  const auto loaded = load_log(path.string(), s.space);
  std::filesystem::remove(path);
  EXPECT_TRUE(loaded.warnings.empty());
  EXPECT_EQ(loaded.log, log);
}

TEST(TrialLogFile, StreamingWriterMatchesBatchWriter) {
  Spark s;
  const auto log = sample_log(s.space, 20, 6);
  const auto path = std::filesystem::temp_directory_path() / "autotune_log_stream.jsonl";
  {
    TrialLogWriter w(path.string(), log.header);
    for (const auto& r : log.records) w.append(r);
  }
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::filesystem::remove(path);
  EXPECT_EQ(ss.str(), to_jsonl(log));
}

TEST(TrialLogFile, TruncatedFinalLineIsDroppedWithAWarning) {
  Spark s;
  const auto log = sample_log(s.space, 10, 7);
  std::string text = to_jsonl(log);
  text.resize(text.size() - 20);
  const auto loaded = parse_log(text, s.space);
  EXPECT_EQ(loaded.log.records.size(), 9u);
  ASSERT_EQ(loaded.warnings.size(), 1u);
  EXPECT_NE(loaded.warnings[0].find("line 11"), std::string::npos);
}

TEST(TrialLogFile, MalformedLineNamesTheLineNumber) {
  Spark s;
  const auto log = sample_log(s.space, 10, 8);
  std::string text = to_jsonl(log);
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{not json}\n");
  try {
    parse_log(text, s.space);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
}

TEST(TrialLogFile, RejectsForeignSpaceAndBadRecords) {
  Spark s;
  const auto log = sample_log(s.space, 3, 9);
  const ConfigurationSpace other("o", {ParameterSpec::real("x", 0, 1, 0.5)});
  EXPECT_THROW(parse_log(to_jsonl(log), other), FormatError);
  auto bad = log;
  bad.records[1].time_ms = -1.0;
  EXPECT_THROW(parse_log(to_jsonl(bad), s.space), FormatError);
  EXPECT_THROW(parse_log("", s.space), FormatError);
}

TEST(Replay, ReturnsRecordedTimes) {
  Spark s;
  const auto log = sample_log(s.space, 50, 10);
  const ReplayTarget replay(log);
  EXPECT_TRUE(replay.deterministic());
  for (const auto& r : log.records) {
    if (r.reused) continue;
    EXPECT_EQ(replay.execute(r.config, r.ds, r.nm, r.seed), r.time_ms);
  }
}

TEST(Replay, UnknownQueryIsAMiss) {
  Spark s;
  const auto log = sample_log(s.space, 5, 11);
  const ReplayTarget replay(log);
  EXPECT_THROW(replay.execute(log.records[1].config, 0.123, 1, 0), ReplayMiss);
}

TEST(Replay, ReproducesASimulatorRun) {
  Spark s;
  const SimulatorTarget sim(s.space, s.surface);
  TrialLog log;
  Rng rng(12);
  std::vector<std::pair<Configuration, std::uint64_t>> queries;
  for (int i = 0; i < 30; ++i) {
    TrialRecord r;
    r.config = random_configuration(s.space, rng);
    r.ds = 0.5;
    r.nm = 4;
    r.seed = rng.next();
    r.time_ms = sim.execute(r.config, r.ds, r.nm, r.seed);
    r.charged_ms = r.time_ms;
    queries.emplace_back(r.config, r.seed);
    log.append(std::move(r));
  }
  const ReplayTarget replay(log);
  for (const auto& [c, seed] : queries)
    EXPECT_EQ(replay.execute(c, 0.5, 4, seed), sim.execute(c, 0.5, 4, seed));
}
