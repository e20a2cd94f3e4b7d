#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <vector>

#include "autotune/doe_sampling.hpp"
#include "autotune/eval_metrics.hpp"
#include "autotune/surrogate_rf.hpp"
#include "autotune/tuner_core.hpp"

using namespace autotune;

namespace {

struct Data {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
};

Data step_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rng.uniform();
    d.x.push_back({v});
    d.y.push_back(v > 0.5 ? 2.0 : 1.0);
  }
  return d;
}

double quadratic(const std::vector<double>& u) {
  double s = 1.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double c = 0.2 + 0.6 * static_cast<double>(i) / static_cast<double>(u.size());
    s += (1.0 + 0.2 * static_cast<double>(i)) * (u[i] - c) * (u[i] - c);
  }
  return s;
}

}  // namespace

TEST(RegressionTree, LeafValueIsMeanOfRoutedTargets) {
  Rng rng(3);
  Data d;
  for (int i = 0; i < 80; ++i) {
    d.x.push_back({std::floor(rng.uniform() * 6.0), std::floor(rng.uniform() * 3.0)});
    d.y.push_back(1.0 + rng.uniform());
  }
  std::vector<std::size_t> rows(d.x.size());
  std::iota(rows.begin(), rows.end(), 0);
  const auto tree = RegressionTree::grow(d.x, d.y, rows);
  std::map<const TreeNode*, std::pair<double, int>> routed;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    std::size_t k = 0;
    const auto& nodes = tree.nodes();
    while (!nodes[k].is_leaf())
      k = static_cast<std::size_t>(d.x[i][static_cast<std::size_t>(nodes[k].feature)] <=
                                           nodes[k].threshold
                                       ? nodes[k].left
                                       : nodes[k].right);
    routed[&nodes[k]].first += d.y[i];
    routed[&nodes[k]].second += 1;
  }
  for (const auto& [leaf, acc] : routed)
    EXPECT_NEAR(leaf->value, acc.first / acc.second, 1e-12);
}

TEST(RegressionTree, GrowsToPurityOnDistinctInputs) {
  Data d = step_data(50, 4);
  for (std::size_t i = 0; i < d.y.size(); ++i) d.y[i] = 1.0 + static_cast<double>(i);
  std::vector<std::size_t> rows(d.x.size());
  std::iota(rows.begin(), rows.end(), 0);
  const auto tree = RegressionTree::grow(d.x, d.y, rows);
  for (std::size_t i = 0; i < d.x.size(); ++i) EXPECT_EQ(tree.predict(d.x[i]), d.y[i]);
}

TEST(RegressionTree, TiesGoToLowestFeature) {
  // Two identical columns: the split must use feature 0.
  std::vector<std::vector<double>> x{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  std::vector<double> y{1, 1, 5, 5};
  const auto tree = RegressionTree::grow(x, y, {0, 1, 2, 3});
  EXPECT_EQ(tree.nodes()[0].feature, 0);
  EXPECT_EQ(tree.nodes()[0].threshold, 1.5);
}

TEST(RegressionTree, RepeatedRowsCountWithTheirMultiplicity) {
  const std::vector<std::vector<double>> x{{0.0}, {0.0}};
  const std::vector<double> y{1.0, 5.0};
  const auto tree = RegressionTree::grow(x, y, {0, 0, 0, 1});
  EXPECT_EQ(tree.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(tree.predict(std::vector<double>{0.0}), 2.0);
}

TEST(Forest, RejectsTooFewOrNonPositiveTargets) {
  EXPECT_THROW(Forest::train({{1.0}}, std::vector<double>{1.0}, 0), FitError);
  EXPECT_THROW(Forest::train({{1.0}, {2.0}}, std::vector<double>{1.0, 0.0}, 0), FitError);
  EXPECT_THROW(Forest::train({{1.0}, {2.0}}, std::vector<double>{1.0, NAN}, 0), FitError);
}

TEST(Forest, ConstantTargetsPredictTheConstant) {
  Data d = step_data(30, 1);
  std::fill(d.y.begin(), d.y.end(), 7.5);
  const auto f = Forest::train(d.x, d.y, 2);
  for (double v : {0.0, 0.3, 0.9, 4.0}) EXPECT_EQ(f.predict(std::vector<double>{v}), 7.5);
}

TEST(Forest, LearnsAStepFunction) {
  const Data train = step_data(200, 10);
  const Data test = step_data(500, 11);
  const auto f = Forest::train(train.x, train.y, 12);
  EXPECT_EQ(f.tree_count(), 100u);
  double mae = 0.0;
  for (std::size_t i = 0; i < test.x.size(); ++i) mae += std::abs(f.predict(test.x[i]) - test.y[i]);
  EXPECT_LT(mae / static_cast<double>(test.x.size()), 0.05);
}

TEST(Forest, BitIdenticalUnderSameSeedAndAnyThreadCount) {
  const Data d = step_data(120, 5);
  const auto a = Forest::train(d.x, d.y, 77);
  const auto b = Forest::train(d.x, d.y, 77);
  const auto c = Forest::train(d.x, d.y, 77, {100, 4});
  for (double v = 0.0; v <= 1.0; v += 0.01) {
    const std::vector<double> q{v};
    EXPECT_EQ(a.predict(q), b.predict(q));
    EXPECT_EQ(a.predict(q), c.predict(q));
  }
  EXPECT_EQ(a.to_json(), c.to_json());
}

TEST(Forest, PredictionsStayInTrainingRange) {
  Rng rng(8);
  Data d;
  for (int i = 0; i < 100; ++i) {
    d.x.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    d.y.push_back(rng.uniform(100, 200));
  }
  const auto f = Forest::train(d.x, d.y, 9);
  for (int i = 0; i < 500; ++i) {
    const double p = f.predict(std::vector<double>{rng.uniform(-50, 50), rng.uniform(-50, 50)});
    EXPECT_GE(p, 100.0);
    EXPECT_LE(p, 200.0);
  }
}

TEST(Forest, SingleTreeOnOneEffectivePoint) {
  const auto f = Forest::train({{1.0}, {1.0}}, std::vector<double>{3.0, 3.0}, 1, {1, 1});
  EXPECT_EQ(f.predict(std::vector<double>{0.0}), 3.0);
}

TEST(Forest, DimensionMismatchThrows) {
  const Data d = step_data(20, 1);
  const auto f = Forest::train(d.x, d.y, 1);
  EXPECT_THROW(f.predict(std::vector<double>{0.1, 0.2}), std::invalid_argument);
}

TEST(Forest, RanksASmoothThirteenDimensionalSurface) {
  Rng rng(21);
  auto draw = [&](std::size_t n) {
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> u(13);
      for (auto& v : u) v = rng.uniform();
      d.y.push_back(quadratic(u));
      d.x.push_back(std::move(u));
    }
    return d;
  };
  const Data train = draw(500), test = draw(100);
  const auto f = Forest::train(train.x, train.y, 22);
  std::vector<double> pred;
  for (const auto& x : test.x) pred.push_back(f.predict(x));
  EXPECT_GT(spearman(pred, test.y), 0.8);
}

TEST(Forest, SerializationRoundTrip) {
  const Data d = step_data(60, 2);
  const auto f = Forest::train(d.x, d.y, 3, {10, 1});
  const auto path = std::filesystem::temp_directory_path() / "autotune_forest_test.json";
  f.save(path.string());
  const auto g = Forest::load(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(g.seeds(), f.seeds());
  EXPECT_EQ(g.fingerprint(), f.fingerprint());
  for (double v = 0.0; v <= 1.0; v += 0.05) {
    const std::vector<double> q{v};
    EXPECT_EQ(g.predict(q), f.predict(q));
  }
}

TEST(Forest, LoadRejectsMalformedFiles) {
  auto j = Forest::train(step_data(10, 1).x, step_data(10, 1).y, 1, {2, 1}).to_json();
  j["version"] = 2;
  EXPECT_THROW(Forest::from_json(j), FormatError);
  j["version"] = 1;
  j["trees"][0]["left"][0] = 0;
  if (j["trees"][0]["feature"][0] != -1) {
    EXPECT_THROW(Forest::from_json(j), FormatError);
  }
}

TEST(Forest, BatchPredictionMatchesSinglePredictions) {
  Rng rng(21);
  std::vector<std::vector<double>> x, cands;
  std::vector<double> y;
  for (int i = 0; i < 150; ++i) {
    std::vector<double> u(13);
    for (auto& v : u) v = rng.uniform();
    y.push_back(quadratic(u));
    x.push_back(std::move(u));
  }
  for (int i = 0; i < 37; ++i) {
    std::vector<double> u(13);
    for (auto& v : u) v = rng.uniform();
    cands.push_back(std::move(u));
  }
  const auto f = Forest::train(x, y, 4, {.trees = 30});
  const auto all = f.predict_all(cands);
  ASSERT_EQ(all.size(), cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) EXPECT_EQ(all[i], f.predict(cands[i])) << i;
}

TEST(Forest, LoadedTreesNeedNotBeInPreorder) {
  // x <= 0.5 -> 10 (node 2), otherwise 20 (node 1).
  const auto j = nlohmann::json::parse(R"({
    "format": "autotune-forest", "version": 1, "features": 1, "fingerprint": 0,
    "target_min": 10, "target_max": 20, "seeds": [0],
    "trees": [{"feature": [0, -1, -1], "threshold": [0.5, 0, 0],
               "left": [2, -1, -1], "right": [1, -1, -1], "value": [0, 20, 10]}]})");
  const auto f = Forest::from_json(j);
  EXPECT_EQ(f.predict(std::vector<double>{0.2}), 10.0);
  EXPECT_EQ(f.predict(std::vector<double>{0.9}), 20.0);
  EXPECT_EQ(f.predict_all({{0.2}, {0.9}, {0.5}}), (std::vector<double>{10.0, 20.0, 10.0}));
}

TEST(Argbest, FirstMinimumWins) {
  // x <= 0.5 -> 120, 0.5 < x <= 1.5 -> 90, x > 1.5 -> 90.
  const auto j = nlohmann::json::parse(R"({
    "format": "autotune-forest", "version": 1, "features": 1, "fingerprint": 0,
    "target_min": 90, "target_max": 120, "seeds": [0],
    "trees": [{"feature": [0, -1, 0, -1, -1], "threshold": [0.5, 0, 1.5, 0, 0],
               "left": [1, -1, 3, -1, -1], "right": [2, -1, 4, -1, -1],
               "value": [0, 120, 0, 90, 90]}]})");
  const auto f = Forest::from_json(j);
  EXPECT_EQ(f.predict(std::vector<double>{0.0}), 120.0);
  EXPECT_EQ(argbest_index(f, {{0.0}, {1.0}, {2.0}}), 1u);
}

TEST(Argbest, SingleCandidate) {
  const Data d = step_data(20, 3);
  const auto f = Forest::train(d.x, d.y, 1);
  EXPECT_EQ(argbest_index(f, {{0.7}}), 0u);
  EXPECT_THROW(argbest_index(f, {}), std::invalid_argument);
}

TEST(Argbest, MatchesExplicitScan) {
  const auto s = load_space(AUTOTUNE_DATA_DIR "/spark_space.json");
  const auto train = lhs(s, 80, 4);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& c : train) {
    x.push_back(encode(s, c));
    y.push_back(1.0 + std::abs(x.back()[0] - 5.0) + x.back()[2]);
  }
  const auto f = Forest::train(x, y, 5);
  const auto cands = lhs(s, 50, 6);
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i)
    if (f.predict(encode(s, cands[i])) < f.predict(encode(s, cands[best]))) best = i;
  EXPECT_EQ(argbest(f, s, cands), cands[best]);
}

TEST(Argbest, InvariantUnderPositiveTargetScaling) {
  const auto s = load_space(AUTOTUNE_DATA_DIR "/spark_space.json");
  const auto train = lhs(s, 60, 14);
  std::vector<std::vector<double>> x;
  std::vector<double> y, y_scaled;
  Rng rng(15);
  for (const auto& c : train) {
    x.push_back(encode(s, c));
    y.push_back(1.0 + rng.uniform());
    y_scaled.push_back(y.back() * 4.0);
  }
  const auto a = Forest::train(x, y, 16);
  const auto b = Forest::train(x, y_scaled, 16);
  const auto cands = lhs(s, 40, 17);
  EXPECT_EQ(argbest(a, s, cands), argbest(b, s, cands));
}
