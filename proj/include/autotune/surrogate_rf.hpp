#pragma once

// Random-forest regression surrogate.
//
// Trees are grown without a depth limit on bootstrap resamples, consider
// every feature at every split, and choose the threshold maximizing
// variance reduction. Leaves predict the mean of the targets routed to
// them, so forest predictions never leave the training-target range.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "autotune/error.hpp"
#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"

namespace autotune {

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf mean

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    index();
  }

  /// Rows of a training set in column-major form, with each feature's row
  /// indices sorted by value (ties keep row order). Shared by all trees.
  struct Presorted {
    Presorted(const std::vector<std::vector<double>>& x, std::span<const double> y_)
        : y(y_), cols(x.front().size()), sorted(x.front().size()) {
      for (std::size_t f = 0; f < cols.size(); ++f) {
        auto& c = cols[f];
        c.resize(x.size());
        for (std::size_t r = 0; r < x.size(); ++r) c[r] = x[r][f];
        auto& o = sorted[f];
        o.resize(x.size());
        for (std::size_t r = 0; r < x.size(); ++r) o[r] = static_cast<std::uint32_t>(r);
        std::stable_sort(o.begin(), o.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return c[a] < c[b]; });
      }
    }
    std::span<const double> y;
    std::vector<std::vector<double>> cols;
    std::vector<std::vector<std::uint32_t>> sorted;
  };

  /// Grows a tree on the rows of `x` listed in `rows` (duplicates allowed).
  static RegressionTree grow(const std::vector<std::vector<double>>& x,
                             std::span<const double> y,
                             const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw FitError("cannot grow a tree on zero rows");
    return grow(Presorted(x, y), rows);
  }

  static RegressionTree grow(const Presorted& data, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw FitError("cannot grow a tree on zero rows");
    RegressionTree t;
    Builder b(data, rows);
    const std::size_t m = b.order[0][0].size();
    t.nodes_.reserve(2 * m);
    t.build(b, 0, m, 0);
    t.index();
    return t;
  }

  double predict(std::span<const double> features) const {
    if (!packed_.empty()) {
      std::size_t i = 0;
      while (packed_[i].feature >= 0) {
        const auto& n = packed_[i];
        const std::size_t go_right = !(features[static_cast<std::size_t>(n.feature)] <= n.v);
        i = i + 1 + go_right * (static_cast<std::size_t>(n.right) - i - 1);
      }
      return packed_[i].v;
    }
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(features[n.feature] <= n.threshold ? n.left
                                                                      : n.right);
    }
    return nodes_[i].value;
  }

  /// Adds this tree's prediction for each row to `acc`.
  void predict_into(const std::vector<std::vector<double>>& rows, std::vector<double>& acc) const {
    if (packed_.size() <= 1) {
      for (std::size_t i = 0; i < rows.size(); ++i) acc[i] += predict(rows[i]);
      return;
    }
    // Several rows descend in lockstep so their memory accesses overlap.
    constexpr std::size_t kLanes = 4;
    for (std::size_t i0 = 0; i0 < rows.size(); i0 += kLanes) {
      const std::size_t m = std::min(kLanes, rows.size() - i0);
      std::size_t at[kLanes] = {};
      bool moving = true;
      while (moving) {
        moving = false;
        for (std::size_t j = 0; j < m; ++j) {
          const auto& n = packed_[at[j]];
          const bool split = n.feature >= 0;
          const auto f = static_cast<std::size_t>(split ? n.feature : 0);
          const std::size_t go_right = !(rows[i0 + j][f] <= n.v);
          const std::size_t next = at[j] + 1 + go_right * (static_cast<std::size_t>(n.right) - at[j] - 1);
          at[j] = split ? next : at[j];
          moving |= split;
        }
      }
      for (std::size_t j = 0; j < m; ++j) acc[i0 + j] += packed_[at[j]].v;
    }
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  std::size_t depth() const { return depth_from(0); }

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nodes_[i].left)),
                        depth_from(static_cast<std::size_t>(nodes_[i].right)));
  }

  // Compact copy for prediction, used when every left child directly
  // follows its parent (as in grown trees). v is the threshold of a split
  // node and the value of a leaf.
  struct PackedNode {
    double v;
    std::int32_t feature;
    std::int32_t right;
  };

  void index() {
    packed_.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (!n.is_leaf() && n.left != static_cast<std::int32_t>(i + 1)) {
        packed_.clear();
        return;
      }
      packed_.push_back({n.is_leaf() ? n.value : n.threshold, n.feature, n.right});
    }
  }

  // Repeated rows are grouped with their multiplicity as a weight. Each
  // feature keeps the node's distinct rows sorted by that feature's value in
  // order[p][f][begin, end), where p is the node depth's parity; a split
  // stably partitions every list into the other parity, so no node needs to
  // sort.
  struct Builder {
    struct Entry {
      double x;   // this list's feature value
      double wy;  // weight * target
      std::uint32_t row;
      std::uint32_t w;
    };

    Builder(const Presorted& d, const std::vector<std::size_t>& rows)
        : data(d), goes_left(d.y.size(), 0) {
      order[0].resize(d.cols.size());
      std::vector<std::uint32_t> weight(d.y.size(), 0);
      for (auto r : rows) ++weight[r];
      for (std::size_t f = 0; f < d.cols.size(); ++f) {
        auto& o = order[0][f];
        o.reserve(rows.size());
        for (auto r : d.sorted[f])
          if (weight[r] > 0) o.push_back({d.cols[f][r], weight[r] * d.y[r], r, weight[r]});
      }
      order[1] = order[0];
    }
    const Presorted& data;
    std::vector<char> goes_left;
    std::vector<std::vector<Entry>> order[2];
  };

  std::int32_t build(Builder& b, std::size_t begin, std::size_t end, std::size_t depth) {
    auto& lists = b.order[depth % 2];
    auto& next = b.order[(depth + 1) % 2];
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    const auto& y = b.data.y;
    const auto& rows0 = lists[0];

    double sum = 0.0, n = 0.0;
    bool pure = true;
    const double y0 = y[rows0[begin].row];
    for (std::size_t k = begin; k < end; ++k) {
      const auto& e = rows0[k];
      sum += e.wy;
      n += e.w;
      pure = pure && y[e.row] == y0;
    }
    nodes_[id].value = sum / n;
    if (end - begin < 2 || pure) return id;

    // Best split: maximize sL^2/nL + sR^2/nR, which for a fixed node orders
    // candidates like (n sL - nL s)^2 / (nL nR); that ratio is compared by
    // cross-multiplication. Features are scanned in ascending order and
    // thresholds ascending, replacing only on strict improvement, so ties go
    // to the lowest feature then lowest threshold.
    // best_num = -1 lets the first boundary win, as den > 0 at every boundary.
    std::size_t best_feature = 0, best_k = end;
    double best_num = -1.0, best_den = 1.0;
    for (std::size_t f = 0; f < lists.size(); ++f) {
      const auto* ord = lists[f].data();
      double left = 0.0, nl = 0.0;
      for (std::size_t k = begin; k + 1 < end; ++k) {
        left += ord[k].wy;
        nl += ord[k].w;
        const double d = n * left - nl * sum;
        const double num = d * d;
        const double den = nl * (n - nl);
        const bool better =
            (ord[k].x < ord[k + 1].x) & (num * best_den > best_num * (1.0 + 1e-12) * den);
        best_num = better ? num : best_num;
        best_den = better ? den : best_den;
        best_feature = better ? f : best_feature;
        best_k = better ? k : best_k;
      }
    }
    if (best_k == end) return id;  // all rows identical in feature space
    const auto& split_list = lists[best_feature];
    const double xa = split_list[best_k].x, xb = split_list[best_k + 1].x;
    double best_threshold = 0.5 * (xa + xb);
    // Midpoint of adjacent distinct doubles may round to the upper one.
    if (!(best_threshold < xb)) best_threshold = xa;

    std::size_t n_left = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& e = split_list[k];
      b.goes_left[e.row] = e.x <= best_threshold;
      n_left += b.goes_left[e.row] ? 1 : 0;
    }
    for (std::size_t f = 0; f < lists.size(); ++f) {
      const auto* src = lists[f].data();
      auto* dst = next[f].data();
      std::size_t l = begin, r = begin + n_left;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t go = b.goes_left[src[k].row];
        dst[r + go * (l - r)] = src[k];
        l += go;
        r += 1 - go;
      }
    }
    const std::size_t split = begin + n_left;

    nodes_[id].feature = static_cast<std::int32_t>(best_feature);
    nodes_[id].threshold = best_threshold;
    const auto l = build(b, begin, split, depth + 1);
    const auto r = build(b, split, end, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<TreeNode> nodes_;
  std::vector<PackedNode> packed_;
};

struct ForestOptions {
  std::size_t trees = 100;
  std::size_t threads = 1;
};

class Forest {
 public:
  Forest() = default;

  std::size_t feature_count() const { return features_; }
  std::size_t tree_count() const { return trees_.size(); }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  const std::vector<std::uint64_t>& seeds() const { return seeds_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  double target_min() const { return y_min_; }
  double target_max() const { return y_max_; }

  /// Trains T trees on bootstrap resamples. Tree t uses a seed derived from
  /// (seed, t) up front, so the result does not depend on `threads`.
  static Forest train(const std::vector<std::vector<double>>& x,
                      std::span<const double> y, std::uint64_t seed,
                      ForestOptions opt = {}) {
    if (x.size() != y.size()) throw FitError("feature/target count mismatch");
    if (x.size() < 2) throw FitError("random forest needs at least 2 samples");
    if (opt.trees == 0) throw FitError("random forest needs at least 1 tree");
    const std::size_t nf = x.front().size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].size() != nf) throw FitError("ragged feature matrix");
      if (!std::isfinite(y[i]) || y[i] <= 0.0)
        throw FitError("targets must be finite and positive");
    }

    Forest f;
    f.features_ = nf;
    f.y_min_ = *std::min_element(y.begin(), y.end());
    f.y_max_ = *std::max_element(y.begin(), y.end());
    f.fingerprint_ = fingerprint_of(x, y);
    f.seeds_.resize(opt.trees);
    for (std::size_t t = 0; t < opt.trees; ++t) f.seeds_[t] = derive_seed(seed, {t});
    f.trees_.resize(opt.trees);

    const RegressionTree::Presorted data(x, y);
    auto work = [&](std::size_t worker, std::size_t stride) {
      for (std::size_t t = worker; t < opt.trees; t += stride) {
        Rng rng(f.seeds_[t]);
        std::vector<std::size_t> rows(x.size());
        for (auto& r : rows) r = rng.index(x.size());
        f.trees_[t] = RegressionTree::grow(data, rows);
      }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, opt.trees));
    if (threads == 1) {
      work(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    }
    return f;
  }

  double predict(std::span<const double> features) const {
    if (features.size() != features_)
      throw std::invalid_argument("predict: expected " + std::to_string(features_) +
                                  " features, got " + std::to_string(features.size()));
    double s = 0.0;
    for (const auto& t : trees_) s += t.predict(features);
    return s / static_cast<double>(trees_.size());
  }

  /// Same values as predict() on each row, evaluated one tree at a time.
  std::vector<double> predict_all(const std::vector<std::vector<double>>& rows) const {
    for (const auto& r : rows)
      if (r.size() != features_)
        throw std::invalid_argument("predict: expected " + std::to_string(features_) +
                                    " features, got " + std::to_string(r.size()));
    std::vector<double> s(rows.size(), 0.0);
    for (const auto& t : trees_) t.predict_into(rows, s);
    for (auto& v : s) v /= static_cast<double>(trees_.size());
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "autotune-forest";
    j["version"] = 1;
    j["features"] = features_;
    j["fingerprint"] = fingerprint_;
    j["target_min"] = y_min_;
    j["target_max"] = y_max_;
    j["seeds"] = seeds_;
    j["trees"] = nlohmann::json::array();
    for (const auto& t : trees_) {
      nlohmann::json tj;
      std::vector<std::int32_t> feature, left, right;
      std::vector<double> threshold, value;
      for (const auto& n : t.nodes()) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
      }
      tj["feature"] = feature;
      tj["threshold"] = threshold;
      tj["left"] = left;
      tj["right"] = right;
      tj["value"] = value;
      j["trees"].push_back(std::move(tj));
    }
    return j;
  }

  static Forest from_json(const nlohmann::json& j) {
    try {
      if (j.at("format") != "autotune-forest" || j.at("version") != 1)
        throw FormatError("not a version-1 forest file");
      Forest f;
      f.features_ = j.at("features").get<std::size_t>();
      f.fingerprint_ = j.at("fingerprint").get<std::uint64_t>();
      f.y_min_ = j.at("target_min").get<double>();
      f.y_max_ = j.at("target_max").get<double>();
      f.seeds_ = j.at("seeds").get<std::vector<std::uint64_t>>();
      for (const auto& tj : j.at("trees")) {
        const auto feature = tj.at("feature").get<std::vector<std::int32_t>>();
        const auto threshold = tj.at("threshold").get<std::vector<double>>();
        const auto left = tj.at("left").get<std::vector<std::int32_t>>();
        const auto right = tj.at("right").get<std::vector<std::int32_t>>();
        const auto value = tj.at("value").get<std::vector<double>>();
        const auto m = feature.size();
        if (m == 0 || threshold.size() != m || left.size() != m ||
            right.size() != m || value.size() != m)
          throw FormatError("tree arrays have inconsistent lengths");
        std::vector<TreeNode> nodes(m);
        for (std::size_t i = 0; i < m; ++i) {
          nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
          if (!nodes[i].is_leaf()) {
            const auto lim = static_cast<std::int32_t>(m);
            if (feature[i] >= static_cast<std::int32_t>(f.features_) ||
                left[i] <= static_cast<std::int32_t>(i) || left[i] >= lim ||
                right[i] <= static_cast<std::int32_t>(i) || right[i] >= lim)
              throw FormatError("tree node " + std::to_string(i) + " is malformed");
          }
        }
        f.trees_.emplace_back(std::move(nodes));
      }
      if (f.trees_.empty() || f.trees_.size() != f.seeds_.size())
        throw FormatError("forest tree/seed count mismatch");
      return f;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("forest file: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out << to_json().dump() << '\n';
  }

  static Forest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("forest file '" + path + "': " + e.what());
    }
  }

 private:
  static std::uint64_t fingerprint_of(const std::vector<std::vector<double>>& x,
                                      std::span<const double> y) {
    std::uint64_t h = mix64(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (double v : x[i]) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
      h = mix64(h ^ std::bit_cast<std::uint64_t>(y[i]));
    }
    return h;
  }

  std::size_t features_ = 0;
  std::vector<RegressionTree> trees_;
  std::vector<std::uint64_t> seeds_;
  std::uint64_t fingerprint_ = 0;
  double y_min_ = 0.0;
  double y_max_ = 0.0;
};

/// Index of the candidate with the lowest prediction; the first one wins ties.
inline std::size_t argbest_index(const Forest& forest,
                                 const std::vector<std::vector<double>>& encoded) {
  if (encoded.empty()) throw std::invalid_argument("argbest: no candidates");
  const auto v = forest.predict_all(encoded);
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

inline const Configuration& argbest(const Forest& forest,
                                    const ConfigurationSpace& space,
                                    const std::vector<Configuration>& candidates) {
  std::vector<std::vector<double>> enc;
  enc.reserve(candidates.size());
  for (const auto& c : candidates) enc.push_back(encode(space, c));
  return candidates[argbest_index(forest, enc)];
}

}  // namespace autotune
