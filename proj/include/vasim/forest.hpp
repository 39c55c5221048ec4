#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vasim/error.hpp"
#include "vasim/parallel.hpp"
#include "vasim/random.hpp"

namespace vasim::forest {

enum class Criterion : std::uint8_t { Gini };
enum class FeatureRule : std::uint8_t { Sqrt, All };

// Defaults are the published opportunity-model settings: bootstrap, gini,
// depth 10, 200 trees.
struct ForestParams {
  bool bootstrap = true;
  Criterion criterion = Criterion::Gini;
  int max_depth = 10;
  int n_estimators = 200;
  int min_leaf = 1;
  FeatureRule features_per_split = FeatureRule::Sqrt;
};

inline void validate(const ForestParams& p) {
  if (p.n_estimators < 1) throw ConfigError("forest: n_estimators must be >= 1");
  if (p.max_depth < 1) throw ConfigError("forest: max_depth must be >= 1");
  if (p.min_leaf < 1) throw ConfigError("forest: min_leaf must be >= 1");
}

struct TrainingSet {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> class_order;

  std::size_t size() const { return rows.size(); }
  std::size_t n_features() const { return rows.empty() ? 0 : rows.front().size(); }
  std::size_t n_classes() const { return class_order.size(); }
};

inline void validate(const TrainingSet& ts) {
  if (ts.rows.empty()) throw ConfigError("forest: empty dataset");
  if (ts.labels.size() != ts.rows.size()) throw ConfigError("forest: rows and labels differ in length");
  if (ts.class_order.empty()) throw ConfigError("forest: no classes");
  const auto d = ts.n_features();
  if (d == 0) throw ConfigError("forest: rows have no features");
  for (const auto& r : ts.rows)
    if (r.size() != d) throw ConfigError("forest: ragged feature rows");
  for (int y : ts.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= ts.n_classes()) throw ConfigError("forest: label out of range");
}

// Internal nodes send x[feature] <= threshold to `left`. Leaves carry class
// counts of the (bootstrap) training samples that reached them.
struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> counts;

  bool leaf() const { return feature < 0; }
  bool operator==(const Node&) const = default;
};

struct Tree {
  std::vector<Node> nodes;

  const Node& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i];
  }

  int depth() const {
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      deepest = std::max(deepest, level[i]);
      if (!nodes[i].leaf()) {
        level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
        level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
      }
    }
    return deepest;
  }

  bool operator==(const Tree&) const = default;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::string> class_order;
  ForestParams params;
  std::uint64_t train_seed = 0;
  std::size_t n_features = 0;
  std::optional<double> oob_accuracy;

  bool trained() const { return !trees.empty(); }

  std::size_t class_index(const std::string& name) const {
    for (std::size_t i = 0; i < class_order.size(); ++i)
      if (class_order[i] == name) return i;
    throw ConfigError("forest: model has no class '" + name + "'");
  }
};

namespace detail {

// n * gini(node) = n - sum_k c_k^2 / n, from integer counts so the value
// does not depend on sample order.
inline double weighted_gini(const std::vector<long>& counts, long n) {
  if (n == 0) return 0.0;
  long long sumsq = 0;
  for (long c : counts) sumsq += static_cast<long long>(c) * c;
  return static_cast<double>(n) - static_cast<double>(sumsq) / static_cast<double>(n);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;

  // Lowest impurity, then lowest feature index, then lowest threshold.
  bool better_than(const Split& o) const {
    if (o.feature < 0) return true;
    if (impurity != o.impurity) return impurity < o.impurity;
    if (feature != o.feature) return feature < o.feature;
    return threshold < o.threshold;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& ts, const ForestParams& p, std::uint64_t tree_seed)
      : ts_(ts), p_(p), tree_seed_(tree_seed), n_classes_(ts.n_classes()), n_features_(ts.n_features()) {}

  Tree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    grow(std::move(samples), 0, 1);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples, int depth, std::uint64_t path) {
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::vector<long> counts(n_classes_, 0);
    for (auto s : samples) ++counts[static_cast<std::size_t>(ts_.labels[s])];
    const long n = static_cast<long>(samples.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; }) <= 1;

    std::optional<Split> split;
    if (!pure && depth < p_.max_depth && n >= 2L * p_.min_leaf) split = best_split(samples, counts, path);

    if (!split) {
      auto& node = tree_.nodes[static_cast<std::size_t>(index)];
      node.counts.assign(counts.begin(), counts.end());
      return index;
    }

    std::vector<std::size_t> left, right;
    for (auto s : samples)
      (ts_.rows[s][static_cast<std::size_t>(split->feature)] <= split->threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();

    const int l = grow(std::move(left), depth + 1, derive_seed(path, {0}));
    const int r = grow(std::move(right), depth + 1, derive_seed(path, {1}));
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  // Candidate features are drawn from a stream keyed by the node's position,
  // so a node's choice is independent of how much of the tree was grown
  // before it.
  std::vector<std::size_t> feature_order(std::uint64_t path) const {
    std::vector<std::size_t> order(n_features_);
    std::iota(order.begin(), order.end(), 0);
    if (p_.features_per_split == FeatureRule::All) return order;
    Rng rng = make_rng(tree_seed_, {stream::kSplit, path});
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    return order;
  }

  std::size_t features_to_try() const {
    if (p_.features_per_split == FeatureRule::All) return n_features_;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features_)))));
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& samples, const std::vector<long>& counts,
                                  std::uint64_t path) const {
    const auto order = feature_order(path);
    const std::size_t want = features_to_try();
    Split best;
    std::vector<std::pair<double, int>> col(samples.size());
    std::vector<long> left(n_classes_), right(n_classes_);
    const long n = static_cast<long>(samples.size());

    for (std::size_t tried = 0; tried < order.size(); ++tried) {
      // Past the sampled subset, keep looking only until some valid split exists.
      if (tried >= want && best.feature >= 0) break;
      const auto f = order[tried];
      for (std::size_t i = 0; i < samples.size(); ++i)
        col[i] = {ts_.rows[samples[i]][f], ts_.labels[samples[i]]};
      std::sort(col.begin(), col.end());
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        ++left[static_cast<std::size_t>(col[i].second)];
        --right[static_cast<std::size_t>(col[i].second)];
        if (!(col[i].first < col[i + 1].first)) continue;
        const long nl = static_cast<long>(i + 1);
        const long nr = n - nl;
        if (nl < p_.min_leaf || nr < p_.min_leaf) continue;
        double thr = 0.5 * (col[i].first + col[i + 1].first);
        if (!(thr < col[i + 1].first)) thr = col[i].first;
        Split cand{static_cast<int>(f), thr, weighted_gini(left, nl) + weighted_gini(right, nr)};
        if (cand.better_than(best)) best = cand;
      }
    }
    if (best.feature < 0) return std::nullopt;
    return best;
  }

  const TrainingSet& ts_;
  const ForestParams& p_;
  std::uint64_t tree_seed_;
  std::size_t n_classes_;
  std::size_t n_features_;
  Tree tree_;
};

inline std::vector<double> leaf_fractions(const Node& leaf, std::size_t n_classes) {
  std::vector<double> p(n_classes, 0.0);
  const double total = std::accumulate(leaf.counts.begin(), leaf.counts.end(), 0.0);
  for (std::size_t k = 0; k < n_classes && k < leaf.counts.size(); ++k) p[k] = leaf.counts[k] / total;
  return p;
}

}  // namespace detail

inline std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Averaged leaf class fractions over all trees.
inline std::vector<double> predict_proba(const ForestModel& model, std::span<const double> x) {
  if (!model.trained()) throw ConfigError("forest: model is not trained");
  if (x.size() != model.n_features)
    throw ConfigError("forest: expected " + std::to_string(model.n_features) + " features, got " +
                      std::to_string(x.size()));
  const std::size_t k = model.class_order.size();
  std::vector<double> p(k, 0.0);
  for (const auto& tree : model.trees) {
    const auto leaf = detail::leaf_fractions(tree.leaf_for(x), k);
    for (std::size_t c = 0; c < k; ++c) p[c] += leaf[c];
  }
  for (auto& v : p) v /= static_cast<double>(model.trees.size());
  return p;
}

inline int predict(const ForestModel& model, std::span<const double> x) {
  return static_cast<int>(argmax(predict_proba(model, x)));
}

// Tree t draws its bootstrap sample and split features from seed+t only, so
// any `jobs` value yields the same model.
inline ForestModel train(const TrainingSet& ts, const ForestParams& params, std::uint64_t seed, unsigned jobs = 1) {
  validate(params);
  validate(ts);
  ForestModel model;
  model.class_order = ts.class_order;
  model.params = params;
  model.train_seed = seed;
  model.n_features = ts.n_features();
  model.trees.resize(static_cast<std::size_t>(params.n_estimators));

  const std::size_t n = ts.size();
  std::vector<std::vector<char>> in_bag(params.bootstrap ? model.trees.size() : 0);

  parallel_for(model.trees.size(), jobs, [&](std::size_t t) {
    std::vector<std::size_t> samples(n);
    if (params.bootstrap) {
      Rng rng = make_rng(seed, {stream::kBootstrap, t});
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      in_bag[t].assign(n, 0);
      for (auto& s : samples) {
        s = pick(rng);
        in_bag[t][s] = 1;
      }
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    detail::TreeBuilder builder(ts, params, derive_seed(seed, {stream::kSplit, t}));
    model.trees[t] = builder.build(std::move(samples));
  });

  if (params.bootstrap) {
    std::size_t scored = 0, correct = 0;
    const std::size_t k = ts.n_classes();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> p(k, 0.0);
      bool any = false;
      for (std::size_t t = 0; t < model.trees.size(); ++t) {
        if (in_bag[t][i]) continue;
        any = true;
        const auto leaf = detail::leaf_fractions(model.trees[t].leaf_for(ts.rows[i]), k);
        for (std::size_t c = 0; c < k; ++c) p[c] += leaf[c];
      }
      if (!any) continue;
      ++scored;
      if (static_cast<int>(argmax(p)) == ts.labels[i]) ++correct;
    }
    if (scored > 0) model.oob_accuracy = static_cast<double>(correct) / static_cast<double>(scored);
  }
  return model;
}

struct EvalMetrics {
  std::vector<std::string> class_order;
  std::vector<std::vector<long>> confusion;  // [actual][predicted]
  std::vector<double> precision, recall, f1;
  std::vector<long> support;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  bool stratified = true;
  std::string warning;
};

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline EvalMetrics metrics(std::span<const int> predicted, std::span<const int> actual,
                           std::vector<std::string> class_order) {
  if (predicted.size() != actual.size()) throw ConfigError("metrics: predictions and labels differ in length");
  if (predicted.empty()) throw ConfigError("metrics: empty input");
  const std::size_t k = class_order.size();
  EvalMetrics m;
  m.class_order = std::move(class_order);
  m.confusion.assign(k, std::vector<long>(k, 0));
  long correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto a = static_cast<std::size_t>(actual[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (a >= k || p >= k) throw ConfigError("metrics: class index out of range");
    ++m.confusion[a][p];
    if (a == p) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
  for (std::size_t c = 0; c < k; ++c) {
    long tp = m.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += m.confusion[o][c];
      fn += m.confusion[c][o];
    }
    const double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.precision.push_back(prec);
    m.recall.push_back(rec);
    m.f1.push_back(f1_score(prec, rec));
    m.support.push_back(tp + fn);
  }
  const auto mean = [k](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(k); };
  m.macro_precision = mean(m.precision);
  m.macro_recall = mean(m.recall);
  m.macro_f1 = mean(m.f1);
  return m;
}

// Stratified k-fold; predictions from every held-out fold are pooled into a
// single confusion matrix. Falls back to plain k-fold (and says so) when a
// class has fewer than k samples.
inline EvalMetrics cross_validate(const TrainingSet& ts, const ForestParams& params, int k, std::uint64_t seed,
                                  unsigned jobs = 1) {
  validate(ts);
  if (k < 2) throw ConfigError("cross_validate: k must be >= 2");
  if (ts.size() < static_cast<std::size_t>(k)) throw ConfigError("cross_validate: fewer samples than folds");

  std::vector<std::vector<std::size_t>> by_class(ts.n_classes());
  for (std::size_t i = 0; i < ts.size(); ++i) by_class[static_cast<std::size_t>(ts.labels[i])].push_back(i);
  bool stratified = true;
  for (const auto& members : by_class)
    if (!members.empty() && members.size() < static_cast<std::size_t>(k)) stratified = false;

  std::vector<int> fold(ts.size(), 0);
  auto deal = [&](std::vector<std::size_t> idx, std::uint64_t tag) {
    Rng rng = make_rng(seed, {stream::kFold, tag});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t pos = 0; pos < idx.size(); ++pos) fold[idx[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  };
  if (stratified) {
    for (std::size_t c = 0; c < by_class.size(); ++c) deal(by_class[c], c);
  } else {
    std::vector<std::size_t> all(ts.size());
    std::iota(all.begin(), all.end(), 0);
    deal(std::move(all), 0xa11);
  }

  std::vector<int> predicted(ts.size(), 0);
  parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t f) {
    TrainingSet train_part;
    train_part.class_order = ts.class_order;
    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (fold[i] == static_cast<int>(f)) {
        held_out.push_back(i);
      } else {
        train_part.rows.push_back(ts.rows[i]);
        train_part.labels.push_back(ts.labels[i]);
      }
    }
    const auto model = train(train_part, params, derive_seed(seed, {stream::kFold, 0xf01d, f}));
    for (auto i : held_out) predicted[i] = predict(model, ts.rows[i]);
  });

  auto m = metrics(predicted, ts.labels, ts.class_order);
  m.stratified = stratified;
  if (!stratified) m.warning = "a class has fewer than k samples; used non-stratified folds";
  return m;
}

// ---------------------------------------------------------------------------
// Model file (*.forest.json)

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const ForestParams& p) {
  return {{"bootstrap", p.bootstrap},
          {"criterion", "gini"},
          {"max_depth", p.max_depth},
          {"n_estimators", p.n_estimators},
          {"min_leaf", p.min_leaf},
          {"features_per_split", p.features_per_split == FeatureRule::Sqrt ? "sqrt" : "all"}};
}

inline ForestParams params_from_json(const nlohmann::json& j) {
  ForestParams p;
  p.bootstrap = j.at("bootstrap").get<bool>();
  if (j.at("criterion").get<std::string>() != "gini") throw ConfigError("forest: unsupported criterion");
  p.max_depth = j.at("max_depth").get<int>();
  p.n_estimators = j.at("n_estimators").get<int>();
  p.min_leaf = j.value("min_leaf", 1);
  const auto rule = j.value("features_per_split", std::string("sqrt"));
  if (rule == "sqrt") p.features_per_split = FeatureRule::Sqrt;
  else if (rule == "all") p.features_per_split = FeatureRule::All;
  else throw ConfigError("forest: unknown features_per_split '" + rule + "'");
  validate(p);
  return p;
}

inline nlohmann::json to_json(const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   counts = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      counts.push_back(n.counts);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"counts", counts}});
  }
  nlohmann::json j = {{"format", "vasim-forest"},
                      {"version", kModelFormatVersion},
                      {"class_order", m.class_order},
                      {"n_features", m.n_features},
                      {"train_seed", m.train_seed},
                      {"params", to_json(m.params)},
                      {"trees", trees}};
  if (m.oob_accuracy) j["oob_accuracy"] = *m.oob_accuracy;
  return j;
}

inline ForestModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "vasim-forest") throw ConfigError("forest: not a forest model file");
  if (j.at("version").get<int>() != kModelFormatVersion) throw ConfigError("forest: unsupported model version");
  ForestModel m;
  m.class_order = j.at("class_order").get<std::vector<std::string>>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.train_seed = j.at("train_seed").get<std::uint64_t>();
  m.params = params_from_json(j.at("params"));
  if (j.contains("oob_accuracy")) m.oob_accuracy = j.at("oob_accuracy").get<double>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    const auto& f = jt.at("feature");
    t.nodes.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto& n = t.nodes[i];
      n.feature = f[i].get<int>();
      n.threshold = jt.at("threshold")[i].get<double>();
      n.left = jt.at("left")[i].get<int>();
      n.right = jt.at("right")[i].get<int>();
      n.counts = jt.at("counts")[i].get<std::vector<int>>();
      const int size = static_cast<int>(f.size());
      if (!n.leaf() && (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size ||
                        n.right >= size || n.feature >= static_cast<int>(m.n_features)))
        throw ConfigError("forest: malformed tree node");
      if (n.leaf() && (n.counts.size() != m.class_order.size() ||
                       std::accumulate(n.counts.begin(), n.counts.end(), 0) <= 0))
        throw ConfigError("forest: malformed leaf counts");
    }
    m.trees.push_back(std::move(t));
  }
  if (m.trees.empty()) throw ConfigError("forest: model has no trees");
  return m;
}

}  // namespace vasim::forest
