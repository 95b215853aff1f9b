#include "hrf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "hrf/error.hpp"
#include "hrf/rng.hpp"

namespace hrf {

ForestConfig resolve(ForestConfig config, int p) {
  if (p < 1) throw ConfigError("a forest needs at least one predictor");
  if (config.n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (config.mtry == 0) config.mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(p)))));
  if (config.mtry < 1 || config.mtry > p)
    throw ConfigError("mtry must lie in [1, " + std::to_string(p) + "], got " + std::to_string(config.mtry));
  if (config.min_node_size == 0) config.min_node_size = config.task == Task::regression ? 5 : 1;
  if (config.min_node_size < 1) throw ConfigError("min_node_size must be >= 1");
  if (config.threads < 0) throw ConfigError("threads must be >= 0");
  return config;
}

namespace {

struct Candidate {
  int feature = -1;
  SplitKind kind = SplitKind::leaf;
  double cut = 0.0;
  double criterion = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<FeatureInfo>& features,
             int n_classes, const ForestConfig& config, std::uint64_t seed)
      : x_(x), y_(y), features_(features), n_classes_(n_classes), config_(config), rng_(seed) {}

  Tree grow(std::vector<int> rows) {
    Tree tree;
    tree.bootstrap = rows;
    rows_ = std::move(rows);
    tree.nodes.emplace_back();
    if (rows_.empty()) return tree;
    struct Work {
      int node, begin, end;
    };
    std::vector<Work> stack{{0, 0, static_cast<int>(rows_.size())}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      Candidate best;
      if (!find_split(w.begin, w.end, best)) {
        make_leaf(tree, w.node, w.begin, w.end);
        continue;
      }
      const auto first = rows_.begin() + w.begin;
      const auto last = rows_.begin() + w.end;
      const auto mid = std::stable_partition(first, last, [&](int r) { return goes_left(best, x_(r, best.feature)); });
      const int split_at = static_cast<int>(mid - rows_.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(w.node)];
      node.kind = best.kind;
      node.feature = best.feature;
      node.cut = best.cut;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, split_at, w.end});
      stack.push_back({left, w.begin, split_at});
    }
    return tree;
  }

 private:
  static bool goes_left(const Candidate& c, double v) {
    return c.kind == SplitKind::threshold ? v <= c.cut : v == c.cut;
  }

  bool regression() const { return config_.task == Task::regression; }

  void make_leaf(Tree& tree, int node_id, int begin, int end) {
    std::sort(rows_.begin() + begin, rows_.begin() + end);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.kind = SplitKind::leaf;
    node.member_begin = static_cast<int>(tree.members.size());
    tree.members.insert(tree.members.end(), rows_.begin() + begin, rows_.begin() + end);
    node.member_end = static_cast<int>(tree.members.size());
    if (regression()) {
      double sum = 0.0;
      for (int i = begin; i < end; ++i) sum += y_(rows_[static_cast<std::size_t>(i)]);
      node.value = sum / (end - begin);
    } else {
      std::vector<int> counts(static_cast<std::size_t>(n_classes_), 0);
      for (int i = begin; i < end; ++i) ++counts[static_cast<std::size_t>(y_(rows_[static_cast<std::size_t>(i)]))];
      node.value = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
  }

  // Weighted child impurity of the best admissible split; false when the
  // node must become a leaf.
  bool find_split(int begin, int end, Candidate& best) {
    const int m = end - begin;
    if (m < 2 * config_.min_node_size) return false;

    double parent = 0.0;
    if (regression()) {
      mean_ = 0.0;
      for (int i = begin; i < end; ++i) mean_ += y_(rows_[static_cast<std::size_t>(i)]);
      mean_ /= m;
      bool pure = true;
      const double first = y_(rows_[static_cast<std::size_t>(begin)]);
      for (int i = begin; i < end; ++i) {
        const double v = y_(rows_[static_cast<std::size_t>(i)]);
        pure = pure && v == first;
        parent += (v - mean_) * (v - mean_);
      }
      if (pure) return false;
    } else {
      totals_.assign(static_cast<std::size_t>(n_classes_), 0.0);
      for (int i = begin; i < end; ++i) totals_[static_cast<std::size_t>(y_(rows_[static_cast<std::size_t>(i)]))] += 1.0;
      double sq = 0.0;
      for (double c : totals_) sq += c * c;
      parent = m - sq / m;
      if (parent <= 0.0) return false;
    }
    tolerance_ = 1e-12 * (1.0 + parent);
    best.criterion = parent + tolerance_;
    best.feature = -1;

    // Candidate features come in batches of mtry from one shuffle; later
    // batches are examined only when no earlier one admits a split.
    const int p = static_cast<int>(features_.size());
    order_.resize(static_cast<std::size_t>(p));
    std::iota(order_.begin(), order_.end(), 0);
    for (int i = p - 1; i > 0; --i)
      std::swap(order_[static_cast<std::size_t>(i)], order_[rng_.below(static_cast<std::uint64_t>(i) + 1)]);
    for (int start = 0; start < p && best.feature < 0; start += config_.mtry) {
      const int stop = std::min(p, start + config_.mtry);
      std::sort(order_.begin() + start, order_.begin() + stop);
      for (int k = start; k < stop; ++k) {
        const int f = order_[static_cast<std::size_t>(k)];
        if (features_[static_cast<std::size_t>(f)].categorical)
          scan_levels(f, begin, end, best);
        else
          scan_numeric(f, begin, end, best);
      }
    }
    return best.feature >= 0;
  }

  void consider(int feature, SplitKind kind, double cut, double criterion, Candidate& best) const {
    if (criterion < best.criterion - (best.feature < 0 ? 0.0 : tolerance_)) {
      best = {feature, kind, cut, criterion};
    }
  }

  void scan_numeric(int f, int begin, int end, Candidate& best) {
    const int m = end - begin;
    const int min_size = config_.min_node_size;
    sorted_.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      const int r = rows_[static_cast<std::size_t>(begin + i)];
      sorted_[static_cast<std::size_t>(i)] = {x_(r, f), regression() ? y_(r) - mean_ : y_(r)};
    }
    std::sort(sorted_.begin(), sorted_.end());
    if (sorted_.front().first == sorted_.back().first) return;

    if (regression()) {
      double s_total = 0.0, q_total = 0.0;
      for (const auto& [v, d] : sorted_) {
        s_total += d;
        q_total += d * d;
      }
      double s_left = 0.0, q_left = 0.0;
      for (int i = 0; i + 1 < m; ++i) {
        const double d = sorted_[static_cast<std::size_t>(i)].second;
        s_left += d;
        q_left += d * d;
        const int n_left = i + 1, n_right = m - n_left;
        if (n_left < min_size) continue;
        if (n_right < min_size) break;
        const double lo = sorted_[static_cast<std::size_t>(i)].first, hi = sorted_[static_cast<std::size_t>(i + 1)].first;
        if (lo == hi) continue;
        const double s_right = s_total - s_left, q_right = q_total - q_left;
        const double crit = (q_left - s_left * s_left / n_left) + (q_right - s_right * s_right / n_right);
        consider(f, SplitKind::threshold, midpoint(lo, hi), crit, best);
      }
    } else {
      left_counts_.assign(static_cast<std::size_t>(n_classes_), 0.0);
      double sq_left = 0.0, sq_right = 0.0;
      for (double c : totals_) sq_right += c * c;
      for (int i = 0; i + 1 < m; ++i) {
        const auto k = static_cast<std::size_t>(sorted_[static_cast<std::size_t>(i)].second);
        const double right_k = totals_[k] - left_counts_[k];
        sq_left += 2.0 * left_counts_[k] + 1.0;
        sq_right -= 2.0 * right_k - 1.0;
        left_counts_[k] += 1.0;
        const int n_left = i + 1, n_right = m - n_left;
        if (n_left < min_size) continue;
        if (n_right < min_size) break;
        const double lo = sorted_[static_cast<std::size_t>(i)].first, hi = sorted_[static_cast<std::size_t>(i + 1)].first;
        if (lo == hi) continue;
        const double crit = (n_left - sq_left / n_left) + (n_right - sq_right / n_right);
        consider(f, SplitKind::threshold, midpoint(lo, hi), crit, best);
      }
    }
  }

  static double midpoint(double lo, double hi) {
    const double t = lo + (hi - lo) / 2.0;
    return t < hi ? t : lo;
  }

  void scan_levels(int f, int begin, int end, Candidate& best) {
    const int m = end - begin;
    const int min_size = config_.min_node_size;
    const auto n_levels = features_[static_cast<std::size_t>(f)].levels.size();
    level_n_.assign(n_levels, 0.0);
    if (regression()) {
      level_s_.assign(n_levels, 0.0);
      level_q_.assign(n_levels, 0.0);
    } else {
      level_counts_.assign(n_levels * static_cast<std::size_t>(n_classes_), 0.0);
    }
    double s_total = 0.0, q_total = 0.0;
    for (int i = begin; i < end; ++i) {
      const int r = rows_[static_cast<std::size_t>(i)];
      const double v = x_(r, f);
      const double d = regression() ? y_(r) - mean_ : 0.0;
      s_total += d;
      q_total += d * d;
      if (v < 0) continue;  // unseen level: always on the rest side
      const auto l = static_cast<std::size_t>(v);
      level_n_[l] += 1.0;
      if (regression()) {
        level_s_[l] += d;
        level_q_[l] += d * d;
      } else {
        level_counts_[l * static_cast<std::size_t>(n_classes_) + static_cast<std::size_t>(y_(r))] += 1.0;
      }
    }
    for (std::size_t l = 0; l < n_levels; ++l) {
      const double n_left = level_n_[l], n_right = m - n_left;
      if (n_left < min_size || n_right < min_size) continue;
      double crit;
      if (regression()) {
        const double s_right = s_total - level_s_[l], q_right = q_total - level_q_[l];
        crit = (level_q_[l] - level_s_[l] * level_s_[l] / n_left) + (q_right - s_right * s_right / n_right);
      } else {
        double sq_left = 0.0, sq_right = 0.0;
        for (int k = 0; k < n_classes_; ++k) {
          const double c = level_counts_[l * static_cast<std::size_t>(n_classes_) + static_cast<std::size_t>(k)];
          sq_left += c * c;
          sq_right += (totals_[static_cast<std::size_t>(k)] - c) * (totals_[static_cast<std::size_t>(k)] - c);
        }
        crit = (n_left - sq_left / n_left) + (n_right - sq_right / n_right);
      }
      consider(f, SplitKind::level, static_cast<double>(l), crit, best);
    }
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const std::vector<FeatureInfo>& features_;
  int n_classes_;
  const ForestConfig& config_;
  Rng rng_;

  std::vector<int> rows_;
  std::vector<int> order_;
  std::vector<std::pair<double, double>> sorted_;
  std::vector<double> totals_, left_counts_, level_n_, level_s_, level_q_, level_counts_;
  double mean_ = 0.0;
  double tolerance_ = 0.0;
};

void check_row(const Forest& forest, const FeatureRow& row) {
  if (row.size() != forest.n_features())
    throw PredictionError("row has " + std::to_string(row.size()) + " features, forest expects " +
                          std::to_string(forest.n_features()));
}

int walk(const Tree& tree, const FeatureRow& row) {
  int id = 0;
  for (;;) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) return id;
    const double v = row(node.feature);
    const bool left = node.kind == SplitKind::threshold ? v <= node.cut : v == node.cut;
    id = left ? node.left : node.right;
  }
}

int vote_winner(const Eigen::VectorXd& votes) {
  int best = 0;
  for (int k = 1; k < votes.size(); ++k)
    if (votes(k) > votes(best)) best = k;
  return best;
}

}  // namespace

Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<FeatureInfo>& features,
               int n_classes, const ForestConfig& resolved, std::vector<int> rows, std::uint64_t tree_seed) {
  return TreeGrower(x, y, features, n_classes, resolved, tree_seed).grow(std::move(rows));
}

Forest fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<FeatureInfo> features,
           std::string response, std::vector<std::string> classes, const ForestConfig& config) {
  if (x.rows() == 0) throw Error("cannot fit a forest on an empty dataset");
  if (y.size() != x.rows()) throw ConfigError("response length does not match the feature matrix");
  if (static_cast<Eigen::Index>(features.size()) != x.cols())
    throw ConfigError("feature descriptions do not match the feature matrix");
  if (config.task == Task::classification) {
    if (classes.empty()) throw ConfigError("classification needs class levels");
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) < 0 || y(i) >= static_cast<double>(classes.size()) || y(i) != std::floor(y(i)))
        throw SchemaError("response row " + std::to_string(i) + " is not a known class");
  } else {
    classes.clear();
  }

  Forest forest;
  forest.config = resolve(config, static_cast<int>(x.cols()));
  forest.features = std::move(features);
  forest.response = std::move(response);
  forest.classes = std::move(classes);
  forest.n_train = static_cast<int>(x.rows());
  forest.trees.resize(static_cast<std::size_t>(forest.config.n_trees));

  const int n = forest.n_train;
  auto build = [&](int t) {
    const std::uint64_t seed = derive_seed(forest.config.seed, static_cast<std::uint64_t>(t));
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (forest.config.bootstrap) {
      Rng draw(derive_seed(seed, "bootstrap"));
      for (auto& r : rows) r = static_cast<int>(draw.below(static_cast<std::uint64_t>(n)));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees[static_cast<std::size_t>(t)] =
        grow_tree(x, y, forest.features, forest.n_classes(), forest.config, std::move(rows), derive_seed(seed, "split"));
  };

  int workers = forest.config.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : forest.config.threads;
  workers = std::clamp(workers, 1, forest.config.n_trees);
  if (workers == 1) {
    for (int t = 0; t < forest.config.n_trees; ++t) build(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int t = w; t < forest.config.n_trees; t += workers) build(t);
      });
    for (auto& th : pool) th.join();
  }
  return forest;
}

Forest fit(const Dataset& ds, const ForestConfig& config) {
  if (ds.rows() == 0) throw Error("cannot fit a forest on an empty dataset");
  const auto& resp = ds.column_schema(ds.response_index());
  const bool categorical_response = resp.response_type == ValueType::categorical;
  if (categorical_response != (config.task == Task::classification))
    throw ConfigError("response '" + resp.name + "' does not match the forest task");

  std::vector<FeatureInfo> features;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c = 0; c < ds.cols(); ++c) {
    if (c == ds.response_index()) continue;
    const auto& s = ds.column_schema(c);
    features.push_back({s.name, s.has_levels(), s.levels});
    cols.push_back(c);
  }
  Eigen::MatrixXd x(ds.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = ds.column(cols[j]);
  return fit(x, ds.response(), std::move(features), resp.name, categorical_response ? resp.levels : std::vector<std::string>{},
             config);
}

int leaf_of(const Forest& forest, int tree, const FeatureRow& row) {
  check_row(forest, row);
  return walk(forest.trees.at(static_cast<std::size_t>(tree)), row);
}

double predict_mean(const Forest& forest, const FeatureRow& row) {
  if (forest.config.task != Task::regression) throw PredictionError("predict_mean needs a regression forest");
  check_row(forest, row);
  double sum = 0.0;
  for (const Tree& tree : forest.trees) sum += tree.nodes[static_cast<std::size_t>(walk(tree, row))].value;
  return sum / static_cast<double>(forest.trees.size());
}

ClassVote predict_class(const Forest& forest, const FeatureRow& row) {
  if (forest.config.task != Task::classification) throw PredictionError("predict_class needs a classification forest");
  check_row(forest, row);
  ClassVote vote;
  vote.fractions = Eigen::VectorXd::Zero(forest.n_classes());
  for (const Tree& tree : forest.trees)
    vote.fractions(static_cast<Eigen::Index>(tree.nodes[static_cast<std::size_t>(walk(tree, row))].value)) += 1.0;
  vote.level = vote_winner(vote.fractions);
  vote.fractions /= static_cast<double>(forest.trees.size());
  return vote;
}

Eigen::MatrixXd align(const Forest& forest, const Dataset& ds) {
  Eigen::MatrixXd x(ds.rows(), forest.n_features());
  for (int j = 0; j < forest.n_features(); ++j) {
    const FeatureInfo& f = forest.features[static_cast<std::size_t>(j)];
    const auto c = ds.find(f.name);
    if (!c) throw PredictionError("query data lacks feature '" + f.name + "'");
    const ColumnSchema& s = ds.column_schema(*c);
    if (s.has_levels() != f.categorical) throw PredictionError("feature '" + f.name + "' has the wrong kind");
    if (!f.categorical) {
      x.col(j) = ds.column(*c);
      continue;
    }
    std::vector<double> remap(s.levels.size());
    for (std::size_t l = 0; l < s.levels.size(); ++l) {
      const auto it = std::find(f.levels.begin(), f.levels.end(), s.levels[l]);
      remap[l] = it == f.levels.end() ? kOtherLevel : static_cast<double>(it - f.levels.begin());
    }
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
      const double v = ds.cells()(r, *c);
      x(r, j) = v == kOtherLevel ? kOtherLevel : remap[static_cast<std::size_t>(v)];
    }
  }
  return x;
}

Eigen::VectorXd predict(const Forest& forest, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out(r) = forest.config.task == Task::regression ? predict_mean(forest, x.row(r))
                                                    : static_cast<double>(predict_class(forest, x.row(r)).level);
  return out;
}

Eigen::VectorXd predict(const Forest& forest, const Dataset& ds) { return predict(forest, align(forest, ds)); }

OobPrediction predict_oob(const Forest& forest, const Eigen::MatrixXd& x_train) {
  const Eigen::Index n = x_train.rows();
  if (n != forest.n_train) throw PredictionError("out-of-bag prediction needs the training matrix");
  const bool regression = forest.config.task == Task::regression;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, regression ? 1 : forest.n_classes());
  Eigen::VectorXd trees_used = Eigen::VectorXd::Zero(n);
  std::vector<char> in_bag(static_cast<std::size_t>(n));
  for (const Tree& tree : forest.trees) {
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (int r : tree.bootstrap) in_bag[static_cast<std::size_t>(r)] = 1;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (in_bag[static_cast<std::size_t>(r)]) continue;
      const double v = tree.nodes[static_cast<std::size_t>(walk(tree, x_train.row(r)))].value;
      if (regression)
        acc(r, 0) += v;
      else
        acc(r, static_cast<Eigen::Index>(v)) += 1.0;
      trees_used(r) += 1.0;
    }
  }
  OobPrediction out;
  out.value.resize(n);
  if (!regression) out.fractions.resize(n, forest.n_classes());
  for (Eigen::Index r = 0; r < n; ++r) {
    if (trees_used(r) == 0.0) {
      ++out.fallbacks;
      if (regression) {
        out.value(r) = predict_mean(forest, x_train.row(r));
      } else {
        const ClassVote vote = predict_class(forest, x_train.row(r));
        out.value(r) = vote.level;
        out.fractions.row(r) = vote.fractions.transpose();
      }
    } else if (regression) {
      out.value(r) = acc(r, 0) / trees_used(r);
    } else {
      out.value(r) = static_cast<double>(vote_winner(acc.row(r).transpose()));
      out.fractions.row(r) = acc.row(r) / trees_used(r);
    }
  }
  return out;
}

long count_splits_on(const Forest& forest, std::string_view feature) {
  long count = 0;
  for (const Tree& tree : forest.trees)
    for (const TreeNode& node : tree.nodes)
      if (!node.is_leaf() && forest.features[static_cast<std::size_t>(node.feature)].name == feature) ++count;
  return count;
}

}  // namespace hrf
