#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hrf/dataset.hpp"

namespace hrf {

enum class Task { regression, classification };

struct ForestConfig {
  int n_trees = 500;
  /// Candidate features per split; 0 selects max(1, floor(sqrt(p))).
  int mtry = 0;
  /// Minimum rows in a terminal node; 0 selects 5 (regression) or 1
  /// (classification).
  int min_node_size = 0;
  /// Draw n rows with replacement per tree. Off only for tests.
  bool bootstrap = true;
  std::uint64_t seed = 0;
  Task task = Task::regression;
  /// Worker threads for fitting; 0 uses the hardware concurrency. Results
  /// do not depend on it.
  int threads = 1;
};

/// Copy of config with defaults filled in for `p` predictors; validates.
ForestConfig resolve(ForestConfig config, int p);

struct FeatureInfo {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;
};

enum class SplitKind : std::uint8_t { leaf, threshold, level };

struct TreeNode {
  SplitKind kind = SplitKind::leaf;
  int feature = -1;
  /// Threshold (go left iff value <= cut) or level index (go left iff
  /// value == cut).
  double cut = 0.0;
  int left = -1;
  int right = -1;
  /// Leaf prediction: member mean, or majority class index.
  double value = 0.0;
  /// Leaf members are Tree::members[member_begin, member_end).
  int member_begin = 0;
  int member_end = 0;

  bool is_leaf() const { return kind == SplitKind::leaf; }
  int size() const { return member_end - member_begin; }
};

struct Tree {
  /// nodes[0] is the root.
  std::vector<TreeNode> nodes;
  /// Training row ids per leaf, bootstrap multiplicity preserved.
  std::vector<int> members;
  /// The bootstrap draw, n row ids in draw order.
  std::vector<int> bootstrap;
};

/// Bagged CART ensemble. Immutable after fit.
struct Forest {
  ForestConfig config;
  std::vector<FeatureInfo> features;
  std::string response;
  /// Class levels (classification only).
  std::vector<std::string> classes;
  int n_train = 0;
  std::vector<Tree> trees;

  int n_features() const { return static_cast<int>(features.size()); }
  int n_classes() const { return static_cast<int>(classes.size()); }
};

/// Predictors in forest feature order; columns may be strided rows of a
/// column-major matrix.
using FeatureRow = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

/// Fits on every non-response column of `ds`. The response kind must match
/// config.task.
Forest fit(const Dataset& ds, const ForestConfig& config);

/// Matrix form. Categorical features hold level indices; for classification
/// `y` holds class indices into `classes`.
Forest fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<FeatureInfo> features,
           std::string response, std::vector<std::string> classes, const ForestConfig& config);

/// Grows one tree from `rows` (with multiplicity) drawn out of (x, y).
/// Exposed for the CART oracle tests; fit() uses it per tree.
Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<FeatureInfo>& features,
               int n_classes, const ForestConfig& resolved, std::vector<int> rows, std::uint64_t tree_seed);

int leaf_of(const Forest& forest, int tree, const FeatureRow& row);
double predict_mean(const Forest& forest, const FeatureRow& row);

struct ClassVote {
  int level = 0;
  /// Per class level, sums to 1.
  Eigen::VectorXd fractions;
};
ClassVote predict_class(const Forest& forest, const FeatureRow& row);

/// Columns of `ds` rearranged into the forest's feature order, categorical
/// levels remapped by name (unseen levels become kOtherLevel). Throws
/// PredictionError when a feature is missing or of the wrong kind.
Eigen::MatrixXd align(const Forest& forest, const Dataset& ds);

/// Per-row mean (regression) or voted class index (classification).
Eigen::VectorXd predict(const Forest& forest, const Eigen::MatrixXd& x);
Eigen::VectorXd predict(const Forest& forest, const Dataset& ds);

struct OobPrediction {
  Eigen::VectorXd value;
  /// Classification only: per-row class vote fractions.
  Eigen::MatrixXd fractions;
  /// Rows in bag for every tree, predicted by the full forest instead.
  int fallbacks = 0;
};

/// Out-of-bag prediction for the training matrix the forest was fit on.
OobPrediction predict_oob(const Forest& forest, const Eigen::MatrixXd& x_train);

/// Number of internal nodes, across all trees, that split on the named feature.
long count_splits_on(const Forest& forest, std::string_view feature);

/// Versioned text format; doubles are written as hex floats so models
/// round-trip bit-exactly.
void save_forest(std::ostream& out, const Forest& forest);
Forest load_forest(std::istream& in);

}  // namespace hrf
