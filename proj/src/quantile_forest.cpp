#include "hrf/quantile_forest.hpp"

#include <algorithm>
#include <numeric>

#include "hrf/error.hpp"

namespace hrf {

QuantileIndex::QuantileIndex(std::shared_ptr<const Forest> forest, Eigen::VectorXd responses)
    : forest_(std::move(forest)), y_(std::move(responses)) {
  if (!forest_) throw ConfigError("quantile index needs a forest");
  if (forest_->config.task != Task::regression) throw ConfigError("quantile forests need a regression forest");
  if (y_.size() != forest_->n_train)
    throw ConfigError("expected " + std::to_string(forest_->n_train) + " training responses, got " +
                      std::to_string(y_.size()));
  order_.resize(static_cast<std::size_t>(y_.size()));
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  std::stable_sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) { return y_(a) < y_(b); });
}

Eigen::VectorXd QuantileIndex::weights(const FeatureRow& row) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(y_.size());
  const double per_tree = 1.0 / static_cast<double>(forest_->trees.size());
  for (int t = 0; t < static_cast<int>(forest_->trees.size()); ++t) {
    const Tree& tree = forest_->trees[static_cast<std::size_t>(t)];
    const TreeNode& leaf = tree.nodes[static_cast<std::size_t>(leaf_of(*forest_, t, row))];
    const double share = per_tree / leaf.size();
    for (int k = leaf.member_begin; k < leaf.member_end; ++k) w(tree.members[static_cast<std::size_t>(k)]) += share;
  }
  return w;
}

double QuantileIndex::quantile_from(const Eigen::VectorXd& w, double q) const {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile level must lie in (0, 1)");
  double cdf = 0.0, last = 0.0;
  bool atom_has_mass = false;
  for (std::size_t k = 0; k < order_.size(); ++k) {
    const Eigen::Index i = order_[k];
    if (w(i) > 0.0) {
      cdf += w(i);
      last = y_(i);
      atom_has_mass = true;
    }
    // Equal responses form one atom of the distribution.
    if (k + 1 < order_.size() && y_(order_[k + 1]) == y_(i)) continue;
    if (atom_has_mass && cdf >= q - kCdfTolerance) return y_(i);
    atom_has_mass = false;
  }
  return last;
}

double QuantileIndex::quantile(const FeatureRow& row, double q) const { return quantile_from(weights(row), q); }

PredictionInterval QuantileIndex::interval(const FeatureRow& row, double level) const {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
  const Eigen::VectorXd w = weights(row);
  return {quantile_from(w, (1.0 - level) / 2.0), quantile_from(w, (1.0 + level) / 2.0), level};
}

double QuantileIndex::weighted_mean(const FeatureRow& row) const { return weights(row).dot(y_); }

std::vector<PredictionInterval> QuantileIndex::intervals(const Eigen::MatrixXd& x, double level) const {
  std::vector<PredictionInterval> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.push_back(interval(x.row(r), level));
  return out;
}

}  // namespace hrf
