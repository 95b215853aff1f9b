#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "hrf/forest.hpp"

namespace hrf {

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;

  bool contains(double y) const { return lower <= y && y <= upper; }
};

/// Quantile regression forest view over a fitted regression forest: the
/// conditional distribution at x is the empirical distribution of the
/// training responses weighted by shared leaf membership,
///
///   w_i(x) = (1/T) sum_t mult_{i,t}(x) / |leaf_t(x)|,
///
/// where mult_{i,t}(x) counts row i (bootstrap multiplicity included) in the
/// leaf of tree t that x falls into. Quantiles are restricted to observed
/// responses.
class QuantileIndex {
 public:
  /// `responses` are the training responses y_1..y_n the forest was fit on.
  QuantileIndex(std::shared_ptr<const Forest> forest, Eigen::VectorXd responses);

  const Forest& forest() const { return *forest_; }
  const Eigen::VectorXd& responses() const { return y_; }

  Eigen::VectorXd weights(const FeatureRow& row) const;
  /// Generalized inverse min{y_i : F(y_i | x) >= q}, 0 < q < 1.
  double quantile(const FeatureRow& row, double q) const;
  /// Central interval [Q((1 - level)/2), Q((1 + level)/2)].
  PredictionInterval interval(const FeatureRow& row, double level) const;
  double weighted_mean(const FeatureRow& row) const;

  std::vector<PredictionInterval> intervals(const Eigen::MatrixXd& x, double level) const;

 private:
  double quantile_from(const Eigen::VectorXd& w, double q) const;

  std::shared_ptr<const Forest> forest_;
  Eigen::VectorXd y_;
  std::vector<Eigen::Index> order_;  // ascending y
};

/// Absolute slack used when comparing an accumulated CDF against q.
inline constexpr double kCdfTolerance = 1e-12;

}  // namespace hrf
