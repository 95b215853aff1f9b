#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hrf/dataset.hpp"
#include "hrf/forest.hpp"

namespace hrf {

/// How training rows get the predicted protected value the top layer learns
/// from.
enum class FeedMode {
  /// Each row predicted only by bottom trees whose bootstrap excluded it.
  out_of_bag,
  /// Full-forest resubstitution.
  in_sample,
};

/// Name of the derived top-layer feature carrying the bottom prediction.
inline constexpr std::string_view kPredictedProtected = "predicted_protected";

struct HierarchicalSpec {
  std::vector<std::string> proxies;
  std::string protected_column;
  std::string outcome;
  /// Must not contain the protected column.
  std::vector<std::string> top_covariates;
  /// Tasks are set from the column kinds; seeds are derived from `seed`.
  ForestConfig bottom;
  ForestConfig top;
  FeedMode feed = FeedMode::out_of_bag;
  /// Feed class vote fractions as numeric features instead of the hard
  /// label. Categorical protected columns only.
  bool soft_feature = false;
  std::uint64_t seed = 0;
};

/// Throws ConfigError when the unawareness or disjointness constraints fail.
void validate(const HierarchicalSpec& spec);

/// Bottom forest: proxies -> protected class. Top forest: top covariates plus
/// the bottom prediction -> outcome. The top forest never sees the raw
/// protected column.
struct HierarchicalModel {
  HierarchicalSpec spec;
  Forest bottom;
  Forest top;
  /// Training rows that fell back to full-forest bottom predictions because
  /// no tree had them out of bag.
  int oob_fallbacks = 0;
};

HierarchicalModel fit_hier(const Dataset& ds, const HierarchicalSpec& spec);

/// Bottom-layer prediction for each row of `ds` (class index or value).
Eigen::VectorXd predict_protected(const HierarchicalModel& model, const Dataset& ds);
/// `ds` with the derived bottom-prediction column(s) appended.
Dataset augment(const HierarchicalModel& model, const Dataset& ds);
/// Top-layer feature matrix for `ds` (for quantile queries on the top forest).
Eigen::MatrixXd top_features(const HierarchicalModel& model, const Dataset& ds);
/// Outcome predictions: value (regression) or class index (classification).
Eigen::VectorXd predict_hier(const HierarchicalModel& model, const Dataset& ds);

/// The comparison arm: a plain forest over `covariates` (protected column
/// included) seeded exactly like the hierarchical top layer.
Forest fit_naive(const Dataset& ds, const std::string& outcome, const std::vector<std::string>& covariates,
                 ForestConfig config, std::uint64_t seed);

/// Model bundle: spec, bottom forest, top forest.
void save_hier(std::ostream& out, const HierarchicalModel& model);
HierarchicalModel load_hier(std::istream& in);

}  // namespace hrf
