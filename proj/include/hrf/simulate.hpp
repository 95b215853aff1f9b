#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hrf/dataset.hpp"
#include "hrf/forest.hpp"
#include "hrf/hier_model.hpp"
#include "hrf/metrics.hpp"

namespace hrf {

enum class Scenario { linear, nonlinear, classification };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

struct ScenarioSpec {
  Scenario scenario = Scenario::linear;
  int n = 500;
  int b = 100;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

void validate(const ScenarioSpec& spec);

/// Covariates x1, x2 ~ U(0,1) and x3 = 0.4 x1 + 0.4 x2 + 0.2 u. `mu` is the
/// noise-free signal; for the classification scenario it is the success
/// probability and `y` is 0/1.
struct SimulatedData {
  Eigen::VectorXd x1, x2, x3, y, mu;
};

/// Standard normal CDF.
double normal_cdf(double z);

/// Noise-free response: the regression mean, or mu for classification.
double signal(Scenario s, double x1, double x2, double x3);

/// Independent train and test draws of size n for one replicate. Streams are
/// keyed by (seed, replicate) so replicates can be generated in any order.
std::pair<SimulatedData, SimulatedData> generate(const ScenarioSpec& spec, int replicate);

/// Columns x1, x2, x3 (numeric) and response y; for classification y is
/// categorical with levels {"N", "P"}.
Dataset to_dataset(const SimulatedData& data, Scenario s);

struct StudyConfig {
  /// Shared by the naive arm and both hierarchical layers.
  ForestConfig forest;
  FeedMode feed = FeedMode::out_of_bag;
  /// With forest.mtry = 0, give each forest round(sqrt(p)) candidates
  /// instead of the forest default floor(sqrt(p)).
  bool round_mtry = true;
  double level = 0.9;
  /// Replicates run concurrently on this many workers.
  int threads = 1;
};

/// Averaged metrics of one arm plus first-replicate points for plotting.
struct ArmResult {
  std::string name;
  RegressionReport report;
  std::optional<ConfusionMatrix> confusion;
  Eigen::VectorXd observed;
  /// Regression: point prediction. Classification: vote share of "P".
  Eigen::VectorXd predicted;
  Eigen::VectorXd lower, upper;
};

struct StudyResult {
  ScenarioSpec spec;
  ArmResult naive;  // "without_proxy"
  ArmResult hier;   // "with_proxy"
  /// Bottom layer x3-hat against x3 on the test draws, averaged.
  RegressionReport bottom;
  Eigen::VectorXd bottom_observed, bottom_predicted;
};

/// Per replicate: the naive arm fits (x1, x2, x3) -> y; the hierarchical arm
/// fits proxies (x1, x2) -> x3, then (x1, x2, x3-hat) -> y. Both are scored on
/// the independent test draw and averaged over replicates. Regression arms
/// also get quantile-forest intervals at `config.level`.
StudyResult run_study(const ScenarioSpec& spec, const StudyConfig& config);

/// Writes <scenario>_table.csv (and <scenario>_confusion.csv for
/// classification) into `dir`; returns the paths written.
std::vector<std::filesystem::path> write_tables(const StudyResult& result, const std::filesystem::path& dir);

/// One SVG per arm (<scenario>_<arm>.svg) plus <scenario>_protected.svg.
/// Returns the paths written; nothing is written for an empty result.
std::vector<std::filesystem::path> plot_predictions(const StudyResult& result, const std::filesystem::path& dir);

}  // namespace hrf
