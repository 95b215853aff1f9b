#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrf/quantile_forest.hpp"

namespace hrf {

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// (sum(yhat) - sum(y)) / N.
double bias(const VectorRef& predicted, const VectorRef& observed);
/// sqrt(sum (yhat_i - mean)^2) / N: the dispersion measure as reported in
/// the simulation tables. Note the root is divided by N, not sqrt(N).
double sd_paper(const VectorRef& predicted);
/// Sample standard deviation, sqrt(sum (yhat_i - mean)^2 / (N - 1)).
double sd_conventional(const VectorRef& predicted);
double mse(const VectorRef& predicted, const VectorRef& observed);
/// Fraction of observations inside their interval (bounds inclusive).
double pi_coverage(std::span<const PredictionInterval> intervals, const VectorRef& observed);

struct RegressionReport {
  double bias = 0.0;
  /// sd_paper of the predictions.
  double sd = 0.0;
  double mse = 0.0;
  std::optional<double> pi_coverage;
};

RegressionReport regression_report(const VectorRef& predicted, const VectorRef& observed,
                                   std::span<const PredictionInterval> intervals = {});
/// Field-wise mean over replications. Coverage is averaged only when every
/// report carries one.
RegressionReport replicate_average(std::span<const RegressionReport> reports);

/// Predicted-by-actual counts; `percent` normalizes each actual-level column
/// to 100.
struct ConfusionMatrix {
  std::vector<std::string> levels;
  Eigen::MatrixXd counts;
  Eigen::MatrixXd percent;

  double total() const { return counts.sum(); }
  double accuracy() const { return total() > 0 ? counts.trace() / total() : 0.0; }
};

/// `predicted` and `actual` hold level indices into `levels`.
ConfusionMatrix confusion(const Eigen::Ref<const Eigen::VectorXi>& predicted,
                          const Eigen::Ref<const Eigen::VectorXi>& actual, std::vector<std::string> levels);
/// Counts summed, percentages averaged over replications.
ConfusionMatrix replicate_average(std::span<const ConfusionMatrix> matrices);

/// Top-1 agreement of two label vectors.
double accuracy(const VectorRef& predicted, const VectorRef& observed);

/// CSV rows "arm,bias,sd_paper,mse,pi_coverage".
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const std::string& arm, const RegressionReport& report);
/// CSV rows "arm,predicted,actual,count,percent".
void write_confusion_header(std::ostream& out);
void write_confusion_rows(std::ostream& out, const std::string& arm, const ConfusionMatrix& cm);

}  // namespace hrf
