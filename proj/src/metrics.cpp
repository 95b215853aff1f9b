#include "hrf/metrics.hpp"

#include <cmath>
#include <ostream>

#include "hrf/csv.hpp"
#include "hrf/error.hpp"

namespace hrf {

namespace {

void check_pair(const VectorRef& a, const VectorRef& b) {
  if (a.size() != b.size()) throw ConfigError("prediction and observation vectors differ in length");
  if (a.size() == 0) throw ConfigError("metrics need at least one observation");
}

double centered_ss(const VectorRef& v) {
  if (v.size() == 0) throw ConfigError("metrics need at least one observation");
  return (v.array() - v.mean()).square().sum();
}

}  // namespace

double bias(const VectorRef& predicted, const VectorRef& observed) {
  check_pair(predicted, observed);
  return (predicted.sum() - observed.sum()) / static_cast<double>(predicted.size());
}

double sd_paper(const VectorRef& predicted) {
  return std::sqrt(centered_ss(predicted)) / static_cast<double>(predicted.size());
}

double sd_conventional(const VectorRef& predicted) {
  const double ss = centered_ss(predicted);
  return predicted.size() < 2 ? 0.0 : std::sqrt(ss / static_cast<double>(predicted.size() - 1));
}

double mse(const VectorRef& predicted, const VectorRef& observed) {
  check_pair(predicted, observed);
  return (predicted - observed).squaredNorm() / static_cast<double>(predicted.size());
}

double pi_coverage(std::span<const PredictionInterval> intervals, const VectorRef& observed) {
  if (static_cast<Eigen::Index>(intervals.size()) != observed.size())
    throw ConfigError("interval and observation counts differ");
  if (intervals.empty()) throw ConfigError("metrics need at least one observation");
  double inside = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i)
    if (intervals[i].contains(observed(static_cast<Eigen::Index>(i)))) inside += 1.0;
  return inside / static_cast<double>(intervals.size());
}

RegressionReport regression_report(const VectorRef& predicted, const VectorRef& observed,
                                   std::span<const PredictionInterval> intervals) {
  RegressionReport r;
  r.bias = bias(predicted, observed);
  r.sd = sd_paper(predicted);
  r.mse = mse(predicted, observed);
  if (!intervals.empty()) r.pi_coverage = pi_coverage(intervals, observed);
  return r;
}

RegressionReport replicate_average(std::span<const RegressionReport> reports) {
  if (reports.empty()) throw ConfigError("nothing to average");
  RegressionReport avg;
  bool all_coverage = true;
  double coverage = 0.0;
  for (const auto& r : reports) {
    avg.bias += r.bias;
    avg.sd += r.sd;
    avg.mse += r.mse;
    if (r.pi_coverage)
      coverage += *r.pi_coverage;
    else
      all_coverage = false;
  }
  const double b = static_cast<double>(reports.size());
  avg.bias /= b;
  avg.sd /= b;
  avg.mse /= b;
  if (all_coverage) avg.pi_coverage = coverage / b;
  return avg;
}

ConfusionMatrix confusion(const Eigen::Ref<const Eigen::VectorXi>& predicted,
                          const Eigen::Ref<const Eigen::VectorXi>& actual, std::vector<std::string> levels) {
  if (predicted.size() != actual.size()) throw ConfigError("prediction and observation vectors differ in length");
  const auto k = static_cast<Eigen::Index>(levels.size());
  ConfusionMatrix cm;
  cm.levels = std::move(levels);
  cm.counts = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < predicted.size(); ++i) {
    if (predicted(i) < 0 || predicted(i) >= k || actual(i) < 0 || actual(i) >= k)
      throw ConfigError("label outside the level set");
    cm.counts(predicted(i), actual(i)) += 1.0;
  }
  cm.percent = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double col = cm.counts.col(c).sum();
    if (col > 0) cm.percent.col(c) = cm.counts.col(c) * (100.0 / col);
  }
  return cm;
}

ConfusionMatrix replicate_average(std::span<const ConfusionMatrix> matrices) {
  if (matrices.empty()) throw ConfigError("nothing to average");
  ConfusionMatrix avg = matrices.front();
  for (std::size_t i = 1; i < matrices.size(); ++i) {
    avg.counts += matrices[i].counts;
    avg.percent += matrices[i].percent;
  }
  avg.percent /= static_cast<double>(matrices.size());
  return avg;
}

double accuracy(const VectorRef& predicted, const VectorRef& observed) {
  check_pair(predicted, observed);
  return (predicted.array() == observed.array()).cast<double>().mean();
}

void write_report_header(std::ostream& out) { out << "arm,bias,sd_paper,mse,pi_coverage\n"; }

void write_report_row(std::ostream& out, const std::string& arm, const RegressionReport& report) {
  out << csv_escape(arm) << ',' << format_number(report.bias, 10) << ',' << format_number(report.sd, 10) << ','
      << format_number(report.mse, 10) << ',' << (report.pi_coverage ? format_number(*report.pi_coverage, 10) : "")
      << '\n';
}

void write_confusion_header(std::ostream& out) { out << "arm,predicted,actual,count,percent\n"; }

void write_confusion_rows(std::ostream& out, const std::string& arm, const ConfusionMatrix& cm) {
  for (Eigen::Index p = 0; p < cm.counts.rows(); ++p)
    for (Eigen::Index a = 0; a < cm.counts.cols(); ++a)
      out << csv_escape(arm) << ',' << csv_escape(cm.levels[static_cast<std::size_t>(p)]) << ','
          << csv_escape(cm.levels[static_cast<std::size_t>(a)]) << ',' << format_number(cm.counts(p, a), 10) << ','
          << format_number(cm.percent(p, a), 10) << '\n';
}

}  // namespace hrf
