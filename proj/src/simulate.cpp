#include "hrf/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <numeric>
#include <thread>

#include "hrf/csv.hpp"
#include "hrf/error.hpp"
#include "hrf/quantile_forest.hpp"
#include "hrf/rng.hpp"
#include "hrf/svg.hpp"

namespace hrf {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::linear: return "linear";
    case Scenario::nonlinear: return "nonlinear";
    case Scenario::classification: return "classification";
  }
  return "linear";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "linear") return Scenario::linear;
  if (text == "nonlinear") return Scenario::nonlinear;
  if (text == "classification") return Scenario::classification;
  throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

void validate(const ScenarioSpec& spec) {
  if (spec.n < 10) throw ConfigError("scenario n must be >= 10");
  if (spec.b < 1) throw ConfigError("scenario b must be >= 1");
  if (!(spec.noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double signal(Scenario s, double x1, double x2, double x3) {
  switch (s) {
    case Scenario::linear: return 3.0 * x1 + 3.0 * x2 + 2.0 * x3;
    case Scenario::nonlinear: {
      const double d = x1 - 0.5;
      return 100.0 * d * d * std::max(x2 - 0.25, 0.0) + std::cos(x3);
    }
    case Scenario::classification:
      return normal_cdf(10.0 * (x1 - 1.0) + 10.0 * std::abs(x2 - 0.5) + 10.0 * x3);
  }
  return 0.0;
}

namespace {

SimulatedData draw(const ScenarioSpec& spec, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const Eigen::Index n = spec.n;
  SimulatedData d;
  d.x1.resize(n);
  d.x2.resize(n);
  d.x3.resize(n);
  d.y.resize(n);
  d.mu.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = rng.uniform(), x2 = rng.uniform(), u = rng.uniform();
    const double x3 = 0.4 * x1 + 0.4 * x2 + 0.2 * u;
    d.x1(i) = x1;
    d.x2(i) = x2;
    d.x3(i) = x3;
    const double s = signal(spec.scenario, x1, x2, x3);
    d.mu(i) = s;
    if (spec.scenario == Scenario::classification) {
      d.y(i) = rng.bernoulli(s) ? 1.0 : 0.0;
    } else {
      d.y(i) = s + spec.noise_sd * rng.normal();
    }
  }
  return d;
}

}  // namespace

std::pair<SimulatedData, SimulatedData> generate(const ScenarioSpec& spec, int replicate) {
  validate(spec);
  if (replicate < 0 || replicate >= spec.b) throw ConfigError("replicate index out of range");
  const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(replicate));
  return {draw(spec, derive_seed(seed, "train")), draw(spec, derive_seed(seed, "test"))};
}

Dataset to_dataset(const SimulatedData& data, Scenario s) {
  std::vector<ColumnSchema> schema(4);
  schema[0].name = "x1";
  schema[1].name = "x2";
  schema[2].name = "x3";
  schema[3].name = "y";
  schema[3].kind = ColumnKind::response;
  if (s == Scenario::classification) {
    schema.back().response_type = ValueType::categorical;
    schema.back().levels = {"N", "P"};
  }
  Eigen::MatrixXd cells(data.x1.size(), 4);
  cells << data.x1, data.x2, data.x3, data.y;
  return Dataset(std::move(schema), std::move(cells));
}

namespace {

struct ReplicateOutcome {
  RegressionReport naive, hier, bottom;
  std::optional<ConfusionMatrix> naive_cm, hier_cm;
  // Plot data, kept for replicate 0 only.
  Eigen::VectorXd observed, naive_pred, hier_pred, naive_lo, naive_hi, hier_lo, hier_hi, x3, x3_hat;
};

Eigen::VectorXi as_labels(const Eigen::VectorXd& v) { return v.cast<int>(); }

ReplicateOutcome run_replicate(const ScenarioSpec& spec, const StudyConfig& config, int r) {
  const auto [train_data, test_data] = generate(spec, r);
  const Dataset train = to_dataset(train_data, spec.scenario);
  const Dataset test = to_dataset(test_data, spec.scenario);
  const std::uint64_t seed = derive_seed(derive_seed(spec.seed, "study"), static_cast<std::uint64_t>(r));
  const bool classification = spec.scenario == Scenario::classification;

  ForestConfig forest_cfg = config.forest;
  forest_cfg.threads = 1;
  auto with_mtry = [&](int p) {
    ForestConfig cfg = forest_cfg;
    if (cfg.mtry == 0 && config.round_mtry) cfg.mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(p))));
    return cfg;
  };
  auto naive = std::make_shared<const Forest>(fit_naive(train, "y", {"x1", "x2", "x3"}, with_mtry(3), seed));

  HierarchicalSpec hs;
  hs.proxies = {"x1", "x2"};
  hs.protected_column = "x3";
  hs.outcome = "y";
  hs.top_covariates = {"x1", "x2"};
  hs.bottom = with_mtry(2);
  hs.top = with_mtry(3);
  hs.feed = config.feed;
  hs.seed = seed;
  HierarchicalModel hier = fit_hier(train, hs);

  ReplicateOutcome out;
  const Eigen::MatrixXd x_naive = align(*naive, test);
  const Eigen::MatrixXd x_hier = top_features(hier, test);
  const Eigen::VectorXd& y = test_data.y;
  out.x3 = test_data.x3;
  out.x3_hat = predict_protected(hier, test);
  out.bottom = regression_report(out.x3_hat, out.x3);
  out.observed = y;

  if (classification) {
    const Eigen::VectorXd naive_label = predict(*naive, x_naive);
    const Eigen::VectorXd hier_label = predict(hier.top, x_hier);
    out.naive = regression_report(naive_label, y);
    out.hier = regression_report(hier_label, y);
    out.naive_cm = confusion(as_labels(naive_label), as_labels(y), {"N", "P"});
    out.hier_cm = confusion(as_labels(hier_label), as_labels(y), {"N", "P"});
    if (r == 0) {
      out.naive_pred.resize(y.size());
      out.hier_pred.resize(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        out.naive_pred(i) = predict_class(*naive, x_naive.row(i)).fractions(1);
        out.hier_pred(i) = predict_class(hier.top, x_hier.row(i)).fractions(1);
      }
    }
    return out;
  }

  auto top = std::make_shared<const Forest>(hier.top);
  const QuantileIndex naive_qi(naive, train_data.y);
  const QuantileIndex hier_qi(top, train_data.y);
  const auto naive_pi = naive_qi.intervals(x_naive, config.level);
  const auto hier_pi = hier_qi.intervals(x_hier, config.level);
  out.naive_pred = predict(*naive, x_naive);
  out.hier_pred = predict(*top, x_hier);
  out.naive = regression_report(out.naive_pred, y, naive_pi);
  out.hier = regression_report(out.hier_pred, y, hier_pi);
  if (r == 0) {
    auto bounds = [](const std::vector<PredictionInterval>& pi, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
      lo.resize(static_cast<Eigen::Index>(pi.size()));
      hi.resize(static_cast<Eigen::Index>(pi.size()));
      for (std::size_t i = 0; i < pi.size(); ++i) {
        lo(static_cast<Eigen::Index>(i)) = pi[i].lower;
        hi(static_cast<Eigen::Index>(i)) = pi[i].upper;
      }
    };
    bounds(naive_pi, out.naive_lo, out.naive_hi);
    bounds(hier_pi, out.hier_lo, out.hier_hi);
  }
  return out;
}

}  // namespace

StudyResult run_study(const ScenarioSpec& spec, const StudyConfig& config) {
  validate(spec);
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(spec.b));
  int workers = config.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : config.threads;
  workers = std::clamp(workers, 1, spec.b);
  if (workers == 1) {
    for (int r = 0; r < spec.b; ++r) outcomes[static_cast<std::size_t>(r)] = run_replicate(spec, config, r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (int r = w; r < spec.b; r += workers) outcomes[static_cast<std::size_t>(r)] = run_replicate(spec, config, r);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<RegressionReport> naive, hier, bottom;
  std::vector<ConfusionMatrix> naive_cm, hier_cm;
  for (const auto& o : outcomes) {
    naive.push_back(o.naive);
    hier.push_back(o.hier);
    bottom.push_back(o.bottom);
    if (o.naive_cm) naive_cm.push_back(*o.naive_cm);
    if (o.hier_cm) hier_cm.push_back(*o.hier_cm);
  }
  StudyResult result;
  result.spec = spec;
  result.naive.name = "without_proxy";
  result.hier.name = "with_proxy";
  result.naive.report = replicate_average(naive);
  result.hier.report = replicate_average(hier);
  result.bottom = replicate_average(bottom);
  if (!naive_cm.empty()) {
    result.naive.confusion = replicate_average(naive_cm);
    result.hier.confusion = replicate_average(hier_cm);
  }
  const auto& first = outcomes.front();
  result.naive.observed = result.hier.observed = first.observed;
  result.naive.predicted = first.naive_pred;
  result.hier.predicted = first.hier_pred;
  result.naive.lower = first.naive_lo;
  result.naive.upper = first.naive_hi;
  result.hier.lower = first.hier_lo;
  result.hier.upper = first.hier_hi;
  result.bottom_observed = first.x3;
  result.bottom_predicted = first.x3_hat;
  return result;
}

std::vector<std::filesystem::path> write_tables(const StudyResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string name(to_string(result.spec.scenario));
  std::vector<std::filesystem::path> written;
  const auto table = dir / (name + "_table.csv");
  {
    std::ofstream out(table, std::ios::binary);
    if (!out) throw Error("cannot write " + table.string());
    if (result.naive.confusion) {
      const auto& levels = result.naive.confusion->levels;
      out << "arm,accuracy";
      for (const auto& a : levels)
        for (const auto& p : levels) out << ",pred_" << p << "_actual_" << a;
      out << '\n';
      for (const ArmResult* arm : {&result.naive, &result.hier}) {
        const auto& cm = *arm->confusion;
        out << arm->name << ',' << format_number(cm.accuracy(), 10);
        for (Eigen::Index a = 0; a < cm.percent.cols(); ++a)
          for (Eigen::Index p = 0; p < cm.percent.rows(); ++p) out << ',' << format_number(cm.percent(p, a), 10);
        out << '\n';
      }
    } else {
      write_report_header(out);
      write_report_row(out, result.naive.name, result.naive.report);
      write_report_row(out, result.hier.name, result.hier.report);
    }
  }
  written.push_back(table);
  if (result.naive.confusion) {
    const auto cm_path = dir / (name + "_confusion.csv");
    std::ofstream out(cm_path, std::ios::binary);
    if (!out) throw Error("cannot write " + cm_path.string());
    write_confusion_header(out);
    write_confusion_rows(out, result.naive.name, *result.naive.confusion);
    write_confusion_rows(out, result.hier.name, *result.hier.confusion);
    written.push_back(cm_path);
  }
  return written;
}

namespace {

// Values reordered by ascending `key`, ties by index.
std::vector<double> ordered(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& order) {
  std::vector<double> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(v(i));
  return out;
}

std::vector<Eigen::Index> order_by(const Eigen::VectorXd& key) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(key.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });
  return idx;
}

}  // namespace

std::vector<std::filesystem::path> plot_predictions(const StudyResult& result, const std::filesystem::path& dir) {
  if (result.naive.observed.size() == 0) {
    std::cerr << "warning: no simulation results to plot\n";
    return {};
  }
  std::filesystem::create_directories(dir);
  const std::string name(to_string(result.spec.scenario));
  const bool classification = result.spec.scenario == Scenario::classification;
  std::vector<std::filesystem::path> written;

  for (const ArmResult* arm : {&result.naive, &result.hier}) {
    const auto order = order_by(arm->predicted);
    std::vector<double> rank(order.size());
    std::iota(rank.begin(), rank.end(), 1.0);
    const auto obs = ordered(arm->observed, order), pred = ordered(arm->predicted, order);
    SvgFigure fig(name + " scenario, " + arm->name, "test point (sorted by prediction)",
                  classification ? "y / vote share of P" : "y");
    fig.x_range(0.0, static_cast<double>(order.size()) + 1.0);
    if (classification) {
      fig.y_range(-0.05, 1.05);
    } else {
      const auto lo = ordered(arm->lower, order), hi = ordered(arm->upper, order);
      std::vector<double> extent = lo;
      extent.insert(extent.end(), hi.begin(), hi.end());
      extent.insert(extent.end(), pred.begin(), pred.end());
      const auto [y_lo, y_hi] = padded_range(obs, extent);
      fig.y_range(y_lo, y_hi);
      fig.band(rank, lo, hi, "#3b75af");
      fig.legend("90% prediction interval", "#3b75af");
    }
    fig.points(rank, obs, "black");
    fig.polyline(rank, pred, "#c0392b");
    fig.legend("observed", "black");
    fig.legend("prediction", "#c0392b");
    const auto path = dir / (name + "_" + arm->name + ".svg");
    fig.save(path);
    written.push_back(path);
  }

  const auto order = order_by(result.bottom_predicted);
  std::vector<double> rank(order.size());
  std::iota(rank.begin(), rank.end(), 1.0);
  const auto obs = ordered(result.bottom_observed, order), pred = ordered(result.bottom_predicted, order);
  SvgFigure fig("prediction of protected class (x3)", "test point (sorted by prediction)", "x3");
  fig.x_range(0.0, static_cast<double>(order.size()) + 1.0);
  const auto [lo, hi] = padded_range(obs, pred);
  fig.y_range(lo, hi);
  fig.points(rank, obs, "black");
  fig.polyline(rank, pred, "#c0392b");
  fig.legend("observed x3", "black");
  fig.legend("bottom-layer prediction", "#c0392b");
  const auto path = dir / (name + "_protected.svg");
  fig.save(path);
  written.push_back(path);
  return written;
}

}  // namespace hrf
