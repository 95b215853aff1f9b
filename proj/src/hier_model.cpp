#include "hrf/hier_model.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "hrf/error.hpp"
#include "hrf/rng.hpp"

namespace hrf {

namespace {

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool categorical_column(const Dataset& ds, const std::string& name) {
  return ds.column_schema(ds.index_of(name)).has_levels();
}

std::string derived_name(const HierarchicalModel& m, std::size_t level) {
  return std::string(kPredictedProtected) + "=" + m.bottom.classes[level];
}

// Appends the derived bottom-prediction column(s) built from labels or vote
// fractions.
Dataset with_prediction(const HierarchicalModel& m, const Dataset& ds, const Eigen::VectorXd& value,
                        const Eigen::MatrixXd& fractions) {
  if (m.bottom.config.task == Task::regression) return ds.with_column({std::string(kPredictedProtected)}, value);
  if (!m.spec.soft_feature) {
    ColumnSchema col{std::string(kPredictedProtected), ColumnKind::categorical, m.bottom.classes};
    return ds.with_column(std::move(col), value);
  }
  Dataset out = ds;
  for (std::size_t k = 0; k < m.bottom.classes.size(); ++k)
    out = out.with_column({derived_name(m, k)}, fractions.col(static_cast<Eigen::Index>(k)));
  return out;
}

std::vector<std::string> top_feature_names(const HierarchicalModel& m) {
  auto names = m.spec.top_covariates;
  if (m.bottom.config.task == Task::classification && m.spec.soft_feature) {
    for (std::size_t k = 0; k < m.bottom.classes.size(); ++k) names.push_back(derived_name(m, k));
  } else {
    names.emplace_back(kPredictedProtected);
  }
  return names;
}

}  // namespace

void validate(const HierarchicalSpec& spec) {
  if (spec.proxies.empty()) throw ConfigError("the bottom layer needs at least one proxy column");
  if (spec.protected_column.empty() || spec.outcome.empty())
    throw ConfigError("protected and outcome columns must be named");
  if (contains(spec.top_covariates, spec.protected_column))
    throw ConfigError("top covariates include the protected column '" + spec.protected_column + "'");
  if (contains(spec.proxies, spec.outcome)) throw ConfigError("proxy columns include the outcome '" + spec.outcome + "'");
  if (contains(spec.proxies, spec.protected_column))
    throw ConfigError("proxy columns include the protected column itself");
  if (contains(spec.top_covariates, spec.outcome)) throw ConfigError("top covariates include the outcome");
  if (spec.protected_column == spec.outcome) throw ConfigError("protected column and outcome coincide");
  for (const auto& c : spec.top_covariates)
    if (c.starts_with(kPredictedProtected)) throw ConfigError("'" + c + "' collides with the derived feature name");
}

HierarchicalModel fit_hier(const Dataset& ds, const HierarchicalSpec& spec) {
  validate(spec);
  HierarchicalModel m;
  m.spec = spec;

  ForestConfig bottom_cfg = spec.bottom;
  bottom_cfg.task = categorical_column(ds, spec.protected_column) ? Task::classification : Task::regression;
  bottom_cfg.seed = derive_seed(spec.seed, "bottom");
  if (spec.soft_feature && bottom_cfg.task != Task::classification)
    throw ConfigError("soft bottom features need a categorical protected column");
  m.bottom = fit(ds.project(spec.proxies, spec.protected_column), bottom_cfg);

  const Eigen::MatrixXd x_bottom = align(m.bottom, ds);
  Eigen::VectorXd fed;
  Eigen::MatrixXd fractions;
  if (spec.feed == FeedMode::out_of_bag) {
    OobPrediction oob = predict_oob(m.bottom, x_bottom);
    fed = std::move(oob.value);
    fractions = std::move(oob.fractions);
    m.oob_fallbacks = oob.fallbacks;
  } else {
    fed = predict(m.bottom, x_bottom);
    if (spec.soft_feature) {
      fractions.resize(ds.rows(), m.bottom.n_classes());
      for (Eigen::Index r = 0; r < ds.rows(); ++r)
        fractions.row(r) = predict_class(m.bottom, x_bottom.row(r)).fractions.transpose();
    }
  }

  ForestConfig top_cfg = spec.top;
  top_cfg.task = categorical_column(ds, spec.outcome) ? Task::classification : Task::regression;
  top_cfg.seed = derive_seed(spec.seed, "top");
  m.top = fit(with_prediction(m, ds, fed, fractions).project(top_feature_names(m), spec.outcome), top_cfg);
  return m;
}

Eigen::VectorXd predict_protected(const HierarchicalModel& model, const Dataset& ds) {
  return predict(model.bottom, ds);
}

Dataset augment(const HierarchicalModel& model, const Dataset& ds) {
  // Only the proxies are read here.
  const Eigen::MatrixXd x = align(model.bottom, ds);
  Eigen::VectorXd value(ds.rows());
  Eigen::MatrixXd fractions;
  const bool soft = model.bottom.config.task == Task::classification && model.spec.soft_feature;
  if (soft) fractions.resize(ds.rows(), model.bottom.n_classes());
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (model.bottom.config.task == Task::regression) {
      value(r) = predict_mean(model.bottom, x.row(r));
    } else {
      const ClassVote vote = predict_class(model.bottom, x.row(r));
      value(r) = vote.level;
      if (soft) fractions.row(r) = vote.fractions.transpose();
    }
  }
  return with_prediction(model, ds, value, fractions);
}

Eigen::MatrixXd top_features(const HierarchicalModel& model, const Dataset& ds) {
  return align(model.top, augment(model, ds));
}

Eigen::VectorXd predict_hier(const HierarchicalModel& model, const Dataset& ds) {
  return predict(model.top, top_features(model, ds));
}

Forest fit_naive(const Dataset& ds, const std::string& outcome, const std::vector<std::string>& covariates,
                 ForestConfig config, std::uint64_t seed) {
  config.task = categorical_column(ds, outcome) ? Task::classification : Task::regression;
  config.seed = derive_seed(seed, "top");
  return fit(ds.project(covariates, outcome), config);
}

namespace {

void put_list(std::ostream& out, const char* key, const std::vector<std::string>& names) {
  out << key << ' ' << names.size() << '\n';
  for (const auto& n : names) {
    if (n.find_first_of("\r\n") != std::string::npos) throw Error("column name contains a line break");
    out << "name " << n << '\n';
  }
}

std::string expect_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("model bundle ends early, expected '" + key + "'");
  if (line.rfind(key + " ", 0) != 0 && line != key) throw ParseError("expected '" + key + "' in model bundle");
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

std::vector<std::string> get_list(std::istream& in, const std::string& key) {
  const std::size_t n = std::stoul(expect_line(in, key));
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(expect_line(in, "name"));
  return names;
}

}  // namespace

void save_hier(std::ostream& out, const HierarchicalModel& model) {
  const auto& s = model.spec;
  out << "hrf-hier 1\n";
  put_list(out, "proxies", s.proxies);
  out << "protected " << s.protected_column << '\n';
  out << "outcome " << s.outcome << '\n';
  put_list(out, "top_covariates", s.top_covariates);
  out << "feed " << (s.feed == FeedMode::out_of_bag ? "oob" : "in-sample") << '\n';
  out << "soft " << (s.soft_feature ? 1 : 0) << '\n';
  out << "seed " << s.seed << '\n';
  out << "oob_fallbacks " << model.oob_fallbacks << '\n';
  save_forest(out, model.bottom);
  save_forest(out, model.top);
}

HierarchicalModel load_hier(std::istream& in) {
  HierarchicalModel m;
  if (expect_line(in, "hrf-hier") != "1") throw ParseError("unsupported model bundle version");
  auto& s = m.spec;
  s.proxies = get_list(in, "proxies");
  s.protected_column = expect_line(in, "protected");
  s.outcome = expect_line(in, "outcome");
  s.top_covariates = get_list(in, "top_covariates");
  const std::string feed = expect_line(in, "feed");
  if (feed != "oob" && feed != "in-sample") throw ParseError("unknown feed mode '" + feed + "'");
  s.feed = feed == "oob" ? FeedMode::out_of_bag : FeedMode::in_sample;
  s.soft_feature = expect_line(in, "soft") == "1";
  s.seed = std::stoull(expect_line(in, "seed"));
  m.oob_fallbacks = std::stoi(expect_line(in, "oob_fallbacks"));
  validate(s);
  m.bottom = load_forest(in);
  m.top = load_forest(in);
  s.bottom = m.bottom.config;
  s.top = m.top.config;
  return m;
}

}  // namespace hrf
