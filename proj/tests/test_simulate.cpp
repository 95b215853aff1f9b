#include <doctest.h>

#include <filesystem>

#include "hrf/error.hpp"
#include "hrf/simulate.hpp"
#include "support.hpp"

using namespace hrf;

namespace {

long count_of(const std::string& text, const std::string& needle) {
  long n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

StudyConfig small_study() {
  StudyConfig c;
  c.forest.n_trees = 40;
  return c;
}

}  // namespace

TEST_CASE("normal CDF matches high-precision reference values") {
  // Reference values evaluated at 40 significant digits.
  const std::vector<std::pair<double, double>> ref = {
      {-8.0, 6.220960574271784123515995e-16}, {-5.0, 2.866515718791939116737523e-07},
      {-3.0, 0.001349898031630094526651815},  {-1.5, 0.06680720126885806600449404},
      {-0.5, 0.3085375387259868963622954},    {0.0, 0.5},
      {0.3, 0.6179114221889526330722736},     {1.0, 0.8413447460685429485852325},
      {2.5, 0.9937903346742238648330219},     {4.0, 0.9999683287581668800787462},
      {7.0, 0.9999999999987201874561142},
  };
  for (const auto& [z, p] : ref) CHECK(std::abs(normal_cdf(z) - p) <= 1e-12);
}

TEST_CASE("scenario signals") {
  CHECK(signal(Scenario::linear, 0.1, 0.2, 0.3) == doctest::Approx(0.3 + 0.6 + 0.6));
  CHECK(signal(Scenario::nonlinear, 0.5, 0.9, 0.4) == doctest::Approx(std::cos(0.4)).epsilon(1e-15));
  CHECK(signal(Scenario::nonlinear, 0.9, 0.2, 0.4) == doctest::Approx(std::cos(0.4)).epsilon(1e-15));
  CHECK(signal(Scenario::nonlinear, 0.9, 0.75, 0.0) == doctest::Approx(100 * 0.16 * 0.5 + 1.0));
  CHECK(signal(Scenario::classification, 1.0, 0.5, 0.0) == 0.5);
}

TEST_CASE("spec validation and parsing") {
  CHECK(parse_scenario("nonlinear") == Scenario::nonlinear);
  CHECK_THROWS_AS(parse_scenario("cubic"), ConfigError);
  CHECK_THROWS_AS(validate(ScenarioSpec{.n = 5}), ConfigError);
  CHECK_THROWS_AS(validate(ScenarioSpec{.b = 0}), ConfigError);
  CHECK_THROWS_AS(validate(ScenarioSpec{.noise_sd = 0.0}), ConfigError);
  CHECK_THROWS_AS(generate(ScenarioSpec{.b = 2}, 2), ConfigError);
}

TEST_CASE("draws respect the covariate construction") {
  for (auto s : {Scenario::linear, Scenario::nonlinear, Scenario::classification}) {
    ScenarioSpec spec{s, 300, 3, 1.0, 17};
    for (int r = 0; r < 3; ++r) {
      auto [train, test_draw] = generate(spec, r);
      for (const auto* d : {&train, &test_draw}) {
        CHECK(d->x1.size() == 300);
        CHECK((d->x1.array() >= 0).all());
        CHECK((d->x1.array() <= 1).all());
        CHECK((d->x2.array() >= 0).all());
        CHECK((d->x2.array() <= 1).all());
        CHECK((d->x3.array() >= 0).all());
        CHECK((d->x3.array() <= 1).all());
        const Eigen::ArrayXd u = (d->x3.array() - 0.4 * d->x1.array() - 0.4 * d->x2.array()) / 0.2;
        CHECK((u >= -1e-12).all());
        CHECK((u <= 1 + 1e-12).all());
      }
      CHECK(train.x1 != test_draw.x1);
    }
  }
}

TEST_CASE("classification labels follow their success probability") {
  ScenarioSpec spec{Scenario::classification, 10000, 1, 1.0, 23};
  auto [train, unused] = generate(spec, 0);
  for (Eigen::Index i = 0; i < 50; ++i)
    CHECK(train.mu(i) == signal(Scenario::classification, train.x1(i), train.x2(i), train.x3(i)));
  const double excess = (train.y - train.mu).sum();
  const double se = std::sqrt((train.mu.array() * (1.0 - train.mu.array())).sum());
  CHECK(std::abs(excess) <= 3 * se);

  // Repeated Bernoulli draws at one fixed point, through the same source.
  const double mu = signal(Scenario::classification, 0.8, 0.3, 0.35);
  hrf::Rng rng(derive_seed(23, "fixed-point"));
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += rng.bernoulli(mu);
  CHECK(std::abs(hits / 10000.0 - mu) <= 3 * std::sqrt(mu * (1 - mu) / 10000.0));
}

TEST_CASE("regression noise has the configured scale") {
  ScenarioSpec spec{Scenario::linear, 20000, 1, 2.0, 4};
  auto [train, unused] = generate(spec, 0);
  const Eigen::VectorXd eps = train.y - train.mu;
  const double sd = std::sqrt((eps.array() - eps.mean()).square().mean());
  CHECK(sd == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("replicate streams do not depend on generation order") {
  ScenarioSpec spec{Scenario::nonlinear, 50, 4, 1.0, 8};
  auto late = generate(spec, 3);
  auto early = generate(spec, 0);
  auto early_again = generate(spec, 0);
  CHECK(generate(spec, 3).first.y == late.first.y);
  CHECK(early.first.y == early_again.first.y);
  CHECK(early.first.y != late.first.y);
}

TEST_CASE("to_dataset column layout") {
  ScenarioSpec spec{Scenario::classification, 20, 1, 1.0, 1};
  auto ds = to_dataset(generate(spec, 0).first, Scenario::classification);
  CHECK(ds.cols() == 4);
  CHECK(ds.column_schema(3).levels == std::vector<std::string>{"N", "P"});
  CHECK(ds.column_schema(2).name == "x3");
}

TEST_CASE("studies are reproducible and schedule independent") {
  ScenarioSpec spec{Scenario::linear, 100, 3, 1.0, 5};
  auto cfg = small_study();
  auto a = run_study(spec, cfg);
  cfg.threads = 3;
  auto b = run_study(spec, cfg);
  CHECK(a.naive.report.mse == b.naive.report.mse);
  CHECK(a.hier.report.mse == b.hier.report.mse);
  CHECK(a.hier.report.pi_coverage == b.hier.report.pi_coverage);
  CHECK(a.naive.predicted == b.naive.predicted);
  CHECK(a.naive.name == "without_proxy");
  CHECK(a.hier.name == "with_proxy");
}

TEST_CASE("bottom layer beats the constant predictor of x3") {
  ScenarioSpec spec{Scenario::linear, 300, 2, 1.0, 6};
  auto r = run_study(spec, small_study());
  const Eigen::VectorXd x3 = r.bottom_observed;
  const double var = (x3.array() - x3.mean()).square().mean();
  CHECK(r.bottom.mse < var);
  CHECK(r.naive.report.pi_coverage.has_value());
  CHECK(std::isfinite(r.naive.report.mse));
}

TEST_CASE("linear arms stay close at desk scale") {
  ScenarioSpec spec{Scenario::linear, 200, 20, 1.0, 2};
  auto cfg = small_study();
  cfg.forest.n_trees = 100;
  cfg.threads = 4;
  auto r = run_study(spec, cfg);
  CHECK(std::abs(r.hier.report.mse - r.naive.report.mse) / r.naive.report.mse <= 0.15);
}

TEST_CASE("tables and plots") {
  const auto dir = test::scratch_dir("simulate_artifacts");
  ScenarioSpec spec{Scenario::linear, 60, 1, 1.0, 3};
  auto r = run_study(spec, small_study());
  auto tables = write_tables(r, dir);
  REQUIRE(tables.size() == 1);
  const auto table = test::slurp(tables[0]);
  CHECK(table.starts_with("arm,bias,sd_paper,mse,pi_coverage\n"));
  CHECK(count_of(table, "\n") == 3);
  CHECK(table.find("without_proxy") != std::string::npos);
  CHECK(table.find("with_proxy") != std::string::npos);

  auto plots = plot_predictions(r, dir);
  REQUIRE(plots.size() == 3);
  for (const auto& p : plots) {
    const auto svg = test::slurp(p);
    CHECK(count_of(svg, "<circle") == 60);
  }
  CHECK(count_of(test::slurp(dir / "linear_with_proxy.svg"), "<polygon") == 1);

  ScenarioSpec cls{Scenario::classification, 60, 1, 1.0, 3};
  auto c = run_study(cls, small_study());
  auto cls_tables = write_tables(c, dir);
  CHECK(cls_tables.size() == 2);
  plot_predictions(c, dir);
  CHECK(count_of(test::slurp(dir / "classification_with_proxy.svg"), "<polygon") == 0);
  REQUIRE(c.naive.confusion.has_value());
  CHECK(c.naive.confusion->total() == 60);

  StudyResult empty;
  CHECK(plot_predictions(empty, dir / "empty").empty());
  CHECK_FALSE(std::filesystem::exists(dir / "empty"));
}
