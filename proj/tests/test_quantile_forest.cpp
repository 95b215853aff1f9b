#include <doctest.h>

#include <memory>

#include "hrf/error.hpp"
#include "hrf/quantile_forest.hpp"
#include "hrf/simulate.hpp"
#include "support.hpp"

using namespace hrf;

namespace {

// One tree whose root is a single leaf holding `members`.
std::shared_ptr<Forest> leaf_forest(std::vector<int> members, int n_train) {
  auto f = std::make_shared<Forest>();
  f->config = resolve({.n_trees = 1}, 1);
  f->features = {{"x", false, {}}};
  f->n_train = n_train;
  Tree t;
  t.nodes.push_back({});
  t.nodes[0].member_end = static_cast<int>(members.size());
  t.members = members;
  t.bootstrap = members;
  f->trees = {t};
  return f;
}

Eigen::RowVectorXd at(double x) {
  Eigen::RowVectorXd r(1);
  r << x;
  return r;
}

// F(y | row) from raw leaf memberships, walking the trees without leaf_of.
double oracle_cdf(const Forest& f, const Eigen::VectorXd& y, const Eigen::RowVectorXd& row, double value) {
  double total = 0.0;
  for (const auto& tree : f.trees) {
    int id = 0;
    while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
      const double v = row(nd.feature);
      const bool left = nd.kind == SplitKind::threshold ? v <= nd.cut : v == nd.cut;
      id = left ? nd.left : nd.right;
    }
    const auto& leaf = tree.nodes[static_cast<std::size_t>(id)];
    int below = 0;
    for (int k = leaf.member_begin; k < leaf.member_end; ++k) below += y(tree.members[static_cast<std::size_t>(k)]) <= value;
    total += static_cast<double>(below) / leaf.size();
  }
  return total / static_cast<double>(f.trees.size());
}

}  // namespace

TEST_CASE("a single uniform leaf gives uniform weights") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  QuantileIndex qi(leaf_forest({0, 1, 2, 3}, 4), y);
  CHECK(qi.weights(at(0.0)) == Eigen::VectorXd::Constant(4, 0.25));
  CHECK(qi.quantile(at(0.0), 0.5) == 2.0);
  CHECK(qi.quantile(at(0.0), 0.51) == 3.0);
  CHECK(qi.quantile(at(0.0), 0.999) == 4.0);
  auto pi = qi.interval(at(0.0), 0.9);
  CHECK(pi.lower == qi.quantile(at(0.0), 0.05));
  CHECK(pi.upper == qi.quantile(at(0.0), 0.95));
  CHECK(pi.level == 0.9);
  CHECK_THROWS_AS(qi.quantile(at(0.0), 1.0), ConfigError);
  CHECK_THROWS_AS(qi.interval(at(0.0), 0.0), ConfigError);
}

TEST_CASE("weights follow bootstrap multiplicity and skip absent rows") {
  Eigen::VectorXd y(3);
  y << 2, 4, 100;
  QuantileIndex qi(leaf_forest({0, 1}, 3), y);
  auto w = qi.weights(at(0.0));
  CHECK(w(2) == 0.0);
  CHECK(qi.weighted_mean(at(0.0)) == 3.0);
  CHECK(qi.quantile(at(0.0), 0.999) == 4.0);

  QuantileIndex doubled(leaf_forest({0, 0, 0, 1}, 3), y);
  CHECK(doubled.weights(at(0.0))(0) == 0.75);
  CHECK(doubled.weighted_mean(at(0.0)) == 2.5);
}

TEST_CASE("constant responses give a degenerate interval") {
  Eigen::MatrixXd cells(30, 2);
  for (int i = 0; i < 30; ++i) cells.row(i) << i, 7.0;
  Dataset ds({test::numeric("x"), test::numeric_response("y")}, cells);
  auto f = std::make_shared<Forest>(fit(ds, {.n_trees = 10, .seed = 1}));
  QuantileIndex qi(f, ds.response());
  auto pi = qi.interval(at(3.0), 0.9);
  CHECK(pi.lower == 7.0);
  CHECK(pi.upper == 7.0);
}

TEST_CASE("index construction checks its inputs") {
  Eigen::VectorXd y(2);
  y << 1, 2;
  CHECK_THROWS_AS(QuantileIndex(nullptr, y), ConfigError);
  CHECK_THROWS_AS(QuantileIndex(leaf_forest({0, 1, 2}, 3), y), ConfigError);
  auto cls = leaf_forest({0, 1}, 2);
  cls->config.task = Task::classification;
  CHECK_THROWS_AS(QuantileIndex(cls, y), ConfigError);
}

TEST_CASE("conditional CDF matches a brute-force recomputation on tiny forests") {
  hrf::Rng gen(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(gen.below(4));
    Eigen::MatrixXd cells(n, 3);
    for (int i = 0; i < n; ++i) cells.row(i) << gen.uniform(), gen.uniform(), static_cast<double>(gen.below(4));
    Dataset ds({test::numeric("a"), test::numeric("b"), test::numeric_response("y")}, cells);
    auto f = std::make_shared<Forest>(fit(ds, {.n_trees = 2, .mtry = 1, .min_node_size = 1, .seed = gen.bits()}));
    QuantileIndex qi(f, ds.response());
    const Eigen::VectorXd y = ds.response();
    for (int probe = 0; probe < 5; ++probe) {
      Eigen::RowVectorXd row(2);
      row << gen.uniform(), gen.uniform();
      const Eigen::VectorXd w = qi.weights(row);
      for (int i = 0; i < n; ++i) {
        double cdf = 0.0;
        for (int j = 0; j < n; ++j)
          if (y(j) <= y(i)) cdf += w(j);
        CHECK(cdf == doctest::Approx(oracle_cdf(*f, y, row, y(i))).epsilon(1e-12));
      }
      for (double q : {0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9}) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
          if (oracle_cdf(*f, y, row, y(i)) >= q - kCdfTolerance) best = std::min(best, y(i));
        CHECK(qi.quantile(row, q) == best);
      }
    }
  }
}

TEST_CASE("weights normalize, reproduce the forest mean, and give monotone quantiles") {
  auto ds = test::desk_linear(200, 41);
  auto f = std::make_shared<Forest>(fit(ds, {.n_trees = 60, .seed = 13}));
  QuantileIndex qi(f, ds.response());
  hrf::Rng gen(7);
  for (int k = 0; k < 200; ++k) {
    Eigen::RowVectorXd row(3);
    row << gen.uniform(), gen.uniform(), gen.uniform();
    const Eigen::VectorXd w = qi.weights(row);
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    CHECK((w.array() >= 0).all());
    CHECK(std::abs(qi.weighted_mean(row) - predict_mean(*f, row)) <= 1e-9);
    double prev = -std::numeric_limits<double>::infinity();
    for (double q = 0.05; q < 1.0; q += 0.05) {
      const double v = qi.quantile(row, q);
      CHECK(v >= prev);
      prev = v;
    }
    auto inner = qi.interval(row, 0.5), outer = qi.interval(row, 0.9);
    CHECK(outer.lower <= inner.lower);
    CHECK(inner.upper <= outer.upper);
  }
}

TEST_CASE("90% intervals cover about 90% of fresh linear-scenario draws") {
  ScenarioSpec spec{Scenario::linear, 500, 1, 1.0, 3};
  auto [train, test_draw] = generate(spec, 0);
  auto train_ds = to_dataset(train, Scenario::linear);
  auto test_ds = to_dataset(test_draw, Scenario::linear);
  auto f = std::make_shared<Forest>(fit(train_ds, {.n_trees = 500, .seed = 5}));
  QuantileIndex qi(f, train_ds.response());
  auto pis = qi.intervals(align(*f, test_ds), 0.9);
  int inside = 0;
  for (std::size_t i = 0; i < pis.size(); ++i) inside += pis[i].contains(test_ds.response()(static_cast<Eigen::Index>(i)));
  const double coverage = inside / 500.0;
  CHECK(coverage >= 0.85);
  CHECK(coverage <= 0.95);
}
