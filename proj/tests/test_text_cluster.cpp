#include <doctest.h>

#include <fstream>
#include <regex>
#include <set>

#include "hrf/csv.hpp"
#include "hrf/error.hpp"
#include "hrf/text_cluster.hpp"
#include "oracles/hclust_oracle.hpp"
#include "oracles/jaro_oracle.hpp"
#include "oracles/soundex_oracle.hpp"
#include "support.hpp"

using namespace hrf;

namespace {

oracle::Link to_oracle(Linkage l) {
  switch (l) {
    case Linkage::average: return oracle::Link::average;
    case Linkage::complete: return oracle::Link::complete;
    default: return oracle::Link::single;
  }
}

std::string oracle_representation(const std::string& label) {
  std::string out, w;
  auto flush = [&] {
    if (w.empty()) return;
    std::string letters;
    for (char c : w) letters += std::isalpha(static_cast<unsigned char>(c)) ? "x" : "";
    if (!letters.empty()) out += (out.empty() ? "" : " ") + oracle::soundex(w);
    w.clear();
  };
  for (char c : label) {
    if (c == ' ') flush();
    else w += c;
  }
  flush();
  return out.empty() ? "Z000" : out;
}

// Two tight groups: within-group distance 0.05, between 0.9.
Eigen::MatrixXd two_blocks(int a, int b) {
  const int n = a + b;
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = i == j ? 0.0 : ((i < a) == (j < a) ? 0.05 : 0.9);
  return d;
}

}  // namespace

TEST_CASE("soundex examples") {
  CHECK(soundex("Robert").code == "R163");
  CHECK(soundex("Rupert").code == "R163");
  CHECK(soundex("A").code == "A000");
  CHECK(soundex("tymczak").code == "T522");
  CHECK(soundex("O'Hara").code == "O600");
  auto none = soundex("1234 !");
  CHECK(none.code == "Z000");
  CHECK(none.flagged);
  CHECK(soundex("").flagged);
  CHECK_FALSE(soundex("Lee").flagged);
}

TEST_CASE("soundex agrees with the committed vector file") {
  auto table = read_csv_file(std::string(HRF_TEST_DATA_DIR) + "/soundex_vectors.csv");
  REQUIRE(table.header == std::vector<std::string>{"name", "code"});
  REQUIRE(table.rows.size() == 20);
  for (const auto& row : table.rows) CHECK_MESSAGE(soundex(row[0]).code == row[1], row[0]);
}

TEST_CASE("soundex codes keep their shape on arbitrary printable input") {
  const std::regex shape("[A-Z][0-9]{3}");
  hrf::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto s = test::printable(rng, 16);
    const auto code = soundex(s);
    CHECK(std::regex_match(code.code, shape));
    CHECK(code.code == oracle::soundex(s));
    const bool has_letter = std::any_of(s.begin(), s.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
    CHECK(code.flagged == !has_letter);
  }
}

TEST_CASE("jaro-winkler examples") {
  CHECK(jaro_winkler("MARTHA", "MARTHA") == 1.0);
  CHECK(jaro_winkler("ABC", "XYZ") == 0.0);
  CHECK(jaro("MARTHA", "MARHTA") == doctest::Approx((1.0 + 1.0 + 5.0 / 6.0) / 3.0).epsilon(1e-15));
  CHECK(jaro_winkler("MARTHA", "MARHTA") == doctest::Approx(0.961111111111).epsilon(1e-9));
  CHECK(jaro_winkler("DWAYNE", "DUANE") == doctest::Approx(0.84).epsilon(1e-9));
  CHECK(jaro_winkler("DIXON", "DICKSONX") == doctest::Approx(0.813333333333).epsilon(1e-9));
  CHECK(jaro_winkler("", "") == 1.0);
  CHECK(jaro_winkler("A", "") == 0.0);
  CHECK(jaro_winkler("MARTHA", "MARHTA", 0.0) == jaro("MARTHA", "MARHTA"));
  CHECK_THROWS_AS(jaro_winkler("A", "B", 0.3), ConfigError);
  CHECK_THROWS_AS(jaro_winkler("A", "B", -0.1), ConfigError);
}

TEST_CASE("jaro-winkler matches the direct-formula oracle and is symmetric") {
  hrf::Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const auto a = test::word(rng, 0, 9), b = test::word(rng, 0, 9);
    CHECK(std::abs(jaro_winkler(a, b) - oracle::jaro_winkler(a, b)) <= 1e-9);
    CHECK(jaro_winkler(a, b) == doctest::Approx(jaro_winkler(b, a)).epsilon(1e-15));
    CHECK(jaro_winkler(a, a) == 1.0);
    const double v = jaro_winkler(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("representations") {
  CHECK(representation("Larceny Theft", DistanceMode::soundex_jw) == "L625 T130");
  CHECK(representation("  Theft  2 ", DistanceMode::soundex_jw) == "T130");
  CHECK(representation("123", DistanceMode::soundex_jw) == "Z000");
  CHECK(representation("Larceny", DistanceMode::raw_jw) == "larceny");
  CHECK(parse_distance_mode("raw-jw") == DistanceMode::raw_jw);
  CHECK_THROWS_AS(parse_distance_mode("cosine"), ConfigError);
  CHECK(label_distance("Theft", "Theft2", DistanceMode::soundex_jw) == 0.0);
}

TEST_CASE("distance matrices") {
  const std::vector<std::string> labels = {"Larceny", "Larceny Theft", "Assault", "Assalt Battery"};
  auto dm = distance_matrix(labels, DistanceMode::soundex_jw);
  REQUIRE(dm.d.rows() == 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double expect = 1.0 - oracle::jaro_winkler(oracle_representation(labels[static_cast<std::size_t>(i)]),
                                                       oracle_representation(labels[static_cast<std::size_t>(j)]));
      CHECK(dm.d(i, j) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(dm.d(i, j) == dm.d(j, i));
      CHECK(dm.d(i, j) >= 0.0);
      CHECK(dm.d(i, j) <= 1.0);
    }
  CHECK(dm.d.diagonal().isZero());
  CHECK_THROWS_AS(distance_matrix({"a", "b", "a"}, DistanceMode::raw_jw), ConfigError);
}

TEST_CASE("agglomeration basics") {
  Eigen::MatrixXd two(2, 2);
  two << 0, 0.4, 0.4, 0;
  auto t = agglomerate(two);
  REQUIRE(t.merges.size() == 1);
  CHECK(t.merges[0].height == 0.4);
  CHECK(t.merges[0].size == 2);

  Eigen::MatrixXd three(3, 3);
  three << 0, 0.8, 0.9, 0.8, 0, 0.1, 0.9, 0.1, 0;
  auto m = agglomerate(three);
  CHECK(m.merges[0].left == 1);
  CHECK(m.merges[0].right == 2);
  CHECK(m.merges[1].left == 0);
  CHECK(m.merges[1].right == 3);
  CHECK(m.merges[1].height == doctest::Approx(0.85));

  CHECK_THROWS_AS(agglomerate(Eigen::MatrixXd::Zero(1, 1)), ConfigError);
  CHECK_THROWS_AS(agglomerate(Eigen::MatrixXd::Zero(2, 3)), ConfigError);
  CHECK(parse_linkage("complete") == Linkage::complete);
}

TEST_CASE("agglomeration reproduces the brute-force oracle") {
  hrf::Rng rng(13);
  for (int seed = 0; seed < 100; ++seed) {
    const int n = 2 + seed % 5;
    // Coarse values make exact ties common, exercising the tie rule.
    Eigen::MatrixXd d = test::random_dissimilarity(n, rng);
    if (seed % 2) d = (d * 4).array().round() / 4;
    for (auto link : {Linkage::average, Linkage::complete, Linkage::single}) {
      auto tree = agglomerate(d, link);
      auto ref = oracle::hclust(d, to_oracle(link));
      REQUIRE(tree.merges.size() == ref.size());
      for (std::size_t s = 0; s < ref.size(); ++s) {
        CHECK(tree.merges[s].left == ref[s].left);
        CHECK(tree.merges[s].right == ref[s].right);
        CHECK(tree.merges[s].size == ref[s].size);
        CHECK(tree.merges[s].height == doctest::Approx(ref[s].height).epsilon(1e-12));
      }
      for (std::size_t s = 1; s < ref.size(); ++s) CHECK(tree.merges[s].height >= tree.merges[s - 1].height - 1e-12);
    }
  }
}

TEST_CASE("cuts number clusters by smallest member") {
  hrf::Rng rng(14);
  auto d = test::random_dissimilarity(7, rng);
  auto tree = agglomerate(d);
  auto singletons = cut(tree, 7);
  for (int i = 0; i < 7; ++i) CHECK(singletons[static_cast<std::size_t>(i)] == i + 1);
  auto one = cut(tree, 1);
  CHECK(std::all_of(one.begin(), one.end(), [](int c) { return c == 1; }));
  for (int k = 1; k <= 7; ++k) {
    auto a = cut(tree, k);
    CHECK(a[0] == 1);
    int next = 1;
    for (int c : a) {
      CHECK(c <= next);
      if (c == next) ++next;
    }
    CHECK(next == k + 1);
  }
  CHECK_THROWS_AS(cut(tree, 0), ConfigError);
  CHECK_THROWS_AS(cut(tree, 8), ConfigError);
}

TEST_CASE("medoids break ties toward the lowest index") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 0.5, 0.5, 0.5, 0, 0.5, 0.5, 0.5, 0;
  CHECK(medoids(d, {1, 1, 1}, 1) == std::vector<int>{0});
  Eigen::MatrixXd e(3, 3);
  e << 0, 0.3, 0.6, 0.3, 0, 0.3, 0.6, 0.3, 0;
  CHECK(medoids(e, {1, 1, 1}, 1) == std::vector<int>{1});
  CHECK(medoid_cost(e, {1, 1, 1}, 1) == doctest::Approx(0.6));
  CHECK(medoid_cost(e, {1, 2, 3}, 3) == 0.0);
}

TEST_CASE("elbow picks two well-separated groups") {
  auto d = two_blocks(4, 5);
  auto tree = agglomerate(d);
  auto curve = elbow_k(tree, d, 6);
  CHECK(curve.k == 2);
  REQUIRE(curve.cost.size() == 6);
  for (std::size_t k = 1; k < curve.cost.size(); ++k) CHECK(curve.cost[k] <= curve.cost[k - 1]);
  CHECK_THROWS_AS(elbow_k(tree, d, 2), ConfigError);
  CHECK_THROWS_AS(elbow_k(agglomerate(two_blocks(1, 1)), two_blocks(1, 1), 5), ConfigError);
}

TEST_CASE("cluster models are consistent with their merge tree") {
  const std::vector<std::string> labels = {"Larceny", "Larceny Theft", "Larcny", "Theft", "Thft", "Assault",
                                           "Assault Battery", "Asault", "Investigate Person", "Investigate Prop"};
  auto forced = cluster_labels(labels, {.k = 4});
  CHECK(forced.k == 4);
  CHECK_FALSE(forced.elbow.has_value());
  CHECK(cut(forced.tree, 4) == forced.assignment);
  std::set<int> ids(forced.assignment.begin(), forced.assignment.end());
  CHECK(ids == std::set<int>{1, 2, 3, 4});
  for (int c = 1; c <= 4; ++c)
    CHECK(forced.assignment[static_cast<std::size_t>(forced.medoids[static_cast<std::size_t>(c - 1)])] == c);

  ClusterOptions by_elbow;
  by_elbow.k_max = 6;
  auto elbow = cluster_labels(labels, by_elbow);
  REQUIRE(elbow.elbow.has_value());
  CHECK(elbow.k >= 2);
  CHECK(elbow.k <= 5);
  CHECK(elbow.k == elbow.elbow->k);

  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(assign(forced, labels[i]) == forced.assignment[i]);
  CHECK(assign(forced, "Larcenny") == forced.assignment[0]);
}

TEST_CASE("assignment ties go to the lowest cluster id") {
  auto model = cluster_labels({"aaaa", "bbbb"}, {.mode = DistanceMode::raw_jw, .k = 2});
  CHECK(assign(model, "aaaa") == 1);
  CHECK(assign(model, "bbbb") == 2);
  CHECK(assign(model, "zzzz") == 1);
}

TEST_CASE("dendrogram output") {
  const auto dir = test::scratch_dir("dendrogram");
  auto model = cluster_labels({"Larceny", "Theft", "Thft", "Assault"}, {.k = 2});
  plot_dendrogram(model, dir / "tree.svg");
  const auto a = test::slurp(dir / "tree.svg");
  CHECK((a.starts_with("<?xml") || a.starts_with("<svg")));
  CHECK(a.find("Larceny") != std::string::npos);
  plot_dendrogram(model, dir / "again.svg");
  CHECK(test::slurp(dir / "again.svg") == a);
}
