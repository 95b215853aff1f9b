#pragma once

// Shared fixtures for the unit and acceptance tests: small table builders,
// hand-rolled random generators, scratch directories.

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "hrf/dataset.hpp"
#include "hrf/rng.hpp"

namespace test {

inline hrf::ColumnSchema numeric(std::string name) { return {std::move(name), hrf::ColumnKind::numeric, {}}; }

inline hrf::ColumnSchema categorical(std::string name, std::vector<std::string> levels = {}) {
  return {std::move(name), hrf::ColumnKind::categorical, std::move(levels)};
}

inline hrf::ColumnSchema numeric_response(std::string name) {
  return {std::move(name), hrf::ColumnKind::response, {}, hrf::ValueType::numeric};
}

inline hrf::ColumnSchema class_response(std::string name, std::vector<std::string> levels) {
  return {std::move(name), hrf::ColumnKind::response, std::move(levels), hrf::ValueType::categorical};
}

inline hrf::Dataset load(const std::string& text, std::vector<hrf::ColumnSchema> schema,
                         const hrf::LoadOptions& options = {}) {
  std::istringstream in(text);
  return hrf::load_csv(in, std::move(schema), options);
}

/// Scenario-style desk table: x1, x2 uniform, x3 = 0.4 x1 + 0.4 x2 + 0.2 u,
/// y = 3 x1 + 3 x2 + 2 x3 + N(0, 1).
inline hrf::Dataset desk_linear(int n, std::uint64_t seed) {
  hrf::Rng rng(seed);
  Eigen::MatrixXd cells(n, 4);
  for (int i = 0; i < n; ++i) {
    const double x1 = rng.uniform(), x2 = rng.uniform();
    const double x3 = 0.4 * x1 + 0.4 * x2 + 0.2 * rng.uniform();
    cells.row(i) << x1, x2, x3, 3 * x1 + 3 * x2 + 2 * x3 + rng.normal();
  }
  return hrf::Dataset({numeric("x1"), numeric("x2"), numeric("x3"), numeric_response("y")}, cells);
}

/// Random string of printable ASCII, length 0..max_len.
inline std::string printable(hrf::Rng& rng, int max_len) {
  const auto len = rng.below(static_cast<std::uint64_t>(max_len) + 1);
  std::string s;
  for (std::uint64_t i = 0; i < len; ++i) s += static_cast<char>(' ' + rng.below(95));
  return s;
}

/// Random word over a small alphabet so that matches are common.
inline std::string word(hrf::Rng& rng, int min_len, int max_len, std::string_view alphabet = "ABCDEHMRT") {
  const auto len = static_cast<int>(min_len + rng.below(static_cast<std::uint64_t>(max_len - min_len + 1)));
  std::string s;
  for (int i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
  return s;
}

/// Symmetric zero-diagonal matrix with U(0,1) off-diagonal entries.
inline Eigen::MatrixXd random_dissimilarity(int n, hrf::Rng& rng) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = rng.uniform();
  return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hrf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace test
