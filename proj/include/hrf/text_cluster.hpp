#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hrf {

/// American Soundex code: one uppercase letter and three digits.
struct SoundexCode {
  std::string code;
  /// Input had no letters; code is the reserved "Z000".
  bool flagged = false;
};

SoundexCode soundex(std::string_view text);

/// Jaro similarity: matches within a window of floor(max(|a|,|b|)/2) - 1,
/// transpositions counted as half the out-of-order matches.
double jaro(std::string_view a, std::string_view b);
/// Winkler's prefix boost sim + l * p * (1 - sim), common prefix l <= 4.
double jaro_winkler(std::string_view a, std::string_view b, double prefix_scale = 0.1);

enum class DistanceMode {
  /// Jaro-Winkler over per-word Soundex codes joined by single spaces.
  soundex_jw,
  /// Jaro-Winkler over the lowercased label.
  raw_jw,
};

DistanceMode parse_distance_mode(std::string_view text);
std::string representation(std::string_view label, DistanceMode mode);
/// 1 - jaro_winkler of the two representations.
double label_distance(std::string_view a, std::string_view b, DistanceMode mode);

struct DistanceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd d;
};

/// Throws ConfigError on duplicate labels.
DistanceMatrix distance_matrix(std::vector<std::string> labels, DistanceMode mode);

enum class Linkage { average, complete, single };
Linkage parse_linkage(std::string_view text);

/// One agglomeration step. Ids below n are leaves; merge i creates id n + i.
struct Merge {
  int left = 0;
  int right = 0;
  double height = 0.0;
  int size = 0;
};

struct MergeTree {
  int n_leaves = 0;
  std::vector<Merge> merges;
};

/// Agglomerative clustering on a symmetric dissimilarity matrix. At each step
/// the closest pair of clusters merges; exact ties go to the pair whose
/// smallest member indices are lexicographically smallest.
MergeTree agglomerate(const Eigen::MatrixXd& d, Linkage linkage = Linkage::average);

/// Cluster ids 1..k after the first n - k merges, numbered by each cluster's
/// smallest member index.
std::vector<int> cut(const MergeTree& tree, int k);

/// Per cluster, the member minimizing the summed distance to its cluster
/// (lowest index on ties). Result[c - 1] is the medoid of cluster c.
std::vector<int> medoids(const Eigen::MatrixXd& d, const std::vector<int>& assignment, int k);
/// Sum over clusters of member-to-medoid distances.
double medoid_cost(const Eigen::MatrixXd& d, const std::vector<int>& assignment, int k);

struct ElbowCurve {
  int k = 0;
  /// cost[k - 1] = W(k) for k = 1..k_max.
  std::vector<double> cost;
};

/// Picks the k in 2..k_max-1 with the largest second difference
/// W(k-1) - 2 W(k) + W(k+1) (smallest k on ties). k_max is capped at n.
ElbowCurve elbow_k(const MergeTree& tree, const Eigen::MatrixXd& d, int k_max);

struct ClusterOptions {
  DistanceMode mode = DistanceMode::soundex_jw;
  Linkage linkage = Linkage::average;
  /// Forced cluster count; elbow selection when empty.
  std::optional<int> k;
  int k_max = 10;
};

struct ClusterModel {
  DistanceMode mode = DistanceMode::soundex_jw;
  Linkage linkage = Linkage::average;
  int k = 0;
  std::vector<std::string> labels;
  /// Cluster id (1..k) per label.
  std::vector<int> assignment;
  /// Label index of each cluster's medoid.
  std::vector<int> medoids;
  MergeTree tree;
  /// Present when k came from the elbow rule.
  std::optional<ElbowCurve> elbow;
};

ClusterModel cluster_labels(std::vector<std::string> labels, const ClusterOptions& options = {});

/// Cluster of a training label, or of the nearest medoid for a new one
/// (lowest cluster id on ties).
int assign(const ClusterModel& model, std::string_view label);

void plot_dendrogram(const ClusterModel& model, const std::filesystem::path& path);

}  // namespace hrf
