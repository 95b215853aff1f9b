#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrf/dataset.hpp"
#include "hrf/forest.hpp"
#include "hrf/hier_model.hpp"
#include "hrf/metrics.hpp"
#include "hrf/text_cluster.hpp"

namespace hrf {

/// One field interview.
struct InterviewRecord {
  std::string sex;
  std::string street;
  std::string district;
  std::string city;
  Date date;
  double priors = 0.0;
  std::string race;
  std::string skin_complexion;
  std::string clothing;
  std::string incident_reason;
};

/// Column order of the records CSV.
inline const std::vector<std::string> kRecordColumns = {
    "sex", "street", "district", "city", "date", "priors", "race", "skin_complexion", "clothing", "incident_reason"};

std::vector<InterviewRecord> read_records(std::istream& in);
std::vector<InterviewRecord> read_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<InterviewRecord>& records);
void write_records(const std::filesystem::path& path, const std::vector<InterviewRecord>& records);

// ---------------------------------------------------------------------------
// Synthetic records

struct SynthSpec {
  int n = 20000;
  std::uint64_t seed = 0;
  /// 0: race independent of every other column. 1: race fixed by district
  /// and appearance columns tied to race.
  double link_strength = 0.8;
  int first_year = 2009;
  int years = 6;
};

/// Fixed level sets used by the generator.
const std::vector<std::string>& synth_races();
const std::vector<std::string>& synth_districts();
/// The full reason vocabulary (233 strings) and each string's true category
/// 1..6.
const std::vector<std::pair<std::string, int>>& synth_reason_vocabulary();

/// Records sorted by date. Daily volume follows a seasonal sinusoid times an
/// AR(1) latent factor; reason categories depend on district, sex, priors,
/// quarter and (mildly) race.
std::vector<InterviewRecord> synth_generate(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessOptions {
  ClusterOptions reason{DistanceMode::soundex_jw, Linkage::average, 6, 10};
  ClusterOptions clothing{DistanceMode::soundex_jw, Linkage::average, 10, 15};
};

/// Modeling table plus the fitted text clusterings.
struct Preprocessed {
  /// Columns: sex, street, district, city, priors, race (protected),
  /// skin_complexion, clothing_cluster, q2, q3, q4, date, and the response
  /// reason_cluster. Categorical levels are sorted; cluster levels are
  /// "R1".."Rk" and "C1".."Ck".
  Dataset data;
  ClusterModel reason;
  ClusterModel clothing;
  /// Reason and clothing cluster (1-based) per record.
  std::vector<int> reason_cluster;
  std::vector<int> clothing_cluster;
};

Preprocessed preprocess(const std::vector<InterviewRecord>& records, const PreprocessOptions& options = {});

// ---------------------------------------------------------------------------
// Incident reason

enum class ArmMode { hier, naive };

struct ReasonConfig {
  std::vector<std::string> proxies = {"street", "district", "city", "skin_complexion", "clothing_cluster"};
  std::vector<std::string> top_covariates = {"sex",  "district", "city", "priors", "skin_complexion",
                                             "clothing_cluster", "q2", "q3", "q4"};
  std::string protected_column = "race";
  ForestConfig forest{.n_trees = 100};
  FeedMode feed = FeedMode::out_of_bag;
  std::uint64_t seed = 0;
};

struct ReasonModel {
  ArmMode mode = ArmMode::hier;
  std::optional<HierarchicalModel> hier;
  std::optional<Forest> naive;
};

/// hier: proxies -> race, then top covariates + predicted race -> reason
/// cluster. naive: top covariates + race -> reason cluster.
ReasonModel fit_reason_model(const Dataset& ds, ArmMode mode, const ReasonConfig& config);
/// Predicted reason cluster (class index) per row.
Eigen::VectorXd predict_reason(const ReasonModel& model, const Dataset& ds);

struct ReasonComparison {
  double hier_accuracy = 0.0;
  double naive_accuracy = 0.0;
  /// Bottom-layer race accuracy on the test rows.
  double race_accuracy = 0.0;
  long n_test_hier = 0;
  long n_test_naive = 0;
  ConfusionMatrix hier_confusion;
  ConfusionMatrix naive_confusion;
  ReasonModel hier;
  ReasonModel naive;
};

/// Both arms on one seeded random split (train_fraction to training).
ReasonComparison compare_reason(const Dataset& ds, const ReasonConfig& config, double train_fraction = 0.8);

// ---------------------------------------------------------------------------
// Daily occurrence

/// Calendar-complete daily aggregates. Proportion blocks are days x levels;
/// days without interviews carry zeros and are flagged. Row t of a lag block
/// is row t - 1 of the raw block (row 0 is zero).
struct DailyPanel {
  std::vector<Date> dates;
  Eigen::VectorXd count;
  std::vector<std::string> reason_levels, race_levels, district_levels;
  Eigen::MatrixXd reason, race, district;
  Eigen::Matrix<double, Eigen::Dynamic, 3> quarter;
  std::vector<bool> empty_day;

  Eigen::VectorXd lag_count;
  Eigen::MatrixXd lag_reason, lag_race, lag_district;

  Eigen::Index days() const { return static_cast<Eigen::Index>(dates.size()); }
};

/// `reason` and `race` hold per-record level indices into the level lists
/// (race may be a predicted class). Throws Error on an empty record set.
DailyPanel build_daily_panel(std::span<const Date> dates, std::span<const int> reason,
                             std::vector<std::string> reason_levels, std::span<const int> race,
                             std::vector<std::string> race_levels, std::span<const std::string> district,
                             std::vector<std::string> district_levels);

/// Modeling rows for panel days 1..end: response "count", features lag1_count,
/// lag1_reason_*, lag1_<race_prefix>_*, lag1_district_*, q2, q3, q4, and a
/// "date" column used only for splitting.
Dataset occurrence_dataset(const DailyPanel& panel, const std::string& race_prefix);

struct OccurrenceConfig {
  ForestConfig forest{.n_trees = 300};
  double level = 0.9;
  Date cutoff = Date(std::chrono::year(2014) / 1 / 1);
  /// Restrict to one district instead of city-wide totals.
  std::optional<std::string> district;
  std::uint64_t seed = 0;
};

struct OccurrenceArm {
  std::string name;
  RegressionReport report;
  std::vector<Date> dates;
  Eigen::VectorXd truth, predicted, lower, upper;
  Forest forest;
};

struct OccurrenceComparison {
  OccurrenceArm hier;
  OccurrenceArm naive;
  /// Race classifier used for the hier arm's proportions.
  Forest race_model;
  long n_train = 0;
  long n_test = 0;
};

/// Regression forests on the daily panel, trained before the cutoff and
/// scored one step ahead after it. The naive arm sees lagged observed-race
/// proportions; the hier arm sees lagged proportions of race predicted from
/// the reason config's proxies by a forest fit on pre-cutoff records only.
OccurrenceComparison compare_occurrence(const Preprocessed& prep, const ReasonConfig& reason,
                                        const OccurrenceConfig& config);

// ---------------------------------------------------------------------------
// Artifacts

/// "arm,accuracy,n_test" with rows hier and naive.
void write_reason_table(std::ostream& out, const ReasonComparison& cmp);
/// "arm,bias,sd_paper,mse,pi_coverage".
void write_occurrence_table(std::ostream& out, const OccurrenceComparison& cmp);
/// date, truth, then prediction/lower/upper for each arm.
void write_forecast(std::ostream& out, const OccurrenceComparison& cmp);
void plot_forecast(const OccurrenceComparison& cmp, const std::filesystem::path& path);

}  // namespace hrf
