#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace hrf {

using Date = std::chrono::sys_days;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);
std::string format_date(Date date);
/// Calendar quarter 1..4.
int quarter_of(Date date);
inline double to_day_number(Date d) { return static_cast<double>(d.time_since_epoch().count()); }
inline Date from_day_number(double days) { return Date(std::chrono::days(static_cast<long>(days))); }

enum class ColumnKind { numeric, categorical, date, response };
enum class ValueType { numeric, categorical };

std::string_view to_string(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  /// Ordered level names. Categorical features and categorical responses only.
  std::vector<std::string> levels;
  /// Value type of a response column.
  ValueType response_type = ValueType::numeric;
  /// Marks a protected attribute; informational, models decide what to read.
  bool is_protected = false;

  bool has_levels() const {
    return kind == ColumnKind::categorical ||
           (kind == ColumnKind::response && response_type == ValueType::categorical);
  }
  /// Index of `level`, or -1.
  int level_index(std::string_view level) const;
};

/// Cell value of a categorical level that was not seen when the column's
/// levels were frozen. It never equals a real level index.
inline constexpr double kOtherLevel = -1.0;
inline constexpr std::string_view kOtherLevelName = "<other>";

/// Column-typed in-memory table. Cells are stored densely as doubles:
/// numeric values as-is, categorical values as level indices, dates as day
/// numbers since 1970-01-01. Exactly one column is the response.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ColumnSchema> schema, Eigen::MatrixXd cells);

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const ColumnSchema& column_schema(Eigen::Index col) const { return schema_[col]; }
  const Eigen::MatrixXd& cells() const { return cells_; }
  Eigen::Index rows() const { return cells_.rows(); }
  Eigen::Index cols() const { return cells_.cols(); }

  std::optional<Eigen::Index> find(std::string_view name) const;
  /// Throws SchemaError when absent.
  Eigen::Index index_of(std::string_view name) const;
  Eigen::Index response_index() const { return response_; }

  auto column(Eigen::Index col) const { return cells_.col(col); }
  auto column(std::string_view name) const { return cells_.col(index_of(name)); }
  auto response() const { return cells_.col(response_); }

  /// Text form of a cell as it would appear in CSV.
  std::string cell_text(Eigen::Index row, Eigen::Index col) const;

  Dataset take_rows(std::span<const Eigen::Index> rows) const;

  /// New table whose columns are `features` followed by `response`, the
  /// latter re-tagged as the response column.
  Dataset project(std::span<const std::string> features, std::string_view response) const;

  /// Appends a non-response column.
  Dataset with_column(ColumnSchema schema, const Eigen::Ref<const Eigen::VectorXd>& values) const;

 private:
  std::vector<ColumnSchema> schema_;
  Eigen::MatrixXd cells_;
  Eigen::Index response_ = -1;
};

struct LoadOptions {
  /// Drop rows containing an empty or "NA" cell instead of failing.
  bool drop_missing_rows = false;
  /// Map categorical values outside a fixed level list to kOtherLevel
  /// instead of failing.
  bool unknown_to_other = false;
};

/// Reads a CSV whose header matches the schema names (in order). Levels of
/// categorical columns with an empty level list are discovered in file order.
Dataset load_csv(std::istream& in, std::vector<ColumnSchema> schema, const LoadOptions& options = {});
Dataset load_csv(const std::filesystem::path& path, std::vector<ColumnSchema> schema,
                 const LoadOptions& options = {});
void write_csv(std::ostream& out, const Dataset& ds);

/// Schema config: a JSON object mapping column name to a kind string, or to
/// an object {"kind": ..., "levels": [...], "type": "numeric"|"categorical",
/// "protected": bool}. Key order is column order.
std::vector<ColumnSchema> load_schema(const std::filesystem::path& path);
std::vector<ColumnSchema> parse_schema(std::string_view json_text);

/// I(quarter 2), I(quarter 3), I(quarter 4) per date; quarter 1 is the
/// reference level.
Eigen::Matrix<double, Eigen::Dynamic, 3> quarter_dummies(std::span<const Date> dates);

struct RandomSplit {
  double fraction = 0.8;
  std::uint64_t seed = 0;
};

struct TemporalSplit {
  Date cutoff;
  /// Empty selects the first date column.
  std::string date_column;
};

using SplitSpec = std::variant<RandomSplit, TemporalSplit>;

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Random: a seeded permutation, floor(fraction * n) rows to train. Temporal:
/// rows strictly before the cutoff train, the rest test. Both keep the
/// original row order within each side.
SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec);
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

}  // namespace hrf
