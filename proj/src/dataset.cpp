#include "hrf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "hrf/csv.hpp"
#include "hrf/error.hpp"
#include "hrf/rng.hpp"

namespace hrf {

namespace chr = std::chrono;

Date parse_date(std::string_view text) {
  auto digits = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') throw ParseError("invalid date '" + std::string(text) + "'");
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw ParseError("invalid date '" + std::string(text) + "'");
  const chr::year_month_day ymd{chr::year(digits(0, 4)), chr::month(static_cast<unsigned>(digits(5, 2))),
                                chr::day(static_cast<unsigned>(digits(8, 2)))};
  if (!ymd.ok()) throw ParseError("invalid date '" + std::string(text) + "'");
  return Date(ymd);
}

std::string format_date(Date date) {
  const chr::year_month_day ymd(date);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int quarter_of(Date date) {
  const unsigned month = static_cast<unsigned>(chr::year_month_day(date).month());
  return static_cast<int>((month - 1) / 3 + 1);
}

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::date: return "date";
    case ColumnKind::response: return "response";
  }
  return "numeric";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric") return ColumnKind::numeric;
  if (text == "categorical") return ColumnKind::categorical;
  if (text == "date") return ColumnKind::date;
  if (text == "response") return ColumnKind::response;
  throw SchemaError("unknown column kind '" + std::string(text) + "'");
}

int ColumnSchema::level_index(std::string_view level) const {
  const auto it = std::find(levels.begin(), levels.end(), level);
  return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
}

namespace {

void validate_schema(const std::vector<ColumnSchema>& schema, bool require_levels) {
  std::set<std::string> names;
  int responses = 0;
  for (const auto& col : schema) {
    if (!names.insert(col.name).second) throw SchemaError("duplicate column '" + col.name + "'");
    if (col.kind == ColumnKind::response) ++responses;
    if (!col.has_levels() && !col.levels.empty())
      throw SchemaError("column '" + col.name + "' is not categorical but declares levels");
    if (require_levels && col.kind == ColumnKind::categorical && col.levels.empty())
      throw SchemaError("categorical column '" + col.name + "' has no levels");
    std::set<std::string> seen;
    for (const auto& l : col.levels) {
      if (!seen.insert(l).second) throw SchemaError("duplicate level '" + l + "' in '" + col.name + "'");
    }
  }
  if (responses != 1)
    throw SchemaError("a dataset needs exactly one response column, found " + std::to_string(responses));
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA"; }

}  // namespace

Dataset::Dataset(std::vector<ColumnSchema> schema, Eigen::MatrixXd cells)
    : schema_(std::move(schema)), cells_(std::move(cells)) {
  validate_schema(schema_, false);
  if (cells_.cols() != static_cast<Eigen::Index>(schema_.size()))
    throw SchemaError("cell matrix has " + std::to_string(cells_.cols()) + " columns, schema has " +
                      std::to_string(schema_.size()));
  for (Eigen::Index c = 0; c < cols(); ++c) {
    const auto& col = schema_[c];
    if (col.kind == ColumnKind::response) response_ = c;
    if (!col.has_levels()) continue;
    const double nlev = static_cast<double>(col.levels.size());
    for (Eigen::Index r = 0; r < rows(); ++r) {
      const double v = cells_(r, c);
      if (v == kOtherLevel) continue;
      if (v < 0 || v >= nlev || v != std::floor(v))
        throw SchemaError("cell (" + std::to_string(r) + ", " + col.name + ") is not a level index");
    }
  }
}

std::optional<Eigen::Index> Dataset::find(std::string_view name) const {
  for (std::size_t c = 0; c < schema_.size(); ++c)
    if (schema_[c].name == name) return static_cast<Eigen::Index>(c);
  return std::nullopt;
}

Eigen::Index Dataset::index_of(std::string_view name) const {
  if (auto c = find(name)) return *c;
  throw SchemaError("no column named '" + std::string(name) + "'");
}

std::string Dataset::cell_text(Eigen::Index row, Eigen::Index col) const {
  const auto& s = schema_[col];
  const double v = cells_(row, col);
  if (s.has_levels()) return v == kOtherLevel ? std::string(kOtherLevelName) : s.levels[static_cast<std::size_t>(v)];
  if (s.kind == ColumnKind::date) return format_date(from_day_number(v));
  return format_number(v);
}

Dataset Dataset::take_rows(std::span<const Eigen::Index> rows) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = cells_.row(rows[i]);
  return Dataset(schema_, std::move(out));
}

Dataset Dataset::project(std::span<const std::string> features, std::string_view response) const {
  std::vector<ColumnSchema> schema;
  std::vector<Eigen::Index> source;
  for (const auto& name : features) {
    if (name == response) throw SchemaError("'" + name + "' cannot be both feature and response");
    ColumnSchema col = schema_[index_of(name)];
    if (col.kind == ColumnKind::response)
      col.kind = col.response_type == ValueType::categorical ? ColumnKind::categorical : ColumnKind::numeric;
    schema.push_back(std::move(col));
    source.push_back(index_of(name));
  }
  ColumnSchema resp = schema_[index_of(response)];
  if (resp.kind != ColumnKind::response)
    resp.response_type = resp.kind == ColumnKind::categorical ? ValueType::categorical : ValueType::numeric;
  resp.kind = ColumnKind::response;
  schema.push_back(std::move(resp));
  source.push_back(index_of(response));

  Eigen::MatrixXd out(rows(), static_cast<Eigen::Index>(source.size()));
  for (std::size_t j = 0; j < source.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = cells_.col(source[j]);
  return Dataset(std::move(schema), std::move(out));
}

Dataset Dataset::with_column(ColumnSchema schema, const Eigen::Ref<const Eigen::VectorXd>& values) const {
  if (schema.kind == ColumnKind::response) throw SchemaError("dataset already has a response column");
  if (values.size() != rows()) throw SchemaError("column '" + schema.name + "' has the wrong length");
  auto cols = schema_;
  cols.push_back(std::move(schema));
  Eigen::MatrixXd out(rows(), this->cols() + 1);
  out.leftCols(this->cols()) = cells_;
  out.col(this->cols()) = values;
  return Dataset(std::move(cols), std::move(out));
}

Dataset load_csv(std::istream& in, std::vector<ColumnSchema> schema, const LoadOptions& options) {
  validate_schema(schema, false);
  const CsvTable table = read_csv(in);
  if (table.header.size() != schema.size())
    throw ParseError("header has " + std::to_string(table.header.size()) + " columns, schema has " +
                     std::to_string(schema.size()), 0);
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (table.header[c] != schema[c].name)
      throw SchemaError("header column " + std::to_string(c + 1) + " is '" + table.header[c] + "', schema expects '" +
                        schema[c].name + "'");
  }
  std::vector<bool> discover(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) discover[c] = schema[c].has_levels() && schema[c].levels.empty();

  std::vector<double> values;
  values.reserve(table.rows.size() * schema.size());
  std::vector<double> row_values(schema.size());
  Eigen::Index kept = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const long row_no = static_cast<long>(r) + 1;
    const auto& row = table.rows[r];
    if (row.size() != schema.size())
      throw ParseError("expected " + std::to_string(schema.size()) + " fields, found " + std::to_string(row.size()),
                       row_no);
    if (std::any_of(row.begin(), row.end(), [](const std::string& s) { return is_missing(s); })) {
      if (options.drop_missing_rows) continue;
      throw ParseError("missing value", row_no);
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
      auto& col = schema[c];
      const std::string& cell = row[c];
      if (col.has_levels()) {
        int idx = col.level_index(cell);
        if (idx < 0) {
          if (discover[c]) {
            col.levels.push_back(cell);
            idx = static_cast<int>(col.levels.size()) - 1;
          } else if (options.unknown_to_other || cell == kOtherLevelName) {
            row_values[c] = kOtherLevel;
            continue;
          } else {
            throw SchemaError("row " + std::to_string(row_no) + ": unknown level '" + cell + "' in column '" +
                              col.name + "'");
          }
        }
        row_values[c] = idx;
      } else if (col.kind == ColumnKind::date) {
        try {
          row_values[c] = to_day_number(parse_date(cell));
        } catch (const ParseError& e) {
          throw ParseError(e.what(), row_no);
        }
      } else if (!parse_number(cell, row_values[c])) {
        throw ParseError("column '" + col.name + "': '" + cell + "' is not a number", row_no);
      }
    }
    values.insert(values.end(), row_values.begin(), row_values.end());
    ++kept;
  }
  Eigen::MatrixXd cells =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), kept, static_cast<Eigen::Index>(schema.size()));
  return Dataset(std::move(schema), std::move(cells));
}

Dataset load_csv(const std::filesystem::path& path, std::vector<ColumnSchema> schema, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_csv(in, std::move(schema), options);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  std::vector<std::string> fields;
  for (const auto& col : ds.schema()) fields.push_back(col.name);
  write_csv_row(out, fields);
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.cols(); ++c) fields[static_cast<std::size_t>(c)] = ds.cell_text(r, c);
    write_csv_row(out, fields);
  }
}

std::vector<ColumnSchema> parse_schema(std::string_view json_text) {
  using Json = nlohmann::ordered_json;
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("schema config: ") + e.what());
  }
  if (doc.contains("columns")) doc = doc["columns"];
  if (!doc.is_object()) throw SchemaError("schema config must map column names to kinds");
  std::vector<ColumnSchema> schema;
  for (const auto& [name, spec] : doc.items()) {
    ColumnSchema col;
    col.name = name;
    if (spec.is_string()) {
      col.kind = parse_column_kind(spec.get<std::string>());
    } else if (spec.is_object()) {
      col.kind = parse_column_kind(spec.value("kind", std::string("numeric")));
      col.levels = spec.value("levels", std::vector<std::string>{});
      col.is_protected = spec.value("protected", false);
      if (spec.value("type", std::string("numeric")) == "categorical") col.response_type = ValueType::categorical;
    } else {
      throw SchemaError("schema entry for '" + name + "' must be a string or object");
    }
    schema.push_back(std::move(col));
  }
  validate_schema(schema, false);
  return schema;
}

std::vector<ColumnSchema> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

Eigen::Matrix<double, Eigen::Dynamic, 3> quarter_dummies(std::span<const Date> dates) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> out =
      Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(static_cast<Eigen::Index>(dates.size()), 3);
  for (std::size_t i = 0; i < dates.size(); ++i) {
    const int q = quarter_of(dates[i]);
    if (q > 1) out(static_cast<Eigen::Index>(i), q - 2) = 1.0;
  }
  return out;
}

SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec) {
  SplitIndices out;
  const Eigen::Index n = ds.rows();
  if (const auto* random = std::get_if<RandomSplit>(&spec)) {
    if (!(random->fraction > 0.0 && random->fraction < 1.0))
      throw ConfigError("split fraction must lie in (0, 1)");
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Rng rng(random->seed);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    const auto n_train = static_cast<std::size_t>(std::floor(random->fraction * static_cast<double>(n) + 1e-9));
    out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
  } else {
    const auto& temporal = std::get<TemporalSplit>(spec);
    Eigen::Index date_col = -1;
    if (!temporal.date_column.empty()) {
      date_col = ds.index_of(temporal.date_column);
      if (ds.column_schema(date_col).kind != ColumnKind::date)
        throw SchemaError("column '" + temporal.date_column + "' is not a date column");
    } else {
      for (Eigen::Index c = 0; c < ds.cols() && date_col < 0; ++c)
        if (ds.column_schema(c).kind == ColumnKind::date) date_col = c;
      if (date_col < 0) throw SchemaError("temporal split needs a date column");
    }
    const double cutoff = to_day_number(temporal.cutoff);
    for (Eigen::Index r = 0; r < n; ++r) (ds.cells()(r, date_col) < cutoff ? out.train : out.test).push_back(r);
  }
  if (out.train.empty() || out.test.empty())
    throw DegenerateSplitError("split leaves " + std::string(out.train.empty() ? "train" : "test") + " empty");
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds, spec);
  return {ds.take_rows(idx.train), ds.take_rows(idx.test)};
}

}  // namespace hrf
