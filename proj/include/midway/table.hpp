#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace midway {

enum class ColumnType { Id, Binary, Ordered, Categorical, Real };
enum class Role { None, Treatment, Outcome, Centre, Covariate, Scan };

std::string to_string(ColumnType t);
std::string to_string(Role r);

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::Real;
  Role role = Role::None;
  // Ordered/categorical levels in declared order. Categorical columns may
  // leave this empty; ingestion then fills it with the sorted observed values.
  std::vector<std::string> levels;
  // Ordered outcome dichotomization: levels counted as 1.
  std::vector<std::string> positive_levels;

  std::optional<std::size_t> level_index(std::string_view label) const;
};

class Schema {
 public:
  Schema() = default;
  // Validates names (unique, non-empty), exactly one id column, level lists
  // and at most one treatment/outcome/centre role.
  explicit Schema(std::vector<ColumnSpec> columns);

  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t require(std::string_view name) const;
  std::size_t id_column() const { return id_; }
  std::optional<std::size_t> with_role(Role r) const;

  bool operator==(const Schema&) const;

 private:
  friend class PatientTable;
  std::vector<ColumnSpec> columns_;
  std::size_t id_ = 0;
};

Schema parse_schema(std::string_view json_text);
std::string schema_to_json(const Schema& s);

// Column-major patient records. Cells are doubles: binary 0/1, ordered and
// categorical store the 0-based level index, real stores the value; NaN
// marks a missing cell. The id column lives in `ids()`.
class PatientTable {
 public:
  PatientTable() = default;
  PatientTable(Schema schema, std::vector<std::string> ids,
               std::vector<std::vector<double>> cells);

  const Schema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  const std::vector<double>& column(std::size_t c) const { return cells_[c]; }
  const std::vector<double>& column(std::string_view name) const {
    return cells_[schema_.require(name)];
  }
  double cell(std::size_t row, std::size_t c) const { return cells_[c][row]; }
  bool missing(std::size_t row, std::size_t c) const;
  std::size_t missing_count(std::size_t c) const;

  // Numeric view: binary/real as stored; ordered levels coerced to their
  // numeric label when every label is numeric, else 1-based rank.
  double numeric(std::size_t row, std::size_t c) const;
  // 0/1 view of a binary column or a dichotomized ordered column.
  double binary(std::size_t row, std::size_t c) const;
  // Text form of a cell as written to CSV ("" when missing).
  std::string text(std::size_t row, std::size_t c) const;

  PatientTable select_rows(const std::vector<std::size_t>& rows) const;

  bool operator==(const PatientTable& other) const;

 private:
  Schema schema_;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> cells_;
};

PatientTable ingest_csv(std::string_view text, const Schema& schema);
std::string write_csv(const PatientTable& t);

// RFC-4180 style reader, exposed for the SCM and CLI layers.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);
std::string csv_escape(std::string_view field);

struct CompleteCase {
  PatientTable table;
  std::size_t input_rows = 0;
  std::size_t excluded = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_by_column;
};

// Drops rows missing any of `columns`.
CompleteCase complete_cases(const PatientTable& t, const std::vector<std::string>& columns);

}  // namespace midway
