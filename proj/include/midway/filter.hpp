#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "midway/table.hpp"

namespace midway {

// Boolean expression over columns: comparisons (== != < <= > >=),
// `col in {a, b}`, `and`, `or`, `not`, parentheses, `true`/`false`.
// Type-checked against a schema when parsed.
class StratumFilter {
 public:
  struct Node;

  StratumFilter() = default;

  // Names of referenced columns, sorted and unique.
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::string& source() const noexcept { return source_; }

  // Precondition: no referenced column is missing in `row`.
  bool evaluate(const PatientTable& t, std::size_t row) const;

 private:
  friend StratumFilter parse_filter(std::string_view, const Schema&);
  std::shared_ptr<const Node> root_;
  std::vector<std::string> columns_;
  std::vector<std::size_t> column_index_;
  std::string source_;
};

StratumFilter parse_filter(std::string_view text, const Schema& schema);

struct StratumResult {
  PatientTable table;
  std::size_t input_rows = 0;
  std::size_t excluded_missing = 0;
  std::size_t not_matching = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_by_column;
};

StratumResult apply_stratum(const PatientTable& t, const StratumFilter& f);

}  // namespace midway
