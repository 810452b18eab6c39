#include "midway/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "midway/error.hpp"

namespace midway {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> parse_binary(std::string_view s) {
  if (s == "1" || s == "true" || s == "TRUE") return 1.0;
  if (s == "0" || s == "false" || s == "FALSE") return 0.0;
  return std::nullopt;
}

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

const std::map<std::string, ColumnType>& type_names() {
  static const std::map<std::string, ColumnType> m{
      {"id", ColumnType::Id},           {"binary", ColumnType::Binary},
      {"ordered", ColumnType::Ordered}, {"categorical", ColumnType::Categorical},
      {"real", ColumnType::Real}};
  return m;
}

const std::map<std::string, Role>& role_names() {
  static const std::map<std::string, Role> m{
      {"none", Role::None},         {"treatment", Role::Treatment}, {"outcome", Role::Outcome},
      {"centre", Role::Centre},     {"covariate", Role::Covariate}, {"scan", Role::Scan}};
  return m;
}

bool same_cell(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace

std::string to_string(ColumnType t) {
  for (const auto& [k, v] : type_names()) {
    if (v == t) return k;
  }
  return "?";
}

std::string to_string(Role r) {
  for (const auto& [k, v] : role_names()) {
    if (v == r) return k;
  }
  return "?";
}

std::optional<std::size_t> ColumnSpec::level_index(std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return i;
  }
  return std::nullopt;
}

Schema::Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  std::size_t ids = 0;
  std::map<Role, std::string> unique_roles;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& c = columns_[i];
    if (c.name.empty()) throw Error(ErrorKind::Schema, "column with empty name");
    if (!names.insert(c.name).second) {
      throw Error(ErrorKind::Schema, "duplicate column '" + c.name + "'");
    }
    if (c.type == ColumnType::Id) {
      ++ids;
      id_ = i;
    }
    if (c.type == ColumnType::Ordered && c.levels.empty()) {
      throw Error(ErrorKind::Schema, "ordered column '" + c.name + "' needs a level list");
    }
    std::set<std::string> lv(c.levels.begin(), c.levels.end());
    if (lv.size() != c.levels.size()) {
      throw Error(ErrorKind::Schema, "duplicate level in column '" + c.name + "'");
    }
    if (!c.levels.empty() && c.type != ColumnType::Ordered && c.type != ColumnType::Categorical) {
      throw Error(ErrorKind::Schema, "levels given for non-factor column '" + c.name + "'");
    }
    for (const auto& p : c.positive_levels) {
      if (c.type != ColumnType::Ordered || !lv.count(p)) {
        throw Error(ErrorKind::Schema,
                    "positive level '" + p + "' is not a level of ordered column '" + c.name + "'");
      }
    }
    if (c.role == Role::Treatment || c.role == Role::Outcome || c.role == Role::Centre) {
      auto [it, fresh] = unique_roles.emplace(c.role, c.name);
      if (!fresh) {
        throw Error(ErrorKind::Schema, "role " + to_string(c.role) + " assigned to both '" +
                                           it->second + "' and '" + c.name + "'");
      }
    }
    if (c.role == Role::Treatment && c.type != ColumnType::Binary) {
      throw Error(ErrorKind::Schema, "treatment column '" + c.name + "' must be binary");
    }
    if (c.role == Role::Outcome && c.type != ColumnType::Binary &&
        !(c.type == ColumnType::Ordered && !c.positive_levels.empty())) {
      throw Error(ErrorKind::Schema, "outcome column '" + c.name +
                                         "' must be binary or ordered with positive_levels");
    }
    if (c.role == Role::Centre && c.type != ColumnType::Categorical) {
      throw Error(ErrorKind::Schema, "centre column '" + c.name + "' must be categorical");
    }
  }
  if (ids != 1) {
    throw Error(ErrorKind::Schema, "schema needs exactly one id column, found " + std::to_string(ids));
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::require(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error(ErrorKind::Schema, "unknown column '" + std::string(name) + "'");
}

std::optional<std::size_t> Schema::with_role(Role r) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].role == r) return i;
  }
  return std::nullopt;
}

bool Schema::operator==(const Schema& o) const {
  if (columns_.size() != o.columns_.size()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& a = columns_[i];
    const auto& b = o.columns_[i];
    if (a.name != b.name || a.type != b.type || a.role != b.role || a.levels != b.levels ||
        a.positive_levels != b.positive_levels) {
      return false;
    }
  }
  return true;
}

Schema parse_schema(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Schema, std::string("schema is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
    throw Error(ErrorKind::Schema, "schema must be an object with a 'columns' array");
  }
  std::vector<ColumnSpec> cols;
  for (const auto& c : doc["columns"]) {
    try {
      ColumnSpec spec;
      spec.name = c.at("name").get<std::string>();
      const auto type = c.at("type").get<std::string>();
      auto t = type_names().find(type);
      if (t == type_names().end()) {
        throw Error(ErrorKind::Schema, "column '" + spec.name + "': unknown type '" + type + "'");
      }
      spec.type = t->second;
      if (c.contains("role")) {
        const auto role = c["role"].get<std::string>();
        auto r = role_names().find(role);
        if (r == role_names().end()) {
          throw Error(ErrorKind::Schema, "column '" + spec.name + "': unknown role '" + role + "'");
        }
        spec.role = r->second;
      }
      if (c.contains("levels")) spec.levels = c["levels"].get<std::vector<std::string>>();
      if (c.contains("positive_levels")) {
        spec.positive_levels = c["positive_levels"].get<std::vector<std::string>>();
      }
      cols.push_back(std::move(spec));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Schema, std::string("malformed column declaration: ") + e.what());
    }
  }
  return Schema(std::move(cols));
}

std::string schema_to_json(const Schema& s) {
  using nlohmann::ordered_json;
  ordered_json cols = ordered_json::array();
  for (const auto& c : s.columns()) {
    ordered_json j;
    j["name"] = c.name;
    j["type"] = to_string(c.type);
    if (c.role != Role::None) j["role"] = to_string(c.role);
    if (!c.levels.empty()) j["levels"] = c.levels;
    if (!c.positive_levels.empty()) j["positive_levels"] = c.positive_levels;
    cols.push_back(std::move(j));
  }
  ordered_json doc;
  doc["columns"] = std::move(cols);
  return doc.dump(2);
}

PatientTable::PatientTable(Schema schema, std::vector<std::string> ids,
                           std::vector<std::vector<double>> cells)
    : schema_(std::move(schema)), ids_(std::move(ids)), cells_(std::move(cells)) {
  if (cells_.size() != schema_.size()) {
    throw Error(ErrorKind::InvalidArgument, "column count does not match schema");
  }
  for (const auto& c : cells_) {
    if (c.size() != ids_.size()) {
      throw Error(ErrorKind::InvalidArgument, "column length does not match row count");
    }
  }
}

bool PatientTable::missing(std::size_t row, std::size_t c) const {
  return c != schema_.id_column() && std::isnan(cells_[c][row]);
}

std::size_t PatientTable::missing_count(std::size_t c) const {
  if (c == schema_.id_column()) return 0;
  return static_cast<std::size_t>(
      std::count_if(cells_[c].begin(), cells_[c].end(), [](double v) { return std::isnan(v); }));
}

double PatientTable::numeric(std::size_t row, std::size_t c) const {
  const double v = cells_[c][row];
  const auto& spec = schema_[c];
  if (spec.type != ColumnType::Ordered || std::isnan(v)) return v;
  const auto& label = spec.levels[static_cast<std::size_t>(v)];
  if (auto num = parse_real(label)) return *num;
  return v + 1.0;
}

double PatientTable::binary(std::size_t row, std::size_t c) const {
  const double v = cells_[c][row];
  const auto& spec = schema_[c];
  if (spec.type == ColumnType::Binary || std::isnan(v)) return v;
  if (spec.type == ColumnType::Ordered && !spec.positive_levels.empty()) {
    const auto& label = spec.levels[static_cast<std::size_t>(v)];
    return std::find(spec.positive_levels.begin(), spec.positive_levels.end(), label) !=
                   spec.positive_levels.end()
               ? 1.0
               : 0.0;
  }
  throw Error(ErrorKind::Schema, "column '" + spec.name + "' has no binary coding");
}

std::string PatientTable::text(std::size_t row, std::size_t c) const {
  if (c == schema_.id_column()) return ids_[row];
  const double v = cells_[c][row];
  if (std::isnan(v)) return "";
  const auto& spec = schema_[c];
  switch (spec.type) {
    case ColumnType::Binary: return v != 0.0 ? "1" : "0";
    case ColumnType::Ordered:
    case ColumnType::Categorical: return spec.levels[static_cast<std::size_t>(v)];
    default: return format_real(v);
  }
}

PatientTable PatientTable::select_rows(const std::vector<std::size_t>& rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(ids_[r]);
  std::vector<std::vector<double>> cells(cells_.size());
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    cells[c].reserve(rows.size());
    for (auto r : rows) cells[c].push_back(cells_[c][r]);
  }
  return PatientTable(schema_, std::move(ids), std::move(cells));
}

bool PatientTable::operator==(const PatientTable& o) const {
  if (!(schema_ == o.schema_) || ids_ != o.ids_) return false;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (std::size_t r = 0; r < ids_.size(); ++r) {
      if (!same_cell(cells_[c][r], o.cells_[c][r])) return false;
    }
  }
  return true;
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    out.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  if (text.size() >= 3 && std::memcmp(text.data(), "\xEF\xBB\xBF", 3) == 0) i = 3;
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty()) throw Error(ErrorKind::Data, "stray quote inside unquoted CSV field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += ch;
        field_started = true;
    }
  }
  if (quoted) throw Error(ErrorKind::Data, "unterminated quoted CSV field");
  if (field_started || !record.empty() || !field.empty()) end_record();
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

PatientTable ingest_csv(std::string_view text, const Schema& schema) {
  auto records = parse_csv_records(text);
  if (records.empty()) throw Error(ErrorKind::Schema, "CSV has no header row");
  const auto& header = records.front();
  const auto& cols = schema.columns();
  if (header.size() != cols.size()) {
    throw Error(ErrorKind::Schema, "header has " + std::to_string(header.size()) +
                                       " columns, schema declares " + std::to_string(cols.size()));
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (header[c] != cols[c].name) {
      throw Error(ErrorKind::Schema, "header column " + std::to_string(c + 1) + " is '" +
                                         header[c] + "', schema expects '" + cols[c].name + "'");
    }
  }

  // Skip fully blank trailing lines.
  while (records.size() > 1 && records.back().size() == 1 && records.back()[0].empty()) {
    records.pop_back();
  }
  const std::size_t n = records.size() - 1;

  std::vector<ColumnSpec> specs = cols;
  for (auto& spec : specs) {
    if (spec.type != ColumnType::Categorical || !spec.levels.empty()) continue;
    const auto c = schema.require(spec.name);
    std::set<std::string> seen;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (c < records[r].size() && !records[r][c].empty()) seen.insert(records[r][c]);
    }
    spec.levels.assign(seen.begin(), seen.end());
  }

  std::vector<std::string> ids;
  ids.reserve(n);
  std::vector<std::vector<double>> cells(cols.size(), std::vector<double>(n, kMissing));
  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    const std::string where = "row " + std::to_string(r + 1);
    if (rec.size() != cols.size()) {
      throw Error(ErrorKind::Data, where + ": expected " + std::to_string(cols.size()) +
                                       " fields, found " + std::to_string(rec.size()));
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& spec = specs[c];
      const std::string& s = rec[c];
      auto bad = [&](const std::string& why) {
        return Error(ErrorKind::Data, where + ", column '" + spec.name + "': " + why);
      };
      if (spec.type == ColumnType::Id) {
        if (s.empty()) throw bad("missing patient identifier");
        if (!seen_ids.insert(s).second) throw bad("duplicate patient identifier '" + s + "'");
        ids.push_back(s);
        cells[c][r] = 0.0;
        continue;
      }
      if (s.empty()) continue;
      std::optional<double> v;
      switch (spec.type) {
        case ColumnType::Binary: v = parse_binary(s); break;
        case ColumnType::Real: v = parse_real(s); break;
        case ColumnType::Ordered:
        case ColumnType::Categorical:
          if (auto idx = spec.level_index(s)) v = static_cast<double>(*idx);
          break;
        case ColumnType::Id: break;
      }
      if (!v) throw bad("cannot parse '" + s + "' as " + to_string(spec.type));
      cells[c][r] = *v;
    }
  }
  return PatientTable(Schema(std::move(specs)), std::move(ids), std::move(cells));
}

std::string write_csv(const PatientTable& t) {
  std::string out;
  const auto& cols = t.schema().columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += csv_escape(cols[c].name);
  }
  out += '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      out += csv_escape(t.text(r, c));
    }
    out += '\n';
  }
  return out;
}

CompleteCase complete_cases(const PatientTable& t, const std::vector<std::string>& columns) {
  CompleteCase out;
  out.input_rows = t.rows();
  std::vector<std::size_t> idx;
  for (const auto& name : columns) idx.push_back(t.schema().require(name));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.missing_by_column.emplace_back(columns[k], t.missing_count(idx[k]));
  }
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const bool complete =
        std::none_of(idx.begin(), idx.end(), [&](std::size_t c) { return t.missing(r, c); });
    if (complete) keep.push_back(r);
  }
  out.excluded = t.rows() - keep.size();
  out.table = t.select_rows(keep);
  return out;
}

}  // namespace midway
