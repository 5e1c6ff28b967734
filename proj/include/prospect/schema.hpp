#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prospect/cells.hpp"
#include "prospect/error.hpp"

namespace prospect {

enum class Role { sensitive, covariate, decision, outcome };

inline std::string_view to_string(Role role) {
  switch (role) {
    case Role::sensitive: return "sensitive";
    case Role::covariate: return "covariate";
    case Role::decision: return "decision";
    case Role::outcome: return "outcome";
  }
  return "covariate";
}

inline Role role_from_string(std::string_view text) {
  if (text == "sensitive") return Role::sensitive;
  if (text == "covariate") return Role::covariate;
  if (text == "decision") return Role::decision;
  if (text == "outcome") return Role::outcome;
  throw SchemaError("unknown variable role '" + std::string(text) + "'");
}

struct VariableSpec {
  std::string name;
  Role role = Role::covariate;
  std::vector<std::string> levels;

  std::size_t cardinality() const { return levels.size(); }

  std::optional<Level> find_level(std::string_view label) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == label) return static_cast<Level>(i);
    return std::nullopt;
  }

  Level level(std::string_view label) const {
    if (auto found = find_level(label)) return *found;
    throw SchemaError("'" + std::string(label) + "' is not a declared level of variable '" + name +
                      "'");
  }

  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

inline std::vector<std::size_t> cardinalities(std::span<const VariableSpec> vars) {
  std::vector<std::size_t> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.cardinality());
  return out;
}

inline std::vector<std::string> names_of(std::span<const VariableSpec> vars) {
  std::vector<std::string> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

/// Declared discrete variables: one sensitive attribute, zero or more
/// covariates, one decision and one outcome.
class Schema {
 public:
  explicit Schema(std::vector<VariableSpec> variables) : vars_(std::move(variables)) {
    std::set<std::string> seen;
    std::size_t n_sensitive = 0, n_decision = 0, n_outcome = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      const auto& v = vars_[i];
      if (v.name.empty()) throw SchemaError("variable with empty name");
      if (!seen.insert(v.name).second) throw SchemaError("duplicate variable '" + v.name + "'");
      if (v.levels.size() < 2)
        throw SchemaError("variable '" + v.name + "' needs at least two levels");
      if (v.levels.size() > std::numeric_limits<Level>::max())
        throw SchemaError("variable '" + v.name + "' has too many levels");
      std::set<std::string> labels(v.levels.begin(), v.levels.end());
      if (labels.size() != v.levels.size())
        throw SchemaError("variable '" + v.name + "' has duplicate level labels");
      switch (v.role) {
        case Role::sensitive: ++n_sensitive; sensitive_ = i; break;
        case Role::decision: ++n_decision; decision_ = i; break;
        case Role::outcome: ++n_outcome; outcome_ = i; break;
        case Role::covariate: covariates_.push_back(i); break;
      }
    }
    if (n_sensitive != 1) throw SchemaError("schema needs exactly one sensitive variable");
    if (n_decision != 1) throw SchemaError("schema needs exactly one decision variable");
    if (n_outcome != 1) throw SchemaError("schema needs exactly one outcome variable");
  }

  const std::vector<VariableSpec>& variables() const { return vars_; }
  std::size_t size() const { return vars_.size(); }
  const VariableSpec& operator[](std::size_t i) const { return vars_[i]; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw SchemaError("unknown variable '" + std::string(name) + "'");
  }

  const VariableSpec& variable(std::string_view name) const { return vars_[index_of(name)]; }

  std::size_t sensitive() const { return sensitive_; }
  std::size_t decision() const { return decision_; }
  std::size_t outcome() const { return outcome_; }
  const std::vector<std::size_t>& covariates() const { return covariates_; }

  /// Sensitive attribute followed by the covariates, in declaration order:
  /// the (a, x) cell space that policies are defined on.
  std::vector<VariableSpec> cell_variables() const {
    std::vector<VariableSpec> out{vars_[sensitive_]};
    for (auto i : covariates_) out.push_back(vars_[i]);
    return out;
  }

  std::vector<VariableSpec> covariate_variables() const {
    std::vector<VariableSpec> out;
    for (auto i : covariates_) out.push_back(vars_[i]);
    return out;
  }

  friend bool operator==(const Schema& a, const Schema& b) { return a.vars_ == b.vars_; }

 private:
  std::vector<VariableSpec> vars_;
  std::size_t sensitive_ = 0;
  std::size_t decision_ = 0;
  std::size_t outcome_ = 0;
  std::vector<std::size_t> covariates_;
};

enum class Provenance { pre, post_simulated };

inline std::string_view to_string(Provenance p) {
  return p == Provenance::pre ? "pre" : "post-simulated";
}

/// Records stored as level codes, row-major, one column per schema variable.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<Level> codes, Provenance provenance = Provenance::pre)
      : schema_(std::move(schema)), codes_(std::move(codes)), provenance_(provenance) {
    const std::size_t width = schema_.size();
    if (codes_.size() % width != 0) throw SchemaError("record buffer is not a whole number of rows");
    rows_ = codes_.size() / width;
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t v = 0; v < width; ++v)
        if (codes_[r * width + v] >= schema_[v].cardinality())
          throw RowError(r + 1, schema_[v].name, std::to_string(codes_[r * width + v]),
                         "level code out of range");
  }

  const Schema& schema() const { return schema_; }
  Provenance provenance() const { return provenance_; }
  std::size_t size() const { return rows_; }
  bool empty() const { return rows_ == 0; }
  std::size_t width() const { return schema_.size(); }

  std::span<const Level> row(std::size_t r) const {
    return std::span<const Level>(codes_).subspan(r * width(), width());
  }
  Level at(std::size_t r, std::size_t var) const { return codes_[r * width() + var]; }
  std::span<const Level> codes() const { return codes_; }

 private:
  Schema schema_;
  std::vector<Level> codes_;
  std::size_t rows_ = 0;
  Provenance provenance_;
};

enum class BadRowAction { abort, skip };

struct CsvOptions {
  /// Schema variable name -> CSV column header. Variables not listed map to
  /// the column of the same name.
  std::map<std::string, std::string> column_map;
  BadRowAction on_bad_row = BadRowAction::abort;
  Provenance provenance = Provenance::pre;
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
  std::vector<std::string> skipped_reasons;
};

namespace detail {

inline void split_csv_line(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Reads a header-first, comma-separated file. Unmapped columns are ignored.
inline Dataset ingest_csv(std::istream& in, const Schema& schema, const CsvOptions& options = {},
                          IngestStats* stats = nullptr) {
  for (const auto& [var, col] : options.column_map) {
    (void)col;
    schema.index_of(var);
  }

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV input has no header row");
  std::vector<std::string_view> fields;
  detail::split_csv_line(detail::strip_cr(line), fields);
  std::vector<std::string> header(fields.begin(), fields.end());

  std::vector<std::size_t> column_of(schema.size());
  for (std::size_t v = 0; v < schema.size(); ++v) {
    const auto& name = schema[v].name;
    auto mapped = options.column_map.find(name);
    const std::string& column = mapped == options.column_map.end() ? name : mapped->second;
    auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end())
      throw SchemaError("CSV has no column '" + column + "' for variable '" + name + "'");
    column_of[v] = static_cast<std::size_t>(it - header.begin());
  }

  IngestStats local;
  IngestStats& st = stats ? *stats : local;
  st = IngestStats{};

  std::vector<Level> codes;
  std::vector<Level> row(schema.size());
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    const auto text = detail::strip_cr(line);
    if (text.empty()) continue;
    ++data_row;
    ++st.rows_read;
    detail::split_csv_line(text, fields);
    try {
      if (fields.size() != header.size())
        throw RowError(data_row, "*", std::string(text),
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
      for (std::size_t v = 0; v < schema.size(); ++v) {
        const auto value = fields[column_of[v]];
        auto level = schema[v].find_level(value);
        if (!level)
          throw RowError(data_row, schema[v].name, std::string(value),
                         "value '" + std::string(value) + "' is not a declared level");
        row[v] = *level;
      }
    } catch (const RowError& e) {
      if (options.on_bad_row == BadRowAction::abort) throw;
      ++st.rows_skipped;
      st.skipped_reasons.emplace_back(e.what());
      continue;
    }
    codes.insert(codes.end(), row.begin(), row.end());
  }
  return Dataset(schema, std::move(codes), options.provenance);
}

/// Writes the dataset with its schema variable names as header; LF endings.
inline void write_csv(std::ostream& out, const Dataset& data) {
  const auto& schema = data.schema();
  for (std::size_t v = 0; v < schema.size(); ++v) {
    if (v) out << ',';
    out << schema[v].name;
  }
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < data.size(); ++r) {
    line.clear();
    for (std::size_t v = 0; v < schema.size(); ++v) {
      if (v) line += ',';
      line += schema[v].levels[data.at(r, v)];
    }
    line += '\n';
    out << line;
  }
}

}  // namespace prospect
