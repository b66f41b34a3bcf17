#ifndef MFGSBS_DATASET_HPP
#define MFGSBS_DATASET_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfgsbs/error.hpp"

namespace mfgsbs {

struct VariableSpec {
  std::string name;
  std::vector<std::string> states;

  int cardinality() const { return static_cast<int>(states.size()); }
  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

inline void validate_variables(const std::vector<VariableSpec>& vars) {
  std::set<std::string> names;
  for (const auto& v : vars) {
    if (!names.insert(v.name).second) throw ValidationError("duplicate variable '" + v.name + "'");
    if (v.states.size() < 2) throw ValidationError("variable '" + v.name + "' needs at least 2 states");
    std::set<std::string> labels(v.states.begin(), v.states.end());
    if (labels.size() != v.states.size()) {
      throw ValidationError("variable '" + v.name + "' has duplicate state labels");
    }
  }
}

/// Complete discrete data: one column of state indices per variable. Tables
/// are immutable; each carries a process-unique id used as a cache key.
class DiscreteTable {
public:
  DiscreteTable() = default;

  DiscreteTable(std::vector<VariableSpec> variables, std::vector<std::vector<int>> columns)
      : vars_(std::make_shared<const std::vector<VariableSpec>>(std::move(variables))),
        columns_(std::move(columns)),
        id_(next_id()) {
    validate_variables(*vars_);
    if (columns_.size() != vars_->size()) throw ValidationError("column count does not match variables");
    rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (columns_[c].size() != rows_) throw ValidationError("ragged columns");
      const int card = (*vars_)[c].cardinality();
      for (int x : columns_[c]) {
        if (x < 0 || x >= card) {
          throw ValidationError("state index out of range in column '" + (*vars_)[c].name + "'");
        }
      }
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t num_variables() const { return vars_ ? vars_->size() : 0; }
  const std::vector<VariableSpec>& variables() const { return *vars_; }
  const VariableSpec& variable(int i) const { return vars_->at(static_cast<std::size_t>(i)); }
  int cardinality(int i) const { return variable(i).cardinality(); }
  const std::vector<int>& column(int i) const { return columns_.at(static_cast<std::size_t>(i)); }
  int at(std::size_t row, int col) const { return columns_[static_cast<std::size_t>(col)][row]; }
  std::uint64_t id() const { return id_; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& v : *vars_) out.push_back(v.name);
    return out;
  }

  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < vars_->size(); ++i) {
      if ((*vars_)[i].name == name) return static_cast<int>(i);
    }
    throw ValidationError("unknown variable '" + std::string(name) + "'");
  }

private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

  std::shared_ptr<const std::vector<VariableSpec>> vars_;
  std::vector<std::vector<int>> columns_;
  std::size_t rows_ = 0;
  std::uint64_t id_ = 0;
};

/// n_ijk for one child and parent set. Only parent configurations that occur
/// in the data are stored; absent configurations have all-zero counts.
struct ContingencyCounts {
  int child = 0;
  std::vector<int> parents;
  int child_states = 0;
  std::uint64_t q = 1;                 // number of parent configurations
  std::vector<std::uint64_t> configs;  // observed configurations, ascending
  std::vector<std::uint64_t> cells;    // configs.size() x child_states

  std::uint64_t n_ijk(std::uint64_t j, int k) const {
    auto it = std::lower_bound(configs.begin(), configs.end(), j);
    if (it == configs.end() || *it != j) return 0;
    auto row = static_cast<std::size_t>(it - configs.begin());
    return cells[row * static_cast<std::size_t>(child_states) + static_cast<std::size_t>(k)];
  }

  std::uint64_t n_ij(std::uint64_t j) const {
    std::uint64_t s = 0;
    for (int k = 0; k < child_states; ++k) s += n_ijk(j, k);
    return s;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : cells) s += c;
    return s;
  }
};

/// Parent configuration index of `row`; the first parent is the most
/// significant digit.
inline std::uint64_t parent_config(const DiscreteTable& table, std::size_t row, std::span<const int> parents) {
  std::uint64_t j = 0;
  for (int p : parents) {
    j = j * static_cast<std::uint64_t>(table.cardinality(p)) + static_cast<std::uint64_t>(table.at(row, p));
  }
  return j;
}

inline ContingencyCounts count(const DiscreteTable& table, int child, std::span<const int> parents) {
  if (std::find(parents.begin(), parents.end(), child) != parents.end()) {
    throw DomainError("child variable is among its own parents");
  }
  ContingencyCounts out;
  out.child = child;
  out.parents.assign(parents.begin(), parents.end());
  out.child_states = table.cardinality(child);
  for (int p : parents) out.q *= static_cast<std::uint64_t>(table.cardinality(p));

  const auto r = static_cast<std::size_t>(out.child_states);
  std::unordered_map<std::uint64_t, std::size_t> slot;
  std::vector<std::uint64_t> seen;
  std::vector<std::uint64_t> raw;
  const auto& child_col = table.column(child);
  for (std::size_t row = 0; row < table.rows(); ++row) {
    const auto j = parent_config(table, row, parents);
    auto [it, inserted] = slot.emplace(j, seen.size());
    if (inserted) {
      seen.push_back(j);
      raw.resize(raw.size() + r, 0);
    }
    ++raw[it->second * r + static_cast<std::size_t>(child_col[row])];
  }
  std::vector<std::size_t> perm(seen.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) { return seen[x] < seen[y]; });
  out.configs.reserve(seen.size());
  out.cells.reserve(raw.size());
  for (auto i : perm) {
    out.configs.push_back(seen[i]);
    out.cells.insert(out.cells.end(), raw.begin() + static_cast<std::ptrdiff_t>(i * r),
                     raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * r));
  }
  return out;
}

/// Thread-safe memo of counts keyed by (table id, child, sorted parents).
class CountCache {
public:
  std::shared_ptr<const ContingencyCounts> get(const DiscreteTable& table, int child, std::vector<int> parents) {
    std::sort(parents.begin(), parents.end());
    Key key{table.id(), child, parents};
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    auto value = std::make_shared<const ContingencyCounts>(count(table, child, parents));
    std::unique_lock lock(mutex_);
    return map_.emplace(std::move(key), std::move(value)).first->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }

private:
  struct Key {
    std::uint64_t table;
    int child;
    std::vector<int> parents;
    friend bool operator<(const Key& x, const Key& y) {
      return std::tie(x.table, x.child, x.parents) < std::tie(y.table, y.child, y.parents);
    }
  };
  mutable std::shared_mutex mutex_;
  std::map<Key, std::shared_ptr<const ContingencyCounts>> map_;
};

// ---------------------------------------------------------------------------
// CSV

/// Header plus rows of raw labels.
struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline RawCsv parse_csv(std::istream& in, const std::string& origin) {
  RawCsv csv;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(origin + ": empty file");
  csv.header = detail::split_csv_line(line);
  if (csv.header.empty()) throw ValidationError(origin + ": empty header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != csv.header.size()) {
      throw ValidationError(origin + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(csv.header.size()));
    }
    for (const auto& c : cells) {
      if (c.empty()) throw ValidationError(origin + ": missing value on line " + std::to_string(line_no));
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

inline RawCsv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return parse_csv(in, path.string());
}

inline void write_csv(std::ostream& out, const DiscreteTable& table) {
  const auto n = static_cast<int>(table.num_variables());
  for (int c = 0; c < n; ++c) out << (c ? "," : "") << table.variable(c).name;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (int c = 0; c < n; ++c) {
      out << (c ? "," : "") << table.variable(c).states[static_cast<std::size_t>(table.at(r, c))];
    }
    out << '\n';
  }
}

/// Encodes raw labels against fixed variables. Columns are matched by name.
inline DiscreteTable encode(const RawCsv& csv, const std::vector<VariableSpec>& variables, const std::string& origin) {
  if (csv.header.size() != variables.size()) {
    throw ValidationError(origin + ": schema mismatch, expected " + std::to_string(variables.size()) + " columns, got " +
                          std::to_string(csv.header.size()));
  }
  std::vector<std::vector<int>> columns(variables.size());
  for (std::size_t v = 0; v < variables.size(); ++v) {
    auto it = std::find(csv.header.begin(), csv.header.end(), variables[v].name);
    if (it == csv.header.end()) {
      throw ValidationError(origin + ": schema mismatch, column '" + variables[v].name + "' missing");
    }
    const auto src = static_cast<std::size_t>(it - csv.header.begin());
    std::unordered_map<std::string, int> lookup;
    for (std::size_t s = 0; s < variables[v].states.size(); ++s) lookup[variables[v].states[s]] = static_cast<int>(s);
    auto& col = columns[v];
    col.reserve(csv.rows.size());
    for (const auto& row : csv.rows) {
      auto found = lookup.find(row[src]);
      if (found == lookup.end()) {
        throw ValidationError(origin + ": unknown label '" + row[src] + "' for '" + variables[v].name + "'");
      }
      col.push_back(found->second);
    }
  }
  return DiscreteTable(variables, std::move(columns));
}

// ---------------------------------------------------------------------------
// Bundles

struct InterventionalData {
  DiscreteTable table;
  std::vector<int> targets;  // variable indices, ascending
};

/// One observational table plus interventional tables in processing order,
/// all over the same variables.
struct DatasetBundle {
  std::vector<VariableSpec> variables;
  DiscreteTable observational;
  std::vector<InterventionalData> interventional;
  std::vector<std::string> warnings;

  std::size_t num_variables() const { return variables.size(); }
};

inline DatasetBundle make_bundle(DiscreteTable observational, std::vector<InterventionalData> interventional) {
  DatasetBundle bundle;
  bundle.variables = observational.variables();
  const auto n = static_cast<int>(bundle.variables.size());
  for (std::size_t i = 0; i < interventional.size(); ++i) {
    auto& entry = interventional[i];
    if (entry.table.variables() != bundle.variables) {
      throw ValidationError("interventional data set " + std::to_string(i + 1) + " has a different schema");
    }
    for (int t : entry.targets) {
      if (t < 0 || t >= n) throw ValidationError("intervention target index out of range");
    }
    std::sort(entry.targets.begin(), entry.targets.end());
    entry.targets.erase(std::unique(entry.targets.begin(), entry.targets.end()), entry.targets.end());
    if (entry.table.rows() != observational.rows()) {
      bundle.warnings.push_back("interventional data set " + std::to_string(i + 1) + " has " +
                                std::to_string(entry.table.rows()) + " rows but the observational data has " +
                                std::to_string(observational.rows()) + "; relative score changes assume equal sizes");
    }
  }
  if (observational.rows() == 0) throw ValidationError("observational data set is empty");
  bundle.observational = std::move(observational);
  bundle.interventional = std::move(interventional);
  return bundle;
}

/// Reads a manifest `{"observational": path, "interventional": [{"path",
/// "targets"}]}`. Relative paths resolve against the manifest's directory.
/// State spaces are the sorted union of labels seen in any table.
inline DatasetBundle load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest '" + manifest_path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  if (!doc.is_object() || !doc.contains("observational") || !doc["observational"].is_string()) {
    throw ValidationError("manifest: missing string field 'observational'");
  }

  struct Entry {
    std::filesystem::path path;
    RawCsv csv;
    std::vector<std::string> targets;
  };
  std::vector<Entry> entries;
  entries.push_back({resolve(doc["observational"].get<std::string>()), {}, {}});
  if (doc.contains("interventional")) {
    if (!doc["interventional"].is_array()) throw ValidationError("manifest: 'interventional' must be an array");
    for (const auto& item : doc["interventional"]) {
      if (!item.contains("path") || !item["path"].is_string()) {
        throw ValidationError("manifest: interventional entry without 'path'");
      }
      Entry e{resolve(item["path"].get<std::string>()), {}, {}};
      if (item.contains("targets")) e.targets = item["targets"].get<std::vector<std::string>>();
      entries.push_back(std::move(e));
    }
  }
  for (auto& e : entries) e.csv = read_csv(e.path);

  const auto& header = entries.front().csv.header;
  std::set<std::string> header_set(header.begin(), header.end());
  if (header_set.size() != header.size()) throw ValidationError(entries.front().path.string() + ": duplicate column");
  for (const auto& e : entries) {
    std::set<std::string> cols(e.csv.header.begin(), e.csv.header.end());
    if (cols != header_set || e.csv.header.size() != header.size()) {
      throw ValidationError(e.path.string() + ": schema mismatch with '" + entries.front().path.string() + "'");
    }
    for (const auto& t : e.targets) {
      if (!header_set.count(t)) throw ValidationError(e.path.string() + ": unknown intervention target '" + t + "'");
    }
  }

  std::vector<VariableSpec> variables;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::set<std::string> labels;
    for (const auto& e : entries) {
      const auto src = static_cast<std::size_t>(std::find(e.csv.header.begin(), e.csv.header.end(), header[c]) -
                                                e.csv.header.begin());
      for (const auto& row : e.csv.rows) labels.insert(row[src]);
    }
    if (labels.size() < 2) {
      throw ValidationError("variable '" + header[c] + "' has fewer than 2 observed states");
    }
    variables.push_back({header[c], std::vector<std::string>(labels.begin(), labels.end())});
  }

  auto obs = encode(entries.front().csv, variables, entries.front().path.string());
  std::vector<InterventionalData> ints;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    InterventionalData d{encode(entries[i].csv, variables, entries[i].path.string()), {}};
    for (const auto& t : entries[i].targets) d.targets.push_back(d.table.index_of(t));
    ints.push_back(std::move(d));
  }
  return make_bundle(std::move(obs), std::move(ints));
}

}  // namespace mfgsbs

#endif  // MFGSBS_DATASET_HPP
