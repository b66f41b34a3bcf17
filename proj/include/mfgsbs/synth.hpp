#ifndef MFGSBS_SYNTH_HPP
#define MFGSBS_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfgsbs/dataset.hpp"
#include "mfgsbs/graph.hpp"

namespace mfgsbs {

/// Ground-truth discrete Bayesian network. cpts[v][j] is the distribution of
/// v given parent configuration j, with the first listed parent the most
/// significant digit.
struct BayesNetSpec {
  std::vector<VariableSpec> variables;
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<std::vector<double>>> cpts;

  std::size_t size() const { return variables.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& v : variables) out.push_back(v.name);
    return out;
  }

  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
      if (variables[i].name == name) return static_cast<int>(i);
    }
    throw ValidationError("unknown node '" + std::string(name) + "'");
  }

  MixedGraph dag() const {
    MixedGraph g(names());
    for (std::size_t v = 0; v < parents.size(); ++v) {
      for (int p : parents[v]) g.add_directed(p, static_cast<int>(v));
    }
    return g;
  }

  std::size_t configurations(int v) const {
    std::size_t q = 1;
    for (int p : parents[static_cast<std::size_t>(v)]) q *= static_cast<std::size_t>(variables[static_cast<std::size_t>(p)].cardinality());
    return q;
  }
};

inline void validate(const BayesNetSpec& spec) {
  validate_variables(spec.variables);
  const auto n = spec.size();
  if (spec.parents.size() != n || spec.cpts.size() != n) throw ValidationError("network spec: sizes disagree");
  for (std::size_t v = 0; v < n; ++v) {
    std::set<int> seen;
    for (int p : spec.parents[v]) {
      if (p < 0 || static_cast<std::size_t>(p) >= n || p == static_cast<int>(v)) {
        throw ValidationError("network spec: bad parent of '" + spec.variables[v].name + "'");
      }
      if (!seen.insert(p).second) throw ValidationError("network spec: repeated parent of '" + spec.variables[v].name + "'");
    }
  }
  if (has_directed_cycle(spec.dag())) throw ValidationError("network spec: parent structure is cyclic");
  for (std::size_t v = 0; v < n; ++v) {
    const auto& name = spec.variables[v].name;
    const auto q = spec.configurations(static_cast<int>(v));
    const auto& rows = spec.cpts[v];
    if (rows.size() != q) {
      throw ValidationError("CPT of '" + name + "' has " + std::to_string(rows.size()) + " rows, expected " +
                            std::to_string(q));
    }
    for (std::size_t j = 0; j < q; ++j) {
      if (rows[j].size() != spec.variables[v].states.size()) {
        throw ValidationError("CPT of '" + name + "' row " + std::to_string(j) + " has the wrong length");
      }
      double sum = 0.0;
      for (double x : rows[j]) {
        if (!(x >= 0.0)) throw ValidationError("CPT of '" + name + "' has a negative entry");
        sum += x;
      }
      if (std::fabs(sum - 1.0) > 1e-9) {
        throw ValidationError("CPT of '" + name + "' row " + std::to_string(j) + " sums to " + std::to_string(sum));
      }
    }
  }
}

inline BayesNetSpec spec_from_json(const nlohmann::json& doc) {
  BayesNetSpec spec;
  try {
    for (const auto& v : doc.at("variables")) {
      spec.variables.push_back({v.at("name").get<std::string>(), v.at("states").get<std::vector<std::string>>()});
    }
    validate_variables(spec.variables);
    const auto names = spec.names();
    spec.parents.resize(names.size());
    spec.cpts.resize(names.size());
    const auto& parents = doc.contains("parents") ? doc.at("parents") : nlohmann::json::object();
    for (const auto& [child, list] : parents.items()) {
      const int c = spec.index_of(child);
      for (const auto& p : list) spec.parents[static_cast<std::size_t>(c)].push_back(spec.index_of(p.get<std::string>()));
    }
    for (const auto& [child, rows] : doc.at("cpts").items()) {
      spec.cpts[static_cast<std::size_t>(spec.index_of(child))] = rows.get<std::vector<std::vector<double>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("network spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

inline nlohmann::json spec_to_json(const BayesNetSpec& spec) {
  nlohmann::json doc;
  doc["variables"] = nlohmann::json::array();
  for (const auto& v : spec.variables) doc["variables"].push_back({{"name", v.name}, {"states", v.states}});
  doc["parents"] = nlohmann::json::object();
  doc["cpts"] = nlohmann::json::object();
  for (std::size_t v = 0; v < spec.size(); ++v) {
    auto list = nlohmann::json::array();
    for (int p : spec.parents[v]) list.push_back(spec.variables[static_cast<std::size_t>(p)].name);
    if (!list.empty()) doc["parents"][spec.variables[v].name] = list;
    doc["cpts"][spec.variables[v].name] = spec.cpts[v];
  }
  return doc;
}

inline BayesNetSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open network spec '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return spec_from_json(doc);
}

namespace detail {

inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int pick(const std::vector<double>& row, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < row.size(); ++k) {
    acc += row[k];
    if (u < acc) return static_cast<int>(k);
  }
  // Skip trailing zero-probability states so rounding never selects them.
  for (std::size_t k = row.size(); k-- > 0;) {
    if (row[k] > 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(row.size()) - 1;
}

}  // namespace detail

/// Ancestral sampling on the surgered network: each target loses its parents
/// and takes a uniform state. Every node consumes exactly one draw per row,
/// so an empty target set reproduces forward_sample.
inline DiscreteTable intervene_sample(const BayesNetSpec& spec, const std::vector<int>& targets, std::size_t n,
                                      std::uint64_t seed) {
  validate(spec);
  if (n == 0) throw DomainError("sample size must be >= 1");
  std::vector<bool> forced(spec.size(), false);
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= spec.size()) throw ValidationError("intervention target out of range");
    forced[static_cast<std::size_t>(t)] = true;
  }
  const auto order = topological_order(spec.dag());
  std::vector<std::vector<int>> columns(spec.size(), std::vector<int>(n));
  std::mt19937_64 rng(seed);
  for (std::size_t row = 0; row < n; ++row) {
    for (int v : order) {
      const auto vi = static_cast<std::size_t>(v);
      const double u = detail::unit_draw(rng);
      if (forced[vi]) {
        const int r = spec.variables[vi].cardinality();
        columns[vi][row] = std::min(r - 1, static_cast<int>(u * r));
        continue;
      }
      std::size_t j = 0;
      for (int p : spec.parents[vi]) {
        j = j * static_cast<std::size_t>(spec.variables[static_cast<std::size_t>(p)].cardinality()) +
            static_cast<std::size_t>(columns[static_cast<std::size_t>(p)][row]);
      }
      columns[vi][row] = detail::pick(spec.cpts[vi][j], u);
    }
  }
  return DiscreteTable(spec.variables, std::move(columns));
}

inline DiscreteTable forward_sample(const BayesNetSpec& spec, std::size_t n, std::uint64_t seed) {
  return intervene_sample(spec, {}, n, seed);
}

/// Drops the latent columns, keeping the order of the rest.
inline DiscreteTable mask_latents(const DiscreteTable& table, const std::vector<int>& latents) {
  std::vector<VariableSpec> vars;
  std::vector<std::vector<int>> cols;
  for (int v = 0; v < static_cast<int>(table.num_variables()); ++v) {
    if (std::find(latents.begin(), latents.end(), v) != latents.end()) continue;
    vars.push_back(table.variable(v));
    cols.push_back(table.column(v));
  }
  return DiscreteTable(std::move(vars), std::move(cols));
}

struct GroundTruth {
  MixedGraph dag;  // over all nodes
  MixedGraph mag;  // over observed nodes
};

inline GroundTruth export_ground_truth(const BayesNetSpec& spec, const std::vector<int>& latents) {
  auto dag = spec.dag();
  auto mag = latent_project(dag, latents);
  return {std::move(dag), std::move(mag)};
}

/// Independent seed for a named sub-stream: FNV-1a over the name and the
/// indices, finished with the splitmix64 mixer.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ base;
  auto feed = [&](std::uint64_t byte) {
    h ^= byte & 0xff;
    h *= 0x100000001b3ULL;
  };
  for (char c : stream) feed(static_cast<unsigned char>(c));
  for (auto x : indices) {
    for (int k = 0; k < 8; ++k) feed(x >> (8 * k));
  }
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

// ---------------------------------------------------------------------------
// Plans

struct PlanEntry {
  std::vector<std::string> targets;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string path;
};

/// Which data sets to generate: an observational entry, interventional
/// entries in processing order, and the nodes hidden from every output.
struct InterventionPlan {
  std::vector<std::string> latents;
  PlanEntry observational;
  std::vector<PlanEntry> interventional;
};

inline void validate(const InterventionPlan& plan, const BayesNetSpec& spec) {
  std::set<std::string> latent_set;
  for (const auto& l : plan.latents) {
    spec.index_of(l);
    latent_set.insert(l);
  }
  if (latent_set.size() >= spec.size()) throw ValidationError("plan hides every node");
  if (!plan.observational.targets.empty()) throw ValidationError("observational entry cannot have targets");
  auto check = [&](const PlanEntry& e, const std::string& label) {
    if (e.n == 0) throw ValidationError(label + ": sample size must be >= 1");
    for (const auto& t : e.targets) {
      spec.index_of(t);
      if (latent_set.count(t)) throw ValidationError(label + ": target '" + t + "' is latent");
    }
  };
  check(plan.observational, "observational entry");
  for (std::size_t i = 0; i < plan.interventional.size(); ++i) {
    check(plan.interventional[i], "interventional entry " + std::to_string(i + 1));
  }
}

inline InterventionPlan plan_from_json(const nlohmann::json& doc) {
  InterventionPlan plan;
  auto entry = [](const nlohmann::json& e, std::string default_path, std::uint64_t default_seed) {
    PlanEntry out;
    if (e.contains("targets")) out.targets = e.at("targets").get<std::vector<std::string>>();
    if (e.contains("n")) {
      const auto n = e.at("n").get<long long>();
      if (n < 1) throw ValidationError("plan: sample size must be >= 1");
      out.n = static_cast<std::size_t>(n);
    }
    out.seed = e.contains("seed") ? e.at("seed").get<std::uint64_t>() : default_seed;
    out.path = e.contains("path") ? e.at("path").get<std::string>() : std::move(default_path);
    return out;
  };
  try {
    if (doc.contains("latents")) plan.latents = doc.at("latents").get<std::vector<std::string>>();
    plan.observational = entry(doc.contains("observational") ? doc.at("observational") : nlohmann::json::object(),
                               "obs.csv", 0);
    if (doc.contains("interventional")) {
      std::size_t i = 0;
      for (const auto& e : doc.at("interventional")) {
        ++i;
        plan.interventional.push_back(entry(e, "int_" + std::to_string(i) + ".csv", i));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("plan: ") + e.what());
  }
  return plan;
}

inline InterventionPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plan '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return plan_from_json(doc);
}

/// Plan with `sets` interventional entries, each targeting `targets_per_set`
/// distinct observed nodes drawn at random. Entry seeds derive from `seed`.
inline InterventionPlan random_plan(const BayesNetSpec& spec, const std::vector<std::string>& latents, int sets,
                                    int targets_per_set, std::size_t n, std::uint64_t seed) {
  std::vector<std::string> observed;
  for (const auto& v : spec.variables) {
    if (std::find(latents.begin(), latents.end(), v.name) == latents.end()) observed.push_back(v.name);
  }
  if (targets_per_set < 1 || static_cast<std::size_t>(targets_per_set) > observed.size()) {
    throw DomainError("targets per set must lie in [1, observed nodes]");
  }
  std::mt19937_64 rng(seed);
  InterventionPlan plan;
  plan.latents = latents;
  plan.observational = {{}, n, rng(), "obs.csv"};
  for (int i = 0; i < sets; ++i) {
    auto pool = observed;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(targets_per_set));
    std::sort(pool.begin(), pool.end());
    char name[32];
    std::snprintf(name, sizeof name, "int_%02d.csv", i + 1);
    plan.interventional.push_back({std::move(pool), n, rng(), name});
  }
  return plan;
}

struct Simulation {
  DatasetBundle bundle;  // latent columns removed
  GroundTruth truth;
};

/// Samples every plan entry, hides the latents and packages the result with
/// its ground truth.
inline Simulation simulate(const BayesNetSpec& spec, const InterventionPlan& plan) {
  validate(spec);
  validate(plan, spec);
  std::vector<int> latents;
  for (const auto& l : plan.latents) latents.push_back(spec.index_of(l));
  std::sort(latents.begin(), latents.end());

  auto obs = mask_latents(forward_sample(spec, plan.observational.n, plan.observational.seed), latents);
  std::vector<InterventionalData> ints;
  for (const auto& e : plan.interventional) {
    std::vector<int> targets;
    for (const auto& t : e.targets) targets.push_back(spec.index_of(t));
    auto table = mask_latents(intervene_sample(spec, targets, e.n, e.seed), latents);
    std::vector<int> observed_targets;
    for (const auto& t : e.targets) observed_targets.push_back(table.index_of(t));
    ints.push_back({std::move(table), std::move(observed_targets)});
  }
  return {make_bundle(std::move(obs), std::move(ints)), export_ground_truth(spec, latents)};
}

// ---------------------------------------------------------------------------
// Random networks

struct RandomNetworkOptions {
  int nodes = 6;
  int edges = 6;
  int max_indegree = 2;
  int min_states = 2;
  int max_states = 3;
  double concentration = 0.5;  // Dirichlet parameter of each CPT row
};

/// A random DAG over X1..Xn (edges follow a random node order) with random
/// state counts and Dirichlet-drawn CPT rows.
inline BayesNetSpec random_network(const RandomNetworkOptions& opt, std::uint64_t seed) {
  if (opt.nodes < 1 || opt.edges < 0 || opt.max_indegree < 0 || opt.min_states < 2 || opt.max_states < opt.min_states) {
    throw DomainError("invalid random network options");
  }
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(opt.nodes);
  BayesNetSpec spec;
  std::uniform_int_distribution<int> states(opt.min_states, opt.max_states);
  for (std::size_t v = 0; v < n; ++v) {
    VariableSpec var{"X" + std::to_string(v + 1), {}};
    const int r = states(rng);
    for (int k = 0; k < r; ++k) var.states.push_back("s" + std::to_string(k));
    spec.variables.push_back(std::move(var));
  }
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::pair<int, int>> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) candidates.emplace_back(order[i], order[j]);
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  spec.parents.assign(n, {});
  int placed = 0;
  for (auto [from, to] : candidates) {
    if (placed >= opt.edges) break;
    auto& ps = spec.parents[static_cast<std::size_t>(to)];
    if (static_cast<int>(ps.size()) >= opt.max_indegree) continue;
    ps.push_back(from);
    ++placed;
  }
  for (auto& ps : spec.parents) std::sort(ps.begin(), ps.end());

  std::gamma_distribution<double> gamma(opt.concentration, 1.0);
  spec.cpts.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto q = spec.configurations(static_cast<int>(v));
    const auto r = spec.variables[v].states.size();
    for (std::size_t j = 0; j < q; ++j) {
      std::vector<double> row(r);
      double sum = 0.0;
      for (auto& x : row) {
        x = gamma(rng) + 1e-3;
        sum += x;
      }
      for (auto& x : row) x /= sum;
      // Put the rounding residue on the largest entry so the row sums to 1.
      double residue = 1.0;
      for (double x : row) residue -= x;
      *std::max_element(row.begin(), row.end()) += residue;
      spec.cpts[v].push_back(std::move(row));
    }
  }
  validate(spec);
  return spec;
}

}  // namespace mfgsbs

#endif  // MFGSBS_SYNTH_HPP
