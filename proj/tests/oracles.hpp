// Brute-force reference implementations used only by the tests. They share
// no code with the library beyond the graph and table containers.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mfgsbs/dataset.hpp"
#include "mfgsbs/graph.hpp"
#include "mfgsbs/indep.hpp"

namespace oracle {

using mfgsbs::MixedGraph;

inline std::vector<std::vector<int>> subsets(const std::vector<int>& items, std::size_t max_size = SIZE_MAX) {
  std::vector<std::vector<int>> out;
  const std::size_t n = items.size();
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    std::vector<int> s;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1ULL << i)) s.push_back(items[i]);
    }
    if (s.size() <= max_size) out.push_back(s);
  }
  return out;
}

inline std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

/// Every DAG on n labelled nodes (each pair absent, forward or backward;
/// cyclic ones dropped by a DFS of our own).
inline std::vector<MixedGraph> all_dags(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  }
  std::vector<MixedGraph> out;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < pairs.size(); ++i) total *= 3;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::vector<std::vector<int>> kids(static_cast<std::size_t>(n));
    MixedGraph g(names(n));
    auto c = code;
    for (auto [a, b] : pairs) {
      const auto d = c % 3;
      c /= 3;
      if (d == 1) {
        g.add_directed(a, b);
        kids[static_cast<std::size_t>(a)].push_back(b);
      } else if (d == 2) {
        g.add_directed(b, a);
        kids[static_cast<std::size_t>(b)].push_back(a);
      }
    }
    std::vector<int> state(static_cast<std::size_t>(n), 0);
    bool cyclic = false;
    std::function<void(int)> dfs = [&](int v) {
      state[static_cast<std::size_t>(v)] = 1;
      for (int w : kids[static_cast<std::size_t>(v)]) {
        if (state[static_cast<std::size_t>(w)] == 1) cyclic = true;
        if (state[static_cast<std::size_t>(w)] == 0) dfs(w);
      }
      state[static_cast<std::size_t>(v)] = 2;
    };
    for (int v = 0; v < n; ++v) {
      if (state[static_cast<std::size_t>(v)] == 0) dfs(v);
    }
    if (!cyclic) out.push_back(std::move(g));
  }
  return out;
}

inline std::vector<int> parents_of(const MixedGraph& g, int v) {
  std::vector<int> out;
  for (int u = 0; u < static_cast<int>(g.size()); ++u) {
    if (u != v && g.marks(u, v) == std::pair{mfgsbs::Mark::Tail, mfgsbs::Mark::Arrow}) out.push_back(u);
  }
  return out;
}

/// d-separation of x and y given z in a DAG via the moralized ancestral
/// graph.
inline bool d_separated(const MixedGraph& dag, int x, int y, const std::vector<int>& z) {
  const int n = static_cast<int>(dag.size());
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  std::vector<int> stack{x, y};
  stack.insert(stack.end(), z.begin(), z.end());
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (keep[static_cast<std::size_t>(v)]) continue;
    keep[static_cast<std::size_t>(v)] = true;
    for (int p : parents_of(dag, v)) stack.push_back(p);
  }
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    if (!keep[static_cast<std::size_t>(v)]) continue;
    const auto ps = parents_of(dag, v);
    for (int p : ps) {
      adj[static_cast<std::size_t>(p)].insert(v);
      adj[static_cast<std::size_t>(v)].insert(p);
    }
    for (int p : ps) {
      for (int q : ps) {
        if (p != q) adj[static_cast<std::size_t>(p)].insert(q);
      }
    }
  }
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  for (int v : z) blocked[static_cast<std::size_t>(v)] = true;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  stack = {x};
  seen[static_cast<std::size_t>(x)] = true;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (v == y) return false;
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)] && !blocked[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        stack.push_back(w);
      }
    }
  }
  return true;
}

/// The full list of d-separation statements; equal lists mean Markov
/// equivalent DAGs.
inline std::vector<bool> independence_signature(const MixedGraph& dag) {
  const int n = static_cast<int>(dag.size());
  std::vector<bool> sig;
  for (int x = 0; x < n; ++x) {
    for (int y = x + 1; y < n; ++y) {
      std::vector<int> rest;
      for (int v = 0; v < n; ++v) {
        if (v != x && v != y) rest.push_back(v);
      }
      for (const auto& z : subsets(rest)) sig.push_back(d_separated(dag, x, y, z));
    }
  }
  return sig;
}

/// DAGs grouped into Markov equivalence classes.
inline std::vector<std::vector<MixedGraph>> equivalence_classes(int n) {
  std::map<std::vector<bool>, std::vector<MixedGraph>> classes;
  for (auto& g : all_dags(n)) classes[independence_signature(g)].push_back(g);
  std::vector<std::vector<MixedGraph>> out;
  for (auto& [k, v] : classes) out.push_back(std::move(v));
  return out;
}

inline bool is_ancestor(const MixedGraph& dag, int a, int b) {
  std::vector<int> stack{a};
  std::vector<bool> seen(dag.size(), false);
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    if (v == b) return true;
    if (seen[static_cast<std::size_t>(v)]) continue;
    seen[static_cast<std::size_t>(v)] = true;
    for (int w = 0; w < static_cast<int>(dag.size()); ++w) {
      if (w != v && dag.marks(v, w) == std::pair{mfgsbs::Mark::Tail, mfgsbs::Mark::Arrow}) stack.push_back(w);
    }
  }
  return false;
}

/// MAG over the observed nodes: adjacent iff no observed set d-separates the
/// pair; marks by ancestry.
inline MixedGraph mag_by_separation(const MixedGraph& dag, const std::vector<int>& latents) {
  std::vector<int> observed;
  std::vector<std::string> obs_names;
  for (int v = 0; v < static_cast<int>(dag.size()); ++v) {
    if (std::find(latents.begin(), latents.end(), v) == latents.end()) {
      observed.push_back(v);
      obs_names.push_back(dag.name(v));
    }
  }
  MixedGraph mag(obs_names);
  for (std::size_t i = 0; i < observed.size(); ++i) {
    for (std::size_t j = i + 1; j < observed.size(); ++j) {
      const int a = observed[i], b = observed[j];
      std::vector<int> rest;
      for (int v : observed) {
        if (v != a && v != b) rest.push_back(v);
      }
      bool separable = false;
      for (const auto& z : subsets(rest)) {
        if (d_separated(dag, a, b, z)) {
          separable = true;
          break;
        }
      }
      if (separable) continue;
      const int ia = static_cast<int>(i), ib = static_cast<int>(j);
      if (is_ancestor(dag, a, b)) {
        mag.add_directed(ia, ib);
      } else if (is_ancestor(dag, b, a)) {
        mag.add_directed(ib, ia);
      } else {
        mag.add_bidirected(ia, ib);
      }
    }
  }
  return mag;
}

/// BDeu family score summed over every parent configuration, observed or
/// not, with std::lgamma.
inline double bdeu_direct(const mfgsbs::DiscreteTable& t, int child, const std::vector<int>& parents, double ess) {
  const int r = t.cardinality(child);
  std::size_t q = 1;
  for (int p : parents) q *= static_cast<std::size_t>(t.cardinality(p));
  std::vector<double> counts(q * static_cast<std::size_t>(r), 0.0);
  for (std::size_t row = 0; row < t.rows(); ++row) {
    std::size_t j = 0;
    for (int p : parents) j = j * static_cast<std::size_t>(t.cardinality(p)) + static_cast<std::size_t>(t.at(row, p));
    counts[j * static_cast<std::size_t>(r) + static_cast<std::size_t>(t.at(row, child))] += 1.0;
  }
  const double aj = ess / static_cast<double>(q);
  const double ajk = ess / static_cast<double>(q * static_cast<std::size_t>(r));
  double s = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    double nij = 0.0;
    for (int k = 0; k < r; ++k) {
      const double c = counts[j * static_cast<std::size_t>(r) + static_cast<std::size_t>(k)];
      nij += c;
      s += std::lgamma(ajk + c) - std::lgamma(ajk);
    }
    s += std::lgamma(aj) - std::lgamma(aj + nij);
  }
  return s;
}

inline double dag_bdeu_direct(const mfgsbs::DiscreteTable& t, const MixedGraph& dag, double ess) {
  double s = 0.0;
  for (int v = 0; v < static_cast<int>(dag.size()); ++v) s += bdeu_direct(t, v, parents_of(dag, v), ess);
  return s;
}

/// G-squared statistic from a dense contingency table built here.
inline double g2_direct(const mfgsbs::DiscreteTable& t, int a, int b, const std::vector<int>& z) {
  std::map<std::vector<int>, std::map<std::pair<int, int>, double>> strata;
  for (std::size_t row = 0; row < t.rows(); ++row) {
    std::vector<int> key;
    for (int v : z) key.push_back(t.at(row, v));
    strata[key][{t.at(row, a), t.at(row, b)}] += 1.0;
  }
  double g2 = 0.0;
  for (const auto& [key, cells] : strata) {
    std::map<int, double> na, nb;
    double nz = 0.0;
    for (const auto& [ab, c] : cells) {
      na[ab.first] += c;
      nb[ab.second] += c;
      nz += c;
    }
    for (const auto& [ab, c] : cells) g2 += 2.0 * c * std::log(c * nz / (na[ab.first] * nb[ab.second]));
  }
  return g2;
}

/// Skeleton from testing every conditioning set of size <= k drawn from all
/// other variables.
inline MixedGraph skeleton_all_subsets(const mfgsbs::DiscreteTable& t, double alpha, int k,
                                       const mfgsbs::CiOptions& ci = {}) {
  const int n = static_cast<int>(t.num_variables());
  MixedGraph g(t.names());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      std::vector<int> rest;
      for (int v = 0; v < n; ++v) {
        if (v != a && v != b) rest.push_back(v);
      }
      bool separated = false;
      for (const auto& z : subsets(rest, static_cast<std::size_t>(k))) {
        const auto r = mfgsbs::g2_test(t, a, b, z, ci);
        if (!r.skipped && r.p_value > alpha) {
          separated = true;
          break;
        }
      }
      if (!separated) g.add_undirected(a, b);
    }
  }
  return g;
}

}  // namespace oracle
