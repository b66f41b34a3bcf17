#ifndef MFGSBS_INDEP_HPP
#define MFGSBS_INDEP_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "mfgsbs/dataset.hpp"
#include "mfgsbs/graph.hpp"
#include "mfgsbs/parallel.hpp"
#include "mfgsbs/special.hpp"

namespace mfgsbs {

struct CiOptions {
  // Tests whose contingency table exceeds this many cells are not run and
  // count as dependence.
  std::uint64_t max_cells = 1'000'000;
  // Per-stratum degrees of freedom from non-empty rows and columns instead of
  // the nominal (|A|-1)(|B|-1)prod|Z| formula.
  bool adjust_dof = false;
};

struct CiResult {
  double g2 = 0.0;
  std::uint64_t dof = 1;
  double p_value = 1.0;
  bool skipped = false;
};

/// G-squared likelihood-ratio test of a _||_ b | z.
inline CiResult g2_test(const DiscreteTable& table, int a, int b, std::span<const int> z,
                        const CiOptions& options = {}) {
  if (a == b) throw DomainError("g2_test needs two distinct variables");
  for (int v : z) {
    if (v == a || v == b) throw DomainError("conditioning set contains a tested variable");
  }
  if (a > b) std::swap(a, b);  // exact symmetry in (a, b)

  const auto ra = static_cast<std::uint64_t>(table.cardinality(a));
  const auto rb = static_cast<std::uint64_t>(table.cardinality(b));
  std::uint64_t strata = 1;
  const double limit = static_cast<double>(options.max_cells);
  double cells_estimate = static_cast<double>(ra * rb);
  for (int v : z) {
    strata *= static_cast<std::uint64_t>(table.cardinality(v));
    cells_estimate *= table.cardinality(v);
    if (cells_estimate > limit) break;
  }
  CiResult result;
  if (cells_estimate > limit) {
    result.skipped = true;
    result.p_value = 0.0;
    result.g2 = std::numeric_limits<double>::infinity();
    return result;
  }

  std::vector<std::uint64_t> n_abz(strata * ra * rb, 0);
  const auto& col_a = table.column(a);
  const auto& col_b = table.column(b);
  for (std::size_t row = 0; row < table.rows(); ++row) {
    const auto s = parent_config(table, row, z);
    n_abz[(s * ra + static_cast<std::uint64_t>(col_a[row])) * rb + static_cast<std::uint64_t>(col_b[row])]++;
  }

  double g2 = 0.0;
  std::uint64_t adjusted_dof = 0;
  std::vector<std::uint64_t> n_az(ra), n_bz(rb);
  for (std::uint64_t s = 0; s < strata; ++s) {
    std::fill(n_az.begin(), n_az.end(), 0);
    std::fill(n_bz.begin(), n_bz.end(), 0);
    std::uint64_t n_z = 0;
    const auto* cell = &n_abz[s * ra * rb];
    for (std::uint64_t i = 0; i < ra; ++i) {
      for (std::uint64_t j = 0; j < rb; ++j) {
        const auto c = cell[i * rb + j];
        n_az[i] += c;
        n_bz[j] += c;
        n_z += c;
      }
    }
    if (n_z == 0) continue;
    for (std::uint64_t i = 0; i < ra; ++i) {
      for (std::uint64_t j = 0; j < rb; ++j) {
        const auto c = cell[i * rb + j];
        if (c == 0) continue;
        g2 += static_cast<double>(c) * std::log(static_cast<double>(c) * static_cast<double>(n_z) /
                                                (static_cast<double>(n_az[i]) * static_cast<double>(n_bz[j])));
      }
    }
    if (options.adjust_dof) {
      const auto rows_used = static_cast<std::uint64_t>(std::count_if(n_az.begin(), n_az.end(), [](auto x) { return x > 0; }));
      const auto cols_used = static_cast<std::uint64_t>(std::count_if(n_bz.begin(), n_bz.end(), [](auto x) { return x > 0; }));
      if (rows_used > 1 && cols_used > 1) adjusted_dof += (rows_used - 1) * (cols_used - 1);
    }
  }
  result.g2 = std::max(0.0, 2.0 * g2);
  result.dof = options.adjust_dof ? std::max<std::uint64_t>(adjusted_dof, 1) : (ra - 1) * (rb - 1) * strata;
  result.p_value = chi2_sf(result.g2, static_cast<double>(result.dof));
  return result;
}

/// Every separating set recorded per unordered pair.
class SepsetCatalog {
public:
  using Pair = std::pair<int, int>;

  void add(int a, int b, std::vector<int> z) {
    std::sort(z.begin(), z.end());
    auto& sets = map_[key(a, b)];
    if (std::find(sets.begin(), sets.end(), z) == sets.end()) sets.push_back(std::move(z));
  }

  const std::vector<std::vector<int>>& sepsets(int a, int b) const {
    static const std::vector<std::vector<int>> empty;
    auto it = map_.find(key(a, b));
    return it == map_.end() ? empty : it->second;
  }

  bool separated(int a, int b) const { return !sepsets(a, b).empty(); }

  const std::map<Pair, std::vector<std::vector<int>>>& entries() const { return map_; }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [k, v] : map_) n += v.size();
    return n;
  }

  static Pair key(int a, int b) { return a < b ? Pair{a, b} : Pair{b, a}; }

private:
  std::map<Pair, std::vector<std::vector<int>>> map_;
};

struct SkeletonOptions {
  double alpha = 0.05;  // significance threshold t
  int max_sepset = 10;  // k
  CiOptions ci;
};

struct Skeleton {
  MixedGraph graph;  // undirected (Tail-Tail) edges
  SepsetCatalog catalog;
  std::size_t tests = 0;
};

/// Order-independent adjacency search. For each conditioning size 0..k, every
/// remaining edge is tested against subsets of the neighborhoods fixed at the
/// start of that size; an edge is dropped at its first separating set.
inline Skeleton learn_skeleton(const DiscreteTable& table, const SkeletonOptions& options,
                               const RunControl& control = {}) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw DomainError("significance must lie in (0, 1)");
  if (options.max_sepset < 0) throw DomainError("max Sepset size must be >= 0");
  const int n = static_cast<int>(table.num_variables());
  Skeleton out{MixedGraph(table.names()), {}, 0};
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) out.graph.add_undirected(a, b);
  }

  for (int size = 0; size <= options.max_sepset; ++size) {
    control.check();
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) adj[static_cast<std::size_t>(v)] = out.graph.neighbors(v);
    const auto edges = out.graph.edges();
    bool any_testable = false;
    for (const auto& e : edges) {
      if (adj[static_cast<std::size_t>(e.a)].size() > static_cast<std::size_t>(size) ||
          adj[static_cast<std::size_t>(e.b)].size() > static_cast<std::size_t>(size)) {
        any_testable = true;
      }
    }
    if (!any_testable) break;

    std::vector<std::optional<std::vector<int>>> found(edges.size());
    std::vector<std::size_t> tests(edges.size(), 0);
    parallel_for(edges.size(), control.threads, [&](std::size_t i) {
      const auto [a, b, ma, mb] = edges[i];
      for (int side : {a, b}) {
        const int other = side == a ? b : a;
        std::vector<int> candidates;
        for (int v : adj[static_cast<std::size_t>(side)]) {
          if (v != other) candidates.push_back(v);
        }
        const bool hit = for_each_combination(candidates, static_cast<std::size_t>(size), [&](const std::vector<int>& z) {
          ++tests[i];
          auto r = g2_test(table, a, b, z, options.ci);
          if (!r.skipped && r.p_value > options.alpha) {
            found[i] = z;
            return true;
          }
          return false;
        });
        if (hit) return;
      }
    });
    for (std::size_t i = 0; i < edges.size(); ++i) {
      out.tests += tests[i];
      if (found[i]) {
        out.graph.remove_edge(edges[i].a, edges[i].b);
        out.catalog.add(edges[i].a, edges[i].b, *found[i]);
      }
    }
  }
  return out;
}

struct Triple {
  int a = 0;
  int b = 0;  // middle node
  int c = 0;
  friend bool operator==(const Triple&, const Triple&) = default;
};

/// Unshielded triples a - b - c of an undirected graph with a < c, ordered by
/// (a, b, c).
inline std::vector<Triple> unshielded_triples(const MixedGraph& u) {
  std::vector<Triple> out;
  const int n = static_cast<int>(u.size());
  for (int b = 0; b < n; ++b) {
    const auto nb = u.neighbors(b);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        if (!u.adjacent(nb[i], nb[j])) out.push_back({nb[i], b, nb[j]});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Triple& x, const Triple& y) {
    return std::tie(x.a, x.b, x.c) < std::tie(y.a, y.b, y.c);
  });
  return out;
}

/// All S within (adj(a) U adj(c)) \ {a, c}, |S| <= k, with a _||_ c | S at
/// level alpha. Sets are returned in order of size, then lexicographically.
inline std::vector<std::vector<int>> pair_sepsets(const DiscreteTable& table, const MixedGraph& u, int a, int c,
                                                  const SkeletonOptions& options) {
  std::set<int> pool_set;
  for (int v : u.neighbors(a)) pool_set.insert(v);
  for (int v : u.neighbors(c)) pool_set.insert(v);
  pool_set.erase(a);
  pool_set.erase(c);
  const std::vector<int> pool(pool_set.begin(), pool_set.end());
  std::vector<std::vector<int>> out;
  const auto max_size = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(options.max_sepset, 0)));
  for (std::size_t size = 0; size <= max_size; ++size) {
    for_each_combination(pool, size, [&](const std::vector<int>& z) {
      auto r = g2_test(table, a, c, z, options.ci);
      if (!r.skipped && r.p_value > options.alpha) out.push_back(z);
      return false;
    });
  }
  return out;
}

struct TripleRatio {
  Triple triple;
  std::size_t containing = 0;
  std::size_t total = 0;
  std::optional<double> ratio;  // empty when no Sepset exists
};

/// Fraction of the recorded Sepsets of (a, c) that contain the middle node.
inline TripleRatio sepset_ratio(const SepsetCatalog& catalog, const Triple& t) {
  TripleRatio out{t, 0, 0, std::nullopt};
  for (const auto& z : catalog.sepsets(t.a, t.c)) {
    ++out.total;
    if (std::find(z.begin(), z.end(), t.b) != z.end()) ++out.containing;
  }
  if (out.total > 0) out.ratio = static_cast<double>(out.containing) / static_cast<double>(out.total);
  return out;
}

/// Tests a and c against every subset of their joint neighborhood, merges the
/// separating sets into the catalog, and returns the Sepset ratio for b.
inline TripleRatio triple_sepset_ratio(const DiscreteTable& table, const Triple& t, const MixedGraph& u,
                                       SepsetCatalog& catalog, const SkeletonOptions& options) {
  if (!u.adjacent(t.a, t.b) || !u.adjacent(t.b, t.c)) throw DomainError("not a triple of the skeleton");
  if (u.adjacent(t.a, t.c)) throw DomainError("triple is shielded: its endpoints are adjacent");
  for (auto& z : pair_sepsets(table, u, t.a, t.c, options)) catalog.add(t.a, t.c, std::move(z));
  return sepset_ratio(catalog, t);
}

}  // namespace mfgsbs

#endif  // MFGSBS_INDEP_HPP
