#ifndef MFGSBS_SCORE_HPP
#define MFGSBS_SCORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <tuple>
#include <vector>

#include "mfgsbs/dataset.hpp"
#include "mfgsbs/graph.hpp"
#include "mfgsbs/special.hpp"

namespace mfgsbs {

struct BdeuParams {
  double ess = 1.0;  // equivalent sample size alpha
};

inline void validate(const BdeuParams& p) {
  if (!(p.ess > 0.0)) throw DomainError("BDeu equivalent sample size must be positive");
}

/// Log marginal likelihood of one family under BDeu:
///   sum_j [lnG(a/q) - lnG(a/q + n_ij)] + sum_jk [lnG(a/(rq) + n_ijk) - lnG(a/(rq))]
/// Unobserved parent configurations contribute exactly zero and are skipped.
inline double local_bdeu(const ContingencyCounts& counts, const BdeuParams& params = {}) {
  validate(params);
  const double q = static_cast<double>(counts.q);
  const double r = static_cast<double>(counts.child_states);
  const double a_j = params.ess / q;
  const double a_jk = params.ess / (q * r);
  const double lg_j = log_gamma(a_j);
  const double lg_jk = log_gamma(a_jk);
  double score = 0.0;
  const auto rs = static_cast<std::size_t>(counts.child_states);
  for (std::size_t row = 0; row < counts.configs.size(); ++row) {
    std::uint64_t n_ij = 0;
    double inner = 0.0;
    for (std::size_t k = 0; k < rs; ++k) {
      const auto n = counts.cells[row * rs + k];
      n_ij += n;
      if (n > 0) inner += log_gamma(a_jk + static_cast<double>(n)) - lg_jk;
    }
    score += lg_j - log_gamma(a_j + static_cast<double>(n_ij)) + inner;
  }
  return score;
}

inline double local_bdeu(const DiscreteTable& table, int node, std::span<const int> parents,
                         const BdeuParams& params = {}) {
  if (table.rows() == 0) throw DomainError("cannot score an empty table");
  return local_bdeu(count(table, node, parents), params);
}

/// Thread-safe memo of local scores keyed by (table id, node, sorted parents,
/// ess). Entries are never invalidated because tables are immutable.
class ScoreCache {
public:
  double local(const DiscreteTable& table, int node, std::vector<int> parents, const BdeuParams& params = {}) {
    std::sort(parents.begin(), parents.end());
    Key key{table.id(), node, params.ess, parents};
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    const double value = local_bdeu(table, node, parents, params);
    std::unique_lock lock(mutex_);
    map_.emplace(std::move(key), value);
    return value;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }

private:
  struct Key {
    std::uint64_t table;
    int node;
    double ess;
    std::vector<int> parents;
    friend bool operator<(const Key& x, const Key& y) {
      return std::tie(x.table, x.node, x.ess, x.parents) < std::tie(y.table, y.node, y.ess, y.parents);
    }
  };
  mutable std::shared_mutex mutex_;
  std::map<Key, double> map_;
};

/// Sum of local scores of a DAG over the table's variables, in node order.
inline double graph_bdeu(const DiscreteTable& table, const MixedGraph& dag, const BdeuParams& params = {}) {
  require_dag(dag);
  if (dag.size() != table.num_variables()) throw DomainError("graph and table have different variables");
  double total = 0.0;
  for (int v = 0; v < static_cast<int>(dag.size()); ++v) {
    const auto ps = dag.parents(v);
    total += local_bdeu(table, v, ps, params);
  }
  return total;
}

/// Log marginal likelihoods of the three two-node structures over (a, b).
struct PairMarginals {
  double log_empty = 0.0;  // a   b
  double log_ab = 0.0;     // a -> b
  double log_ba = 0.0;     // a <- b
};

inline PairMarginals pair_marginals(const DiscreteTable& table, int a, int b, const BdeuParams& params = {},
                                    ScoreCache* cache = nullptr) {
  if (a == b) throw DomainError("pair_marginals needs two distinct variables");
  auto local = [&](int node, std::vector<int> parents) {
    return cache ? cache->local(table, node, std::move(parents), params) : local_bdeu(table, node, parents, params);
  };
  const double za = local(a, {});
  const double zb = local(b, {});
  return {za + zb, za + local(b, {a}), local(a, {b}) + zb};
}

/// Pair marginals on data where the nodes in `targets` were set by
/// intervention: a forced node's own family term is the same under every
/// structure and is left out, so only the unforced node's term compares the
/// structures.
inline PairMarginals pair_marginals(const DiscreteTable& table, int a, int b, std::span<const int> targets,
                                    const BdeuParams& params = {}, ScoreCache* cache = nullptr) {
  if (a == b) throw DomainError("pair_marginals needs two distinct variables");
  auto forced = [&](int v) { return std::find(targets.begin(), targets.end(), v) != targets.end(); };
  auto local = [&](int node, std::vector<int> parents) {
    if (forced(node)) return 0.0;
    return cache ? cache->local(table, node, std::move(parents), params) : local_bdeu(table, node, parents, params);
  };
  const double za = local(a, {});
  const double zb = local(b, {});
  return {za + zb, za + local(b, {a}), local(a, {b}) + zb};
}

/// |(z_obs - z_int) / z_obs|; zero (with a warning) when z_obs is zero.
inline double relative_change(double z_obs, double z_int) {
  if (z_obs == 0.0) {
    std::cerr << "warning: relative score change with a zero observational score; using 0\n";
    return 0.0;
  }
  return std::fabs((z_obs - z_int) / z_obs);
}

}  // namespace mfgsbs

#endif  // MFGSBS_SCORE_HPP
