#ifndef MFGSBS_SEARCH_HPP
#define MFGSBS_SEARCH_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <iterator>
#include <optional>
#include <random>
#include <vector>

#include "mfgsbs/dataset.hpp"
#include "mfgsbs/graph.hpp"
#include "mfgsbs/parallel.hpp"
#include "mfgsbs/score.hpp"

namespace mfgsbs {

enum class SearchAlgorithm { Ges, HillClimb };

struct SearchConfig {
  SearchAlgorithm algorithm = SearchAlgorithm::Ges;
  int max_indegree = 6;
  int tabu_length = 10;  // hill climbing only
  int restarts = 0;      // hill climbing only
  std::uint64_t seed = 0;  // drives restart perturbations only
  BdeuParams bdeu;
};

struct SearchResult {
  MixedGraph dag;
  MixedGraph cpdag;
  double score = 0.0;
  std::vector<double> trajectory;  // score after each accepted move of the final climb
};

enum class MoveKind : int { Add = 0, Delete = 1, Reverse = 2 };

struct Move {
  int source = 0;
  int target = 0;
  MoveKind kind = MoveKind::Add;
  friend bool operator==(const Move&, const Move&) = default;
};

namespace detail {

class Climber {
public:
  Climber(const DiscreteTable& table, const SearchConfig& config, ScoreCache& cache, const RunControl& control)
      : table_(table), config_(config), cache_(cache), control_(control), n_(static_cast<int>(table.num_variables())) {}

  std::vector<std::vector<int>> empty() const { return std::vector<std::vector<int>>(static_cast<std::size_t>(n_)); }

  double local(int v, const std::vector<int>& parents) { return cache_.local(table_, v, parents, config_.bdeu); }

  double total(const std::vector<std::vector<int>>& parents) {
    double s = 0.0;
    for (int v = 0; v < n_; ++v) s += local(v, parents[static_cast<std::size_t>(v)]);
    return s;
  }

  /// Greedy ascent; returns the accepted-move score trajectory.
  std::vector<double> climb(std::vector<std::vector<int>>& parents) {
    std::vector<double> scores(static_cast<std::size_t>(n_));
    for (int v = 0; v < n_; ++v) scores[static_cast<std::size_t>(v)] = local(v, parents[static_cast<std::size_t>(v)]);
    std::deque<Move> tabu;
    std::vector<double> trajectory;
    constexpr double kMinGain = 1e-7;
    for (;;) {
      control_.check();
      const auto reach = reachability(parents);
      double best_gain = kMinGain;
      std::optional<Move> best;
      for (int s = 0; s < n_; ++s) {
        for (int t = 0; t < n_; ++t) {
          if (s == t) continue;
          const auto& pt = parents[static_cast<std::size_t>(t)];
          const auto& ps = parents[static_cast<std::size_t>(s)];
          const bool s_to_t = std::binary_search(pt.begin(), pt.end(), s);
          const bool t_to_s = std::binary_search(ps.begin(), ps.end(), t);
          auto consider = [&](Move m, double gain) {
            if (gain > best_gain && !is_tabu(tabu, m)) {
              best_gain = gain;
              best = m;
            }
          };
          if (!s_to_t && !t_to_s) {
            if (static_cast<int>(pt.size()) < config_.max_indegree && !reach[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]) {
              consider({s, t, MoveKind::Add}, local(t, with(pt, s)) - scores[static_cast<std::size_t>(t)]);
            }
          } else if (s_to_t) {
            const double drop = local(t, without(pt, s)) - scores[static_cast<std::size_t>(t)];
            consider({s, t, MoveKind::Delete}, drop);
            if (static_cast<int>(ps.size()) < config_.max_indegree && !reaches_indirectly(parents, s, t)) {
              consider({s, t, MoveKind::Reverse}, drop + local(s, with(ps, t)) - scores[static_cast<std::size_t>(s)]);
            }
          }
        }
      }
      if (!best) break;
      apply(parents, *best);
      for (int v : {best->source, best->target}) {
        scores[static_cast<std::size_t>(v)] = local(v, parents[static_cast<std::size_t>(v)]);
      }
      tabu.push_back(*best);
      while (static_cast<int>(tabu.size()) > std::max(config_.tabu_length, 0)) tabu.pop_front();
      double sum = 0.0;
      for (double x : scores) sum += x;
      trajectory.push_back(sum);
    }
    return trajectory;
  }

  static void apply(std::vector<std::vector<int>>& parents, const Move& m) {
    auto& pt = parents[static_cast<std::size_t>(m.target)];
    auto& ps = parents[static_cast<std::size_t>(m.source)];
    switch (m.kind) {
      case MoveKind::Add:
        pt = with(pt, m.source);
        break;
      case MoveKind::Delete:
        pt = without(pt, m.source);
        break;
      case MoveKind::Reverse:
        pt = without(pt, m.source);
        ps = with(ps, m.target);
        break;
    }
  }

  /// One random legal move; used to perturb the incumbent between restarts.
  bool random_move(std::vector<std::vector<int>>& parents, std::mt19937_64& rng) {
    const auto reach = reachability(parents);
    std::vector<Move> legal;
    for (int s = 0; s < n_; ++s) {
      for (int t = 0; t < n_; ++t) {
        if (s == t) continue;
        const auto& pt = parents[static_cast<std::size_t>(t)];
        const auto& ps = parents[static_cast<std::size_t>(s)];
        const bool s_to_t = std::binary_search(pt.begin(), pt.end(), s);
        const bool t_to_s = std::binary_search(ps.begin(), ps.end(), t);
        if (!s_to_t && !t_to_s) {
          if (static_cast<int>(pt.size()) < config_.max_indegree && !reach[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]) {
            legal.push_back({s, t, MoveKind::Add});
          }
        } else if (s_to_t) {
          legal.push_back({s, t, MoveKind::Delete});
          if (static_cast<int>(ps.size()) < config_.max_indegree && !reaches_indirectly(parents, s, t)) {
            legal.push_back({s, t, MoveKind::Reverse});
          }
        }
      }
    }
    if (legal.empty()) return false;
    apply(parents, legal[static_cast<std::size_t>(rng() % legal.size())]);
    return true;
  }

  MixedGraph to_graph(const std::vector<std::vector<int>>& parents) const {
    MixedGraph g(table_.names());
    for (int v = 0; v < n_; ++v) {
      for (int p : parents[static_cast<std::size_t>(v)]) g.add_directed(p, v);
    }
    return g;
  }

private:
  static std::vector<int> with(const std::vector<int>& set, int v) {
    auto out = set;
    out.insert(std::upper_bound(out.begin(), out.end(), v), v);
    return out;
  }

  static std::vector<int> without(const std::vector<int>& set, int v) {
    auto out = set;
    out.erase(std::remove(out.begin(), out.end(), v), out.end());
    return out;
  }

  static bool is_tabu(const std::deque<Move>& tabu, const Move& m) {
    for (const auto& t : tabu) {
      const bool undoes = (m.kind == MoveKind::Delete && t.kind == MoveKind::Add && m.source == t.source && m.target == t.target) ||
                          (m.kind == MoveKind::Add && t.kind == MoveKind::Delete && m.source == t.source && m.target == t.target) ||
                          (m.kind == MoveKind::Reverse && t.kind == MoveKind::Reverse && m.source == t.target && m.target == t.source);
      if (undoes) return true;
    }
    return false;
  }

  // reach[u][v]: directed path u -> ... -> v.
  std::vector<std::vector<bool>> reachability(const std::vector<std::vector<int>>& parents) const {
    std::vector<std::vector<int>> kids(static_cast<std::size_t>(n_));
    for (int v = 0; v < n_; ++v) {
      for (int p : parents[static_cast<std::size_t>(v)]) kids[static_cast<std::size_t>(p)].push_back(v);
    }
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n_), std::vector<bool>(static_cast<std::size_t>(n_), false));
    for (int s = 0; s < n_; ++s) {
      auto& row = reach[static_cast<std::size_t>(s)];
      std::vector<int> stack = kids[static_cast<std::size_t>(s)];
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (row[static_cast<std::size_t>(v)]) continue;
        row[static_cast<std::size_t>(v)] = true;
        for (int w : kids[static_cast<std::size_t>(v)]) stack.push_back(w);
      }
    }
    return reach;
  }

  // Whether s reaches t by a directed path other than the edge s -> t itself.
  bool reaches_indirectly(const std::vector<std::vector<int>>& parents, int s, int t) const {
    std::vector<bool> seen(static_cast<std::size_t>(n_), false);
    std::vector<int> stack;
    for (int v = 0; v < n_; ++v) {
      if (v == t) continue;
      const auto& pv = parents[static_cast<std::size_t>(v)];
      if (std::binary_search(pv.begin(), pv.end(), s)) stack.push_back(v);
    }
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (v == t) return true;
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = true;
      for (int w = 0; w < n_; ++w) {
        const auto& pw = parents[static_cast<std::size_t>(w)];
        if (!seen[static_cast<std::size_t>(w)] && std::binary_search(pw.begin(), pw.end(), v)) stack.push_back(w);
      }
    }
    return false;
  }

  const DiscreteTable& table_;
  const SearchConfig& config_;
  ScoreCache& cache_;
  const RunControl& control_;
  int n_;
};

}  // namespace detail

/// Greedy hill-climbing over DAGs from the empty graph with add, delete and
/// reverse moves under BDeu. Ties go to the lexicographically first
/// (source, target, kind). Optional restarts perturb the incumbent and climb
/// again, keeping the best DAG found.
inline SearchResult hill_climb(const DiscreteTable& table, const SearchConfig& config, ScoreCache* cache = nullptr,
                               const RunControl& control = {}) {
  if (config.max_indegree < 1) throw DomainError("max in-degree must be >= 1");
  if (table.rows() == 0) throw DomainError("cannot search on an empty table");
  ScoreCache local_cache;
  ScoreCache& scores = cache ? *cache : local_cache;
  detail::Climber climber(table, config, scores, control);

  auto parents = climber.empty();
  auto trajectory = climber.climb(parents);
  double best_score = climber.total(parents);
  auto best = parents;

  std::mt19937_64 rng(config.seed);
  const int kicks = std::max(1, static_cast<int>(table.num_variables()) / 2);
  for (int r = 0; r < config.restarts; ++r) {
    auto trial = best;
    for (int k = 0; k < kicks; ++k) climber.random_move(trial, rng);
    auto trial_path = climber.climb(trial);
    const double s = climber.total(trial);
    if (s > best_score + 1e-7) {
      best_score = s;
      best = trial;
      trajectory = std::move(trial_path);
    }
  }

  SearchResult out;
  out.dag = climber.to_graph(best);
  out.cpdag = dag_to_cpdag(out.dag);
  out.score = best_score;
  out.trajectory = std::move(trajectory);
  return out;
}

namespace detail {

class EquivalenceSearch {
public:
  EquivalenceSearch(const DiscreteTable& table, const SearchConfig& config, ScoreCache& cache, const RunControl& control)
      : table_(table), config_(config), cache_(cache), control_(control), n_(static_cast<int>(table.num_variables())) {}

  MixedGraph run() {
    MixedGraph g(table_.names());
    while (forward(g)) {
    }
    while (backward(g)) {
    }
    return g;
  }

private:
  static constexpr double kMinGain = 1e-7;

  double local(int v, std::vector<int> parents) { return cache_.local(table_, v, std::move(parents), config_.bdeu); }

  static std::vector<int> merge(std::vector<int> a, const std::vector<int>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
  }

  std::vector<int> undirected_neighbors(const MixedGraph& g, int v) const {
    std::vector<int> out;
    for (int u = 0; u < n_; ++u) {
      if (u != v && g.has_undirected(u, v)) out.push_back(u);
    }
    return out;
  }

  static bool clique(const MixedGraph& g, const std::vector<int>& set) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t j = i + 1; j < set.size(); ++j) {
        if (!g.adjacent(set[i], set[j])) return false;
      }
    }
    return true;
  }

  // Whether some path from `from` to `to` uses only undirected edges and
  // edges directed away from `from`, avoiding `blocked`.
  bool semi_directed(const MixedGraph& g, int from, int to, const std::vector<int>& blocked) const {
    std::vector<bool> seen(static_cast<std::size_t>(n_), false);
    for (int b : blocked) seen[static_cast<std::size_t>(b)] = true;
    std::vector<int> stack{from};
    seen[static_cast<std::size_t>(from)] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n_; ++v) {
        if (seen[static_cast<std::size_t>(v)] || !(g.has_directed(u, v) || g.has_undirected(u, v))) continue;
        if (v == to) return true;
        seen[static_cast<std::size_t>(v)] = true;
        stack.push_back(v);
      }
    }
    return false;
  }

  static MixedGraph complete(const MixedGraph& pdag) { return dag_to_cpdag(pdag_to_dag(pdag)); }

  // Best single-edge insertion x -> y with undirected neighbors T of y turned
  // into parents of y.
  bool forward(MixedGraph& g) {
    control_.check();
    double best = kMinGain;
    int bx = -1, by = -1;
    std::vector<int> bt;
    for (int x = 0; x < n_; ++x) {
      for (int y = 0; y < n_; ++y) {
        if (x == y || g.adjacent(x, y)) continue;
        const auto pa = g.parents(y);
        std::vector<int> na, t0;
        for (int v : undirected_neighbors(g, y)) (g.adjacent(v, x) ? na : t0).push_back(v);
        const int room = config_.max_indegree - static_cast<int>(pa.size() + na.size()) - 1;
        if (room < 0) continue;
        for (std::size_t k = 0; k <= std::min<std::size_t>(t0.size(), static_cast<std::size_t>(room)); ++k) {
          for_each_combination(t0, k, [&](const std::vector<int>& t) {
            const auto s = merge(na, t);
            if (!clique(g, s) || semi_directed(g, y, x, s)) return false;
            const auto base = merge(s, pa);
            const double delta = local(y, merge(base, {x})) - local(y, base);
            if (delta > best) {
              best = delta;
              bx = x;
              by = y;
              bt = t;
            }
            return false;
          });
        }
      }
    }
    if (bx < 0) return false;
    g.add_directed(bx, by);
    for (int t : bt) g.set_edge(t, by, Mark::Tail, Mark::Arrow);
    g = complete(g);
    return true;
  }

  // Best single-edge deletion of x -> y or x - y, orienting the subset H of
  // y's undirected neighbors adjacent to x away from y and x.
  bool backward(MixedGraph& g) {
    control_.check();
    double best = kMinGain;
    int bx = -1, by = -1;
    std::vector<int> bh;
    for (int x = 0; x < n_; ++x) {
      for (int y = 0; y < n_; ++y) {
        if (x == y || !(g.has_directed(x, y) || g.has_undirected(x, y))) continue;
        auto pa = g.parents(y);
        pa.erase(std::remove(pa.begin(), pa.end(), x), pa.end());
        std::vector<int> h0;
        for (int v : undirected_neighbors(g, y)) {
          if (v != x && g.adjacent(v, x)) h0.push_back(v);
        }
        for (std::size_t k = 0; k <= h0.size(); ++k) {
          for_each_combination(h0, k, [&](const std::vector<int>& h) {
            std::vector<int> rest;
            std::set_difference(h0.begin(), h0.end(), h.begin(), h.end(), std::back_inserter(rest));
            if (!clique(g, rest)) return false;
            const auto base = merge(rest, pa);
            const double delta = local(y, base) - local(y, merge(base, {x}));
            if (delta > best) {
              best = delta;
              bx = x;
              by = y;
              bh = h;
            }
            return false;
          });
        }
      }
    }
    if (bx < 0) return false;
    g.remove_edge(bx, by);
    for (int h : bh) {
      g.set_edge(by, h, Mark::Tail, Mark::Arrow);
      if (g.has_undirected(bx, h)) g.set_edge(bx, h, Mark::Tail, Mark::Arrow);
    }
    g = complete(g);
    return true;
  }

  const DiscreteTable& table_;
  const SearchConfig& config_;
  ScoreCache& cache_;
  const RunControl& control_;
  int n_;
};

}  // namespace detail

/// Greedy equivalence search under BDeu: single-edge insertions over CPDAGs
/// until none improves the score, then single-edge deletions likewise.
/// Candidates are scanned in (x, y, subset) order and only a strictly better
/// gain replaces the incumbent, so ties resolve to the first candidate.
inline MixedGraph ges(const DiscreteTable& table, const SearchConfig& config, ScoreCache* cache = nullptr,
                      const RunControl& control = {}) {
  if (config.max_indegree < 1) throw DomainError("max in-degree must be >= 1");
  if (table.rows() == 0) throw DomainError("cannot search on an empty table");
  ScoreCache local_cache;
  detail::EquivalenceSearch search(table, config, cache ? *cache : local_cache, control);
  return search.run();
}

/// Learns a CPDAG from one table, with no knowledge of intervention targets.
inline MixedGraph learn_cpdag(const DiscreteTable& table, const SearchConfig& config = {}, ScoreCache* cache = nullptr,
                              const RunControl& control = {}) {
  if (config.algorithm == SearchAlgorithm::HillClimb) return hill_climb(table, config, cache, control).cpdag;
  return ges(table, config, cache, control);
}

}  // namespace mfgsbs

#endif  // MFGSBS_SEARCH_HPP
