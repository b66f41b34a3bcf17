#ifndef MFGSBS_FUSION_HPP
#define MFGSBS_FUSION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfgsbs/dataset.hpp"
#include "mfgsbs/graph.hpp"
#include "mfgsbs/indep.hpp"
#include "mfgsbs/parallel.hpp"
#include "mfgsbs/score.hpp"
#include "mfgsbs/search.hpp"

namespace mfgsbs {

/// Which of the three prior components take part in the prior. A disabled
/// component contributes 0.
struct FactorMask {
  bool occurrence = true;   // Factor 1: directed-edge rates over learnt CPDAGs
  bool collider = true;     // Factor 2: Sepset ratios of unshielded triples
  bool score_shift = true;  // Factor 3: relative local-score changes under intervention

  /// Parses a list such as "1,2,3", "13" or "2".
  static FactorMask parse(std::string_view spec) {
    FactorMask m{false, false, false};
    bool any = false;
    for (char ch : spec) {
      switch (ch) {
        case '1': m.occurrence = true; any = true; break;
        case '2': m.collider = true; any = true; break;
        case '3': m.score_shift = true; any = true; break;
        case ',': case ' ': break;
        default: throw ValidationError("factor list may only contain 1, 2 and 3");
      }
    }
    if (!any) throw ValidationError("factor list is empty");
    return m;
  }

  std::string to_string() const {
    std::string s;
    if (occurrence) s += "1";
    if (collider) s += "2";
    if (score_shift) s += "3";
    return s;
  }
};

/// Which (target, node) pairs receive a relative score change.
enum class Factor3Scope {
  AllTargetPairs,  // every node B paired with every target A
  UndirectedInCpdag  // only B joined to A by an undirected edge in the CPDAG of that data set
};

/// Parent set used for the local scores compared by Factor 3.
enum class Factor3Parents {
  Empty,             // marginal score of B
  InterventionCpdag  // directed parents of B in the CPDAG learnt from that data set
};

/// Reference structure in the likelihood ratio of the posterior update.
enum class LikelihoodReference {
  Disconnected,  // P(D | A -> B) against P(D | A  B)
  Reverse        // P(D | A -> B) against P(D | A <- B)
};

struct HyperParams {
  double significance = 0.05;  // t
  double cutoff = 0.5;         // c
  int max_sepset = 10;         // k
  BdeuParams bdeu;
  FactorMask factors;
  Factor3Scope factor3_scope = Factor3Scope::UndirectedInCpdag;
  Factor3Parents factor3_parents = Factor3Parents::Empty;
  LikelihoodReference likelihood = LikelihoodReference::Reverse;
  bool drop_target_terms = true;  // score interventional data with forced nodes' terms left out
  CiOptions ci;
};

inline void validate(const HyperParams& h) {
  if (!(h.significance > 0.0 && h.significance < 1.0)) throw DomainError("significance must lie in (0, 1)");
  if (!(h.cutoff > 0.0 && h.cutoff < 1.0)) throw DomainError("cut-off must lie in (0, 1)");
  if (h.max_sepset < 0) throw DomainError("max Sepset size must be >= 0");
  validate(h.bdeu);
}

/// Square matrix of per-ordered-pair values, m(a, b) standing for a -> b.
class PairMatrix {
public:
  PairMatrix() = default;
  explicit PairMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  std::size_t size() const { return n_; }
  double& operator()(int a, int b) { return data_[index(a, b)]; }
  double operator()(int a, int b) const { return data_[index(a, b)]; }

private:
  std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * n_ + static_cast<std::size_t>(b); }
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct LedgerCpdag {
  MixedGraph cpdag;
  std::vector<int> targets;  // empty for the observational data set
  std::size_t dataset = 0;   // 0 = observational, i = i-th interventional
};

struct ScoreChange {
  int source = 0;  // intervention target
  int target = 0;  // node whose local score moved
  std::size_t dataset = 0;
  double value = 0.0;
};

/// Learnt CPDAGs and relative score changes accumulated across data sets.
struct FactorLedger {
  std::vector<LedgerCpdag> cpdags;
  std::vector<ScoreChange> changes;
};

namespace detail {
inline bool contains(const std::vector<int>& set, int v) { return std::find(set.begin(), set.end(), v) != set.end(); }
}  // namespace detail

/// Occurrence rate of a -> b over the ledger's CPDAGs. A directed edge counts
/// fully; an undirected a - b counts half towards a -> b (and fully towards
/// the denominator) in data sets that intervene on a, since the arrow cannot
/// enter a target. Undirected edges with neither endpoint targeted are
/// ignored. Zero when nothing counts.
inline double factor1(const FactorLedger& ledger, int a, int b) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& entry : ledger.cpdags) {
    const auto& g = entry.cpdag;
    if (g.has_directed(a, b)) {
      num += 1.0;
      den += 1.0;
    } else if (g.has_directed(b, a)) {
      den += 1.0;
    } else if (g.has_undirected(a, b)) {
      if (detail::contains(entry.targets, a)) {
        num += 0.5;
        den += 1.0;
      }
      if (detail::contains(entry.targets, b)) den += 1.0;
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Collider evidence from unshielded triples a - b - c: the arrows into b get
/// 1 - ratio when fewer than half the Sepsets of (a, c) contain b, otherwise
/// 0.5; the arrows out of b get 0.5. A triple with no Sepset is neutral
/// (0.5 everywhere). Pairs in several triples keep the maximum; pairs in none
/// stay 0.
inline PairMatrix factor2(std::span<const TripleRatio> ratios, std::size_t n) {
  PairMatrix p(n, 0.0);
  auto raise = [&](int x, int y, double v) { p(x, y) = std::max(p(x, y), v); };
  for (const auto& r : ratios) {
    const double into = (r.ratio && *r.ratio < 0.5) ? 1.0 - *r.ratio : 0.5;
    raise(r.triple.a, r.triple.b, into);
    raise(r.triple.c, r.triple.b, into);
    raise(r.triple.b, r.triple.a, 0.5);
    raise(r.triple.b, r.triple.c, 0.5);
  }
  return p;
}

/// Sum of the recorded relative score changes of b under interventions on a.
inline double factor3(const FactorLedger& ledger, int a, int b) {
  double s = 0.0;
  for (const auto& c : ledger.changes) {
    if (c.source == a && c.target == b) s += c.value;
  }
  return s;
}

/// max(factor1, factor2) + factor3, clamped to [0, 1], then raised to the
/// previous posterior if that is larger. Masked factors count as 0.
inline double combine_prior(double f1, double f2, double f3_sum, double previous_posterior,
                            const FactorMask& mask = {}) {
  const double m1 = mask.occurrence ? f1 : 0.0;
  const double m2 = mask.collider ? f2 : 0.0;
  const double m3 = mask.score_shift ? f3_sum : 0.0;
  const double raw = std::clamp(std::max(m1, m2) + m3, 0.0, 1.0);
  return std::max(raw, previous_posterior);
}

enum class Direction { Forward, Backward };  // a -> b, a <- b

/// Posterior of one directed edge: 1 - (1-p) m_ref / ((1-p) m_ref + p m_dir),
/// evaluated as a logistic of the log-odds so extreme likelihood ratios
/// neither overflow nor underflow. p = 0 and p = 1 are absorbing, and a
/// likelihood ratio of 1 returns p unchanged.
inline double posterior_update(double p, const PairMarginals& m, Direction dir,
                               LikelihoodReference reference = LikelihoodReference::Reverse) {
  if (!(p > 0.0)) return 0.0;
  if (!(p < 1.0)) return 1.0;
  const double log_dir = dir == Direction::Forward ? m.log_ab : m.log_ba;
  const double log_ref = reference == LikelihoodReference::Disconnected
                             ? m.log_empty
                             : (dir == Direction::Forward ? m.log_ba : m.log_ab);
  // Score-equivalent structures differ only by summation rounding; treat
  // such ratios as exactly 1 so a prior of 0.5 stays 0.5.
  const double diff = log_dir - log_ref;
  if (std::fabs(diff) <= 1e-9 * std::max({1.0, std::fabs(log_dir), std::fabs(log_ref)})) return p;
  const double log_odds = std::log(p) - std::log1p(-p) + diff;
  if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
  const double e = std::exp(log_odds);
  return e / (1.0 + e);
}

struct EdgeProb {
  double factor1 = 0.0;
  double factor2 = 0.0;
  double factor3_sum = 0.0;
  double prior = 0.0;
  double posterior = 0.0;
};

/// Per ordered pair (a, b): the prior components, prior and posterior of
/// a -> b.
class EdgeProbTable {
public:
  EdgeProbTable() = default;
  explicit EdgeProbTable(std::vector<std::string> names)
      : names_(std::move(names)), cells_(names_.size() * names_.size()) {}

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  EdgeProb& at(int a, int b) { return cells_[index(a, b)]; }
  const EdgeProb& at(int a, int b) const { return cells_[index(a, b)]; }
  double posterior(int a, int b) const { return at(a, b).posterior; }

private:
  std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * names_.size() + static_cast<std::size_t>(b); }
  std::vector<std::string> names_;
  std::vector<EdgeProb> cells_;
};

/// Selects edges by posterior: both directions above c give a <-> b, one
/// direction gives that arrow, neither gives a o-o b when the pair is adjacent
/// in the skeleton. Directed and almost directed cycles are then broken by
/// repeatedly deleting the participating edge with the lowest posterior
/// (bidirected edges weigh the smaller of their two posteriors; ties go to the
/// lexicographically smallest pair).
inline MixedGraph build_pag(const EdgeProbTable& probs, const MixedGraph& skeleton, double cutoff) {
  const int n = static_cast<int>(probs.size());
  if (skeleton.size() != probs.size()) throw DomainError("skeleton and probability table differ in size");
  MixedGraph pag(probs.names());
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const bool fwd = probs.posterior(a, b) > cutoff;
      const bool bwd = probs.posterior(b, a) > cutoff;
      if (fwd && bwd) {
        pag.add_bidirected(a, b);
      } else if (fwd) {
        pag.add_directed(a, b);
      } else if (bwd) {
        pag.add_directed(b, a);
      } else if (skeleton.adjacent(a, b)) {
        pag.add_edge(a, b, Mark::Circle, Mark::Circle);
      }
    }
  }

  for (;;) {
    const auto reach = directed_reachability(pag);
    auto r = [&](int u, int v) { return u == v || reach[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]; };
    std::vector<std::pair<int, int>> bidirected;
    for (const auto& e : pag.edges()) {
      if (e.at_a == Mark::Arrow && e.at_b == Mark::Arrow) bidirected.emplace_back(e.a, e.b);
    }
    struct Candidate {
      double weight;
      int first, second;
    };
    std::optional<Candidate> worst;
    auto offer = [&](double w, int x, int y) {
      Candidate c{w, x, y};
      if (!worst || std::tie(c.weight, c.first, c.second) < std::tie(worst->weight, worst->first, worst->second)) {
        worst = c;
      }
    };
    for (const auto& e : pag.edges()) {
      int u = -1, v = -1;
      if (e.at_a == Mark::Tail && e.at_b == Mark::Arrow) {
        u = e.a;
        v = e.b;
      } else if (e.at_a == Mark::Arrow && e.at_b == Mark::Tail) {
        u = e.b;
        v = e.a;
      } else if (e.at_a == Mark::Arrow && e.at_b == Mark::Arrow) {
        if (reach[static_cast<std::size_t>(e.a)][static_cast<std::size_t>(e.b)] ||
            reach[static_cast<std::size_t>(e.b)][static_cast<std::size_t>(e.a)]) {
          offer(std::min(probs.posterior(e.a, e.b), probs.posterior(e.b, e.a)), e.a, e.b);
        }
        continue;
      } else {
        continue;
      }
      // u -> v lies on a directed cycle, or on a directed path between the
      // endpoints of a bidirected edge.
      bool involved = reach[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)];
      for (auto [x, y] : bidirected) {
        if (involved) break;
        involved = (r(x, u) && r(v, y)) || (r(y, u) && r(v, x));
      }
      if (involved) offer(probs.posterior(u, v), u, v);
    }
    if (!worst) break;
    pag.remove_edge(worst->first, worst->second);
  }
  return pag;
}

struct StageSnapshot {
  std::size_t scored_dataset = 0;  // data set whose likelihood produced the posterior
  PairMatrix prior;
  PairMatrix posterior;
};

struct Diagnostics {
  Skeleton skeleton;
  std::vector<TripleRatio> triples;
  FactorLedger ledger;
  std::vector<StageSnapshot> stages;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::vector<std::string> warnings;
};

struct MfgsResult {
  MixedGraph pag;
  EdgeProbTable probs;
  Diagnostics diagnostics;
};

/// Learns a PAG from an observational data set and an ordered list of
/// interventional data sets.
///
/// Skeleton and Sepsets come from the observational data; each unshielded
/// triple's Sepset ratio seeds collider evidence. The observational CPDAG
/// seeds the occurrence rates and the first priors, which are scored against
/// the first interventional data set (or the observational data when there is
/// none). Each further step learns the CPDAG of interventional set i, records
/// relative score changes for its targets, rebuilds the priors from every
/// data set before i + 1 (never lower than the last posterior) and scores
/// them against set i + 1. The last posteriors are thresholded into the PAG.
inline MfgsResult run_mfgs_bs(const DatasetBundle& bundle, const HyperParams& hyper, const SearchConfig& search = {},
                              const RunControl& control = {}) {
  validate(hyper);
  using Clock = std::chrono::steady_clock;
  const auto& obs = bundle.observational;
  const int n = static_cast<int>(bundle.num_variables());
  const auto& ints = bundle.interventional;
  SearchConfig search_cfg = search;
  search_cfg.bdeu = hyper.bdeu;

  MfgsResult result{MixedGraph(obs.names()), EdgeProbTable(obs.names()), {}};
  auto& diag = result.diagnostics;
  diag.warnings = bundle.warnings;
  ScoreCache cache;
  auto stage_start = Clock::now();
  auto lap = [&](std::string name) {
    const auto now = Clock::now();
    diag.timings.emplace_back(std::move(name), std::chrono::duration<double>(now - stage_start).count());
    stage_start = now;
  };

  // Skeleton and Sepsets.
  const SkeletonOptions skel_opts{hyper.significance, hyper.max_sepset, hyper.ci};
  diag.skeleton = learn_skeleton(obs, skel_opts, control);
  const auto& skeleton = diag.skeleton.graph;
  lap("skeleton");

  // Collider evidence.
  PairMatrix f2(static_cast<std::size_t>(n), 0.0);
  if (hyper.factors.collider) {
    const auto triples = unshielded_triples(skeleton);
    std::vector<std::pair<int, int>> pairs;
    for (const auto& t : triples) pairs.emplace_back(t.a, t.c);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    std::vector<std::vector<std::vector<int>>> found(pairs.size());
    parallel_for(pairs.size(), control.threads, [&](std::size_t i) {
      control.check();
      found[i] = pair_sepsets(obs, skeleton, pairs[i].first, pairs[i].second, skel_opts);
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (auto& z : found[i]) diag.skeleton.catalog.add(pairs[i].first, pairs[i].second, std::move(z));
    }
    for (const auto& t : triples) diag.triples.push_back(sepset_ratio(diag.skeleton.catalog, t));
    f2 = factor2(diag.triples, static_cast<std::size_t>(n));
  }
  lap("triples");

  const bool need_cpdags = hyper.factors.occurrence ||
                           (hyper.factors.score_shift && (hyper.factor3_scope == Factor3Scope::UndirectedInCpdag ||
                                                          hyper.factor3_parents == Factor3Parents::InterventionCpdag));
  auto& ledger = diag.ledger;
  if (need_cpdags) ledger.cpdags.push_back({learn_cpdag(obs, search_cfg, &cache, control), {}, 0});
  lap("cpdag obs");

  PairMatrix posterior(static_cast<std::size_t>(n), 0.0);
  auto score_against = [&](const DiscreteTable& table, const std::vector<int>& targets, std::size_t dataset_index) {
    StageSnapshot snap{dataset_index, PairMatrix(static_cast<std::size_t>(n)), PairMatrix(static_cast<std::size_t>(n))};
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
    }
    parallel_for(pairs.size(), control.threads, [&](std::size_t i) {
      control.check();
      const auto [a, b] = pairs[i];
      const std::span<const int> forced =
          hyper.drop_target_terms ? std::span<const int>(targets) : std::span<const int>();
      const auto marg = pair_marginals(table, a, b, forced, hyper.bdeu, &cache);
      for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        auto& cell = result.probs.at(x, y);
        cell.factor1 = hyper.factors.occurrence ? factor1(ledger, x, y) : 0.0;
        cell.factor2 = hyper.factors.collider ? f2(x, y) : 0.0;
        cell.factor3_sum = hyper.factors.score_shift ? factor3(ledger, x, y) : 0.0;
        cell.prior = combine_prior(cell.factor1, cell.factor2, cell.factor3_sum, posterior(x, y), hyper.factors);
        cell.posterior = posterior_update(cell.prior, marg, x == a ? Direction::Forward : Direction::Backward,
                                          hyper.likelihood);
        snap.prior(x, y) = cell.prior;
        snap.posterior(x, y) = cell.posterior;
      }
    });
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a != b) posterior(a, b) = result.probs.at(a, b).posterior;
      }
    }
    diag.stages.push_back(std::move(snap));
  };

  // Initial priors, scored against the first interventional data set.
  if (ints.empty()) {
    score_against(obs, {}, 0);
  } else {
    score_against(ints.front().table, ints.front().targets, 1);
  }
  lap("posterior 1");

  for (std::size_t i = 1; i < ints.size(); ++i) {
    control.check();
    const auto& current = ints[i - 1];
    if (need_cpdags) ledger.cpdags.push_back({learn_cpdag(current.table, search_cfg, &cache, control), current.targets, i});
    if (hyper.factors.score_shift) {
      const auto& cpdag = need_cpdags ? ledger.cpdags.back().cpdag : skeleton;
      for (int a : current.targets) {
        for (int b = 0; b < n; ++b) {
          if (b == a) continue;
          if (hyper.factor3_scope == Factor3Scope::UndirectedInCpdag && !cpdag.has_undirected(a, b)) continue;
          std::vector<int> parents;
          if (hyper.factor3_parents == Factor3Parents::InterventionCpdag) parents = cpdag.parents(b);
          const double z_obs = cache.local(obs, b, parents, hyper.bdeu);
          const double z_int = cache.local(current.table, b, parents, hyper.bdeu);
          ledger.changes.push_back({a, b, i, relative_change(z_obs, z_int)});
        }
      }
    }
    score_against(ints[i].table, ints[i].targets, i + 1);
    lap("posterior " + std::to_string(i + 1));
  }

  result.pag = build_pag(result.probs, skeleton, hyper.cutoff);
  lap("pag");
  return result;
}

// ---------------------------------------------------------------------------
// JSON views

inline nlohmann::json edge_probs_to_json(const EdgeProbTable& probs) {
  auto arr = nlohmann::json::array();
  const int n = static_cast<int>(probs.size());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const auto& c = probs.at(a, b);
      arr.push_back({{"source", probs.names()[static_cast<std::size_t>(a)]},
                     {"target", probs.names()[static_cast<std::size_t>(b)]},
                     {"factor1", c.factor1},
                     {"factor2", c.factor2},
                     {"factor3_sum", c.factor3_sum},
                     {"prior", c.prior},
                     {"posterior", c.posterior}});
    }
  }
  return arr;
}

inline nlohmann::json diagnostics_to_json(const Diagnostics& d, const std::vector<std::string>& names, bool timings = true) {
  auto name = [&](int v) { return names[static_cast<std::size_t>(v)]; };
  auto name_set = [&](const std::vector<int>& s) {
    auto out = nlohmann::json::array();
    for (int v : s) out.push_back(name(v));
    return out;
  };
  nlohmann::json j;
  j["skeleton"] = to_text(d.skeleton.graph);
  j["ci_tests"] = d.skeleton.tests;
  auto sepsets = nlohmann::json::array();
  for (const auto& [pair, sets] : d.skeleton.catalog.entries()) {
    auto list = nlohmann::json::array();
    for (const auto& z : sets) list.push_back(name_set(z));
    sepsets.push_back({{"a", name(pair.first)}, {"b", name(pair.second)}, {"sepsets", list}});
  }
  j["sepset_catalog"] = {{"pairs", d.skeleton.catalog.entries().size()},
                         {"total", d.skeleton.catalog.total()},
                         {"entries", sepsets}};
  auto triples = nlohmann::json::array();
  for (const auto& t : d.triples) {
    triples.push_back({{"a", name(t.triple.a)},
                       {"b", name(t.triple.b)},
                       {"c", name(t.triple.c)},
                       {"containing", t.containing},
                       {"total", t.total},
                       {"ratio", t.ratio ? nlohmann::json(*t.ratio) : nlohmann::json(nullptr)}});
  }
  j["triples"] = triples;
  auto cpdags = nlohmann::json::array();
  for (const auto& c : d.ledger.cpdags) {
    cpdags.push_back({{"dataset", c.dataset}, {"targets", name_set(c.targets)}, {"cpdag", to_text(c.cpdag)}});
  }
  j["cpdags"] = cpdags;
  auto changes = nlohmann::json::array();
  for (const auto& c : d.ledger.changes) {
    changes.push_back({{"source", name(c.source)}, {"target", name(c.target)}, {"dataset", c.dataset}, {"value", c.value}});
  }
  j["score_changes"] = changes;
  auto stages = nlohmann::json::array();
  for (const auto& s : d.stages) {
    auto edges = nlohmann::json::array();
    const int n = static_cast<int>(s.prior.size());
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a != b && (s.prior(a, b) > 0.0 || s.posterior(a, b) > 0.0)) {
          edges.push_back({{"source", name(a)}, {"target", name(b)}, {"prior", s.prior(a, b)}, {"posterior", s.posterior(a, b)}});
        }
      }
    }
    stages.push_back({{"scored_dataset", s.scored_dataset}, {"edges", edges}});
  }
  j["stages"] = stages;
  if (timings) {
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [k, v] : d.timings) t[k] = v;
    j["timings_s"] = t;
  }
  j["warnings"] = d.warnings;
  return j;
}

}  // namespace mfgsbs

#endif  // MFGSBS_FUSION_HPP
