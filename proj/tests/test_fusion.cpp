#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <thread>

#include "mfgsbs/fusion.hpp"
#include "mfgsbs/synth.hpp"

using namespace mfgsbs;

namespace {

// Node order of the worked example.
enum { V, W, X, Y, Z };
const std::vector<std::string> kVwxyz{"V", "W", "X", "Y", "Z"};

LedgerCpdag cpdag_with(std::vector<int> targets, std::size_t dataset,
                       const std::function<void(MixedGraph&)>& edges) {
  MixedGraph g(kVwxyz);
  edges(g);
  return {g, std::move(targets), dataset};
}

PairMarginals marg(double empty, double ab, double ba) { return {empty, ab, ba}; }

Simulation asia(int sets, std::uint64_t seed, std::size_t n = 3000) {
  auto spec = load_spec(std::string(MFGSBS_TEST_DATA) + "/networks/asia8.json");
  return simulate(spec, random_plan(spec, {"smoke"}, sets, 1, n, seed));
}

}  // namespace

TEST(Factor1, DirectedOccurrenceRate) {
  FactorLedger l;
  l.cpdags.push_back(cpdag_with({}, 0, [](MixedGraph& g) { g.add_directed(X, Y); }));
  l.cpdags.push_back(cpdag_with({V}, 1, [](MixedGraph& g) { g.add_directed(X, Y); }));
  l.cpdags.push_back(cpdag_with({W}, 2, [](MixedGraph& g) { g.add_directed(Y, X); }));
  EXPECT_NEAR(factor1(l, X, Y), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(factor1(l, Y, X), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(factor1(l, Y, X), 0.34, 0.01);
}

TEST(Factor1, UndirectedEdgeFromATarget) {
  FactorLedger l;
  l.cpdags.push_back(cpdag_with({}, 0, [](MixedGraph& g) { g.add_undirected(W, V); }));
  l.cpdags.push_back(cpdag_with({V}, 1, [](MixedGraph&) {}));
  l.cpdags.push_back(cpdag_with({W}, 2, [](MixedGraph& g) { g.add_undirected(W, V); }));
  EXPECT_DOUBLE_EQ(factor1(l, W, V), 0.5);
  EXPECT_DOUBLE_EQ(factor1(l, V, W), 0.0);
  EXPECT_DOUBLE_EQ(factor1(l, X, Z), 0.0);
}

TEST(Factor1, BothDirectionsNeverExceedOne) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> kind(0, 3), node(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    FactorLedger l;
    for (int k = 0; k < 4; ++k) {
      std::vector<int> targets;
      if (k > 0) targets = {node(rng)};
      if (k > 1 && kind(rng) == 0) targets.push_back((targets[0] + 1) % 5);
      MixedGraph g(kVwxyz);
      for (int a = 0; a < 5; ++a) {
        for (int b = a + 1; b < 5; ++b) {
          switch (kind(rng)) {
            case 1: g.add_directed(a, b); break;
            case 2: g.add_directed(b, a); break;
            case 3: g.add_undirected(a, b); break;
            default: break;
          }
        }
      }
      l.cpdags.push_back({g, targets, static_cast<std::size_t>(k)});
    }
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        if (a == b) continue;
        const double f = factor1(l, a, b);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f + factor1(l, b, a), 1.0 + 1e-12);
      }
    }
  }
}

TEST(Factor2, ColliderWorkedExample) {
  SepsetCatalog cat;
  cat.add(V, Y, {W});
  cat.add(V, Y, {W, X, Z});
  cat.add(V, Y, {Z});
  const std::vector<TripleRatio> ratios{sepset_ratio(cat, {V, X, Y})};
  auto f2 = factor2(ratios, 5);
  EXPECT_NEAR(f2(V, X), 0.667, 1e-3);
  EXPECT_NEAR(f2(Y, X), 0.667, 1e-3);
  EXPECT_DOUBLE_EQ(f2(X, V), 0.5);
  EXPECT_DOUBLE_EQ(f2(X, Y), 0.5);
  EXPECT_DOUBLE_EQ(f2(W, V), 0.0);
  EXPECT_DOUBLE_EQ(f2(W, Z), 0.0);
}

TEST(Factor2, MajorityContainingGivesHalfAndEmptyIsNeutral) {
  const std::vector<TripleRatio> ratios{{{V, X, Y}, 3, 5, 0.6}, {{W, Z, Y}, 0, 0, std::nullopt}};
  auto f2 = factor2(ratios, 5);
  for (auto [a, b] : {std::pair{V, X}, std::pair{Y, X}, std::pair{X, V}, std::pair{X, Y}, std::pair{W, Z},
                      std::pair{Z, W}, std::pair{Y, Z}}) {
    EXPECT_DOUBLE_EQ(f2(a, b), 0.5);
  }
}

TEST(Factor2, OverlappingTriplesKeepTheMaximum) {
  const std::vector<TripleRatio> ratios{{{V, X, Y}, 1, 5, 0.2}, {{V, X, Z}, 2, 2, 1.0}};
  auto f2 = factor2(ratios, 5);
  EXPECT_DOUBLE_EQ(f2(V, X), 0.8);
  EXPECT_DOUBLE_EQ(f2(Z, X), 0.5);
}

TEST(Factor3, SumsPerTargetPair) {
  FactorLedger l;
  EXPECT_DOUBLE_EQ(factor3(l, V, X), 0.0);
  l.changes.push_back({V, X, 1, 0.0119});
  EXPECT_DOUBLE_EQ(factor3(l, V, X), 0.0119);
  l.changes.push_back({W, V, 1, 0.01});
  l.changes.push_back({W, V, 2, 0.02});
  EXPECT_NEAR(factor3(l, W, V), 0.03, 1e-15);
  EXPECT_DOUBLE_EQ(factor3(l, V, W), 0.0);
}

TEST(CombinePrior, WorkedExampleRows) {
  struct Row {
    double f1, f2, f3, want;
  };
  for (const auto& r : {Row{0.67, 0.5, 0, 0.67}, Row{0.34, 0.67, 0, 0.67}, Row{0.75, 0.67, 0.0119, 0.7619},
                        Row{0.5, 0, 0.0174, 0.5174}, Row{0, 0, 0, 0}, Row{1, 0, 0, 1}, Row{0.75, 0, 0.0001, 0.7501}}) {
    EXPECT_NEAR(combine_prior(r.f1, r.f2, r.f3, 0.0), r.want, 1e-3);
  }
}

TEST(CombinePrior, ClampsMasksAndKeepsPreviousPosterior) {
  EXPECT_DOUBLE_EQ(combine_prior(0.9, 0.2, 0.5, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(combine_prior(0.2, 0.1, 0.0, 0.6), 0.6);
  EXPECT_DOUBLE_EQ(combine_prior(0.2, 0.8, 0.1, 0.0, FactorMask::parse("1")), 0.2);
  EXPECT_DOUBLE_EQ(combine_prior(0.2, 0.8, 0.1, 0.0, FactorMask::parse("2,3")), 0.9);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0), big(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = combine_prior(u(rng), u(rng), big(rng), u(rng));
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(FactorMask, ParseAndPrint) {
  EXPECT_EQ(FactorMask::parse("1,3").to_string(), "13");
  EXPECT_EQ(FactorMask::parse("2").to_string(), "2");
  EXPECT_THROW(FactorMask::parse("4"), ValidationError);
  EXPECT_THROW(FactorMask::parse(""), ValidationError);
}

TEST(Posterior, AbsorbingAndUninformative) {
  const auto m = marg(-100.0, -90.0, -95.0);
  for (auto ref : {LikelihoodReference::Disconnected, LikelihoodReference::Reverse}) {
    EXPECT_EQ(posterior_update(0.0, m, Direction::Forward, ref), 0.0);
    EXPECT_EQ(posterior_update(1.0, m, Direction::Backward, ref), 1.0);
    for (double p : {0.01, 0.3, 0.5, 0.97}) {
      EXPECT_EQ(posterior_update(p, marg(-50.0, -50.0, -50.0), Direction::Forward, ref), p);
    }
  }
}

TEST(Posterior, DisconnectedReferenceArithmetic) {
  const double got = posterior_update(0.5, marg(-10.0, -8.0, -12.0), Direction::Forward, LikelihoodReference::Disconnected);
  EXPECT_NEAR(got, std::exp(2.0) / (1.0 + std::exp(2.0)), 1e-12);
  EXPECT_NEAR(got, 0.8808, 1e-4);
  // Direct evaluation of 1 - (1-p) m0 / ((1-p) m0 + p m1) with p = 0.3.
  const double p = 0.3, m0 = std::exp(-10.0), m1 = std::exp(-11.0);
  const double direct = 1.0 - (1 - p) * m0 / ((1 - p) * m0 + p * m1);
  EXPECT_NEAR(posterior_update(p, marg(-10.0, -11.0, 0.0), Direction::Forward, LikelihoodReference::Disconnected),
              direct, 1e-12);
}

TEST(Posterior, ReverseReferenceUsesOppositeArrow) {
  const auto m = marg(-500.0, -100.0, -101.0);
  const double fwd = posterior_update(0.5, m, Direction::Forward, LikelihoodReference::Reverse);
  const double bwd = posterior_update(0.5, m, Direction::Backward, LikelihoodReference::Reverse);
  EXPECT_NEAR(fwd, 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(fwd + bwd, 1.0, 1e-12);
}

TEST(Posterior, MonotoneInPriorAndBounded) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> up(1e-3, 1.0 - 1e-3), ur(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = up(rng), q = up(rng), r = ur(rng);
    const auto m = marg(-1000.0, -1000.0 + r, -1000.0);
    const double a = posterior_update(std::min(p, q), m, Direction::Forward, LikelihoodReference::Disconnected);
    const double b = posterior_update(std::max(p, q), m, Direction::Forward, LikelihoodReference::Disconnected);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(b, 1.0);
    if (p != q) EXPECT_LT(a, b) << p << " " << q << " " << r;
  }
}

TEST(Posterior, ExtremeRatiosStayFinite) {
  const double hi = posterior_update(0.5, marg(-1e6, 0.0, -1e6), Direction::Forward, LikelihoodReference::Disconnected);
  const double lo = posterior_update(0.5, marg(0.0, -1e6, 0.0), Direction::Forward, LikelihoodReference::Disconnected);
  EXPECT_EQ(hi, 1.0);
  EXPECT_EQ(lo, 0.0);
}

TEST(BuildPag, SelectionRules) {
  EdgeProbTable p({"A", "B", "C", "D"});
  MixedGraph u(p.names());
  u.add_undirected(2, 3);
  p.at(0, 1).posterior = 0.9;
  p.at(1, 0).posterior = 0.8;
  p.at(0, 2).posterior = 0.8;
  p.at(2, 0).posterior = 0.2;
  p.at(2, 3).posterior = 0.3;
  p.at(3, 2).posterior = 0.3;
  p.at(1, 3).posterior = 0.3;  // not in the skeleton, below the cut-off: absent
  auto g = build_pag(p, u, 0.5);
  EXPECT_TRUE(g.has_bidirected(0, 1));
  EXPECT_TRUE(g.has_directed(0, 2));
  EXPECT_EQ(*g.marks(2, 3), std::pair(Mark::Circle, Mark::Circle));
  EXPECT_FALSE(g.adjacent(1, 3));
  EXPECT_THROW(build_pag(p, MixedGraph({"A"}), 0.5), DomainError);
}

TEST(BuildPag, BreaksCycleAtWeakestEdge) {
  EdgeProbTable p({"A", "B", "C"});
  p.at(0, 1).posterior = 0.9;
  p.at(1, 2).posterior = 0.8;
  p.at(2, 0).posterior = 0.6;
  auto g = build_pag(p, MixedGraph(p.names()), 0.5);
  EXPECT_TRUE(g.has_directed(0, 1));
  EXPECT_TRUE(g.has_directed(1, 2));
  EXPECT_FALSE(g.adjacent(0, 2));
}

TEST(BuildPag, BreaksAlmostDirectedCycle) {
  EdgeProbTable p({"A", "B", "C"});
  p.at(0, 1).posterior = 0.9;
  p.at(1, 2).posterior = 0.95;
  p.at(0, 2).posterior = 0.7;
  p.at(2, 0).posterior = 0.6;
  auto g = build_pag(p, MixedGraph(p.names()), 0.5);
  EXPECT_FALSE(has_almost_directed_cycle(g));
  EXPECT_FALSE(g.adjacent(0, 2));
}

TEST(BuildPag, RandomTablesNeverKeepCycles) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + trial % 5;
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("N" + std::to_string(i));
    EdgeProbTable p(names);
    MixedGraph sk(names);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a != b) p.at(a, b).posterior = u(rng);
        if (a < b && u(rng) < 0.5) sk.add_undirected(a, b);
      }
    }
    auto g = build_pag(p, sk, 0.5);
    EXPECT_FALSE(has_directed_cycle(g));
    EXPECT_FALSE(has_almost_directed_cycle(g));
  }
}

TEST(BuildPag, UninformativeLikelihoodKeepsPriorSelection) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EdgeProbTable p({"A", "B", "C", "D"});
  const auto flat = marg(-7.0, -7.0, -7.0);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      p.at(a, b).prior = a < b ? u(rng) : 0.1;  // forward-only arrows: no cycles
      p.at(a, b).posterior = posterior_update(p.at(a, b).prior, flat, Direction::Forward);
    }
  }
  auto g = build_pag(p, MixedGraph(p.names()), 0.5);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      if (a != b) EXPECT_EQ(g.has_directed(a, b), p.at(a, b).prior > 0.5);
    }
  }
}

TEST(Validate, RejectsOutOfRangeHyperparameters) {
  HyperParams h;
  h.cutoff = 1.0;
  EXPECT_THROW(validate(h), DomainError);
  h = {};
  h.significance = 0.0;
  EXPECT_THROW(validate(h), DomainError);
  h = {};
  h.max_sepset = -2;
  EXPECT_THROW(validate(h), DomainError);
  h = {};
  h.bdeu.ess = -1;
  EXPECT_THROW(validate(h), DomainError);
}

TEST(RunMfgsBs, ObservationalOnly) {
  auto sim = asia(0, 3);
  auto r = run_mfgs_bs(sim.bundle, {});
  ASSERT_EQ(r.diagnostics.stages.size(), 1u);
  EXPECT_EQ(r.diagnostics.stages[0].scored_dataset, 0u);
  EXPECT_EQ(r.pag.size(), 7u);
  EXPECT_FALSE(has_directed_cycle(r.pag));
}

TEST(RunMfgsBs, DeterministicAcrossThreadCounts) {
  auto sim = asia(4, 8);
  auto one = run_mfgs_bs(sim.bundle, {});
  RunControl rc;
  rc.threads = 4;
  auto four = run_mfgs_bs(sim.bundle, {}, {}, rc);
  EXPECT_EQ(to_text(one.pag), to_text(four.pag));
  EXPECT_EQ(edge_probs_to_json(one.probs), edge_probs_to_json(four.probs));
  EXPECT_EQ(diagnostics_to_json(one.diagnostics, sim.bundle.observational.names(), false),
            diagnostics_to_json(four.diagnostics, sim.bundle.observational.names(), false));
}

TEST(RunMfgsBs, ProbabilitiesStayInRangeAndPriorsCarryPosteriors) {
  auto sim = asia(5, 12);
  for (auto ref : {LikelihoodReference::Reverse, LikelihoodReference::Disconnected}) {
    HyperParams h;
    h.likelihood = ref;
    auto r = run_mfgs_bs(sim.bundle, h);
    const auto& st = r.diagnostics.stages;
    ASSERT_EQ(st.size(), 5u);
    for (std::size_t s = 0; s < st.size(); ++s) {
      for (int a = 0; a < 7; ++a) {
        for (int b = 0; b < 7; ++b) {
          if (a == b) continue;
          EXPECT_GE(st[s].prior(a, b), 0.0);
          EXPECT_LE(st[s].prior(a, b), 1.0);
          EXPECT_GE(st[s].posterior(a, b), 0.0);
          EXPECT_LE(st[s].posterior(a, b), 1.0);
          if (s > 0) EXPECT_GE(st[s].prior(a, b), st[s - 1].posterior(a, b));
        }
      }
    }
    EXPECT_FALSE(has_directed_cycle(r.pag));
    EXPECT_FALSE(has_almost_directed_cycle(r.pag));
  }
}

TEST(RunMfgsBs, OccurrenceOnlySkipsOtherEvidence) {
  auto sim = asia(4, 21);
  HyperParams h;
  h.factors = FactorMask::parse("1");
  auto r = run_mfgs_bs(sim.bundle, h);
  EXPECT_TRUE(r.diagnostics.triples.empty());
  EXPECT_TRUE(r.diagnostics.ledger.changes.empty());
  EXPECT_EQ(r.diagnostics.ledger.cpdags.size(), 4u);
  for (int a = 0; a < 7; ++a) {
    for (int b = 0; b < 7; ++b) {
      if (a == b) continue;
      EXPECT_EQ(r.probs.at(a, b).factor2, 0.0);
      EXPECT_EQ(r.probs.at(a, b).factor3_sum, 0.0);
    }
  }
  // Same CPDAGs as the full run: only the fusion differs.
  auto full = run_mfgs_bs(sim.bundle, {});
  for (std::size_t i = 0; i < full.diagnostics.ledger.cpdags.size(); ++i) {
    EXPECT_EQ(to_text(full.diagnostics.ledger.cpdags[i].cpdag), to_text(r.diagnostics.ledger.cpdags[i].cpdag));
  }
}

TEST(RunMfgsBs, ColliderOnlyNeedsNoSearch) {
  auto sim = asia(3, 22);
  HyperParams h;
  h.factors = FactorMask::parse("2");
  auto r = run_mfgs_bs(sim.bundle, h);
  EXPECT_TRUE(r.diagnostics.ledger.cpdags.empty());
  EXPECT_FALSE(r.diagnostics.triples.empty());
}

TEST(RunMfgsBs, ScoreChangesOnlyForTargets) {
  auto sim = asia(6, 4);
  HyperParams h;
  h.factor3_scope = Factor3Scope::AllTargetPairs;
  auto r = run_mfgs_bs(sim.bundle, h);
  const auto& ints = sim.bundle.interventional;
  for (const auto& c : r.diagnostics.ledger.changes) {
    ASSERT_GE(c.dataset, 1u);
    ASSERT_LT(c.dataset, ints.size());  // the last set is only scored
    const auto& t = ints[c.dataset - 1].targets;
    EXPECT_NE(std::find(t.begin(), t.end(), c.source), t.end());
    EXPECT_GE(c.value, 0.0);
  }
  EXPECT_EQ(r.diagnostics.ledger.changes.size(), 5u * 6u);
}

TEST(RunMfgsBs, TimeoutIsReported) {
  auto sim = asia(3, 2);
  auto rc = RunControl::with_timeout(1, std::chrono::duration<double>(0.0));
  std::this_thread::sleep_for(std::chrono::milliseconds(2));
  EXPECT_THROW(run_mfgs_bs(sim.bundle, {}, {}, rc), TimeoutError);
}
