#include <gtest/gtest.h>

#include <random>

#include "mfgsbs/score.hpp"
#include "mfgsbs/synth.hpp"
#include "oracles.hpp"

using namespace mfgsbs;

namespace {

DiscreteTable random_binary(int vars, std::size_t n, std::uint64_t seed) {
  RandomNetworkOptions opt;
  opt.nodes = vars;
  opt.edges = vars;
  opt.max_states = 2;
  return forward_sample(random_network(opt, seed), n, seed + 1);
}

BayesNetSpec pair_spec(double agree) {
  BayesNetSpec s;
  s.variables = {{"A", {"0", "1"}}, {"B", {"0", "1"}}};
  s.parents = {{}, {0}};
  s.cpts = {{{0.5, 0.5}}, {{agree, 1 - agree}, {1 - agree, agree}}};
  return s;
}

}  // namespace

TEST(LocalBdeu, ParentlessBinaryFixture) {
  DiscreteTable t({{"A", {"0", "1"}}}, {{0, 0, 0, 1}});
  const double hand = std::lgamma(1.0) - std::lgamma(5.0) + std::lgamma(3.5) - std::lgamma(0.5) + std::lgamma(1.5) -
                      std::lgamma(0.5);
  const double z = local_bdeu(t, 0, std::vector<int>{});
  EXPECT_NEAR(z, hand, 1e-12);
  EXPECT_NEAR(z, -3.2427, 2e-4);  // quoted figure is rounded; exact value is -3.242592
}

TEST(LocalBdeu, MatchesDirectFormulaWithUnobservedConfigurations) {
  auto t = random_binary(4, 40, 3);  // small n leaves parent configurations empty
  for (double ess : {0.5, 1.0, 10.0}) {
    BdeuParams p{ess};
    for (int child = 0; child < 4; ++child) {
      for (const auto& ps : oracle::subsets({0, 1, 2, 3})) {
        if (std::find(ps.begin(), ps.end(), child) != ps.end()) continue;
        EXPECT_NEAR(local_bdeu(t, child, ps, p), oracle::bdeu_direct(t, child, ps, ess), 1e-9);
      }
    }
  }
}

TEST(LocalBdeu, RejectsBadInputs) {
  DiscreteTable t({{"A", {"0", "1"}}}, {{0, 1}});
  EXPECT_THROW(local_bdeu(t, 0, std::vector<int>{}, BdeuParams{0.0}), DomainError);
  DiscreteTable empty({{"A", {"0", "1"}}}, {{}});
  EXPECT_THROW(local_bdeu(empty, 0, std::vector<int>{}), DomainError);
}

TEST(GraphBdeu, DecomposesIntoLocalTerms) {
  auto t = random_binary(4, 500, 9);
  MixedGraph g(t.names());
  g.add_directed(0, 1);
  g.add_directed(2, 1);
  g.add_directed(1, 3);
  double sum = 0.0;
  for (int v = 0; v < 4; ++v) sum += local_bdeu(t, v, g.parents(v));
  EXPECT_EQ(graph_bdeu(t, g), sum);
  EXPECT_NEAR(graph_bdeu(t, g), oracle::dag_bdeu_direct(t, g, 1.0), 1e-9);
}

TEST(GraphBdeu, RejectsCyclesAndMismatchedGraphs) {
  auto t = random_binary(3, 50, 1);
  MixedGraph g(t.names());
  g.add_directed(0, 1);
  g.add_directed(1, 2);
  g.add_directed(2, 0);
  EXPECT_THROW(graph_bdeu(t, g), InvalidGraph);
  EXPECT_THROW(graph_bdeu(t, MixedGraph({"A", "B"})), DomainError);
}

TEST(GraphBdeu, EquivalentDagsScoreEqually) {
  const auto classes = oracle::equivalence_classes(4);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto t = random_binary(4, 500, 100 + seed);
    for (const auto& cls : classes) {
      const double first = graph_bdeu(t, cls.front());
      for (const auto& g : cls) EXPECT_NEAR(graph_bdeu(t, g), first, 1e-9);
    }
  }
}

TEST(ScoreCache, SameValueForPermutedParents) {
  auto t = random_binary(4, 300, 2);
  ScoreCache cache;
  const double x = cache.local(t, 0, {1, 2});
  const double y = cache.local(t, 0, {2, 1});
  EXPECT_EQ(x, y);
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(x, local_bdeu(t, 0, std::vector<int>{1, 2}));
}

TEST(PairMarginals, ReversedArrowsScoreEqually) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto t = random_binary(3, 400, seed);
    auto m = pair_marginals(t, 0, 2);
    EXPECT_NEAR(m.log_ab, m.log_ba, 1e-9);
  }
}

TEST(PairMarginals, DependenceFavoursAnEdge) {
  auto dep = forward_sample(pair_spec(0.9), 10000, 7);
  auto m = pair_marginals(dep, 0, 1);
  EXPECT_GT(m.log_ab - m.log_empty, 0.0);
  auto ind = forward_sample(pair_spec(0.5), 10000, 7);
  auto mi = pair_marginals(ind, 0, 1);
  EXPECT_LT(mi.log_ab - mi.log_empty, 0.0);
}

TEST(PairMarginals, ForcedNodeDropsOwnTerm) {
  auto t = forward_sample(pair_spec(0.8), 2000, 3);
  const std::vector<int> targets{0};
  auto m = pair_marginals(t, 0, 1, targets);
  const double zb = local_bdeu(t, 1, std::vector<int>{});
  EXPECT_NEAR(m.log_empty, zb, 1e-12);
  EXPECT_NEAR(m.log_ab, local_bdeu(t, 1, std::vector<int>{0}), 1e-12);
  EXPECT_NEAR(m.log_ba, zb, 1e-12);
  const std::vector<int> none;
  auto plain = pair_marginals(t, 0, 1, none);
  auto base = pair_marginals(t, 0, 1);
  EXPECT_EQ(plain.log_ab, base.log_ab);
  EXPECT_THROW(pair_marginals(t, 1, 1), DomainError);
}

TEST(RelativeChange, WorkedExample) {
  EXPECT_NEAR(relative_change(-11507, -11370), 0.0119, 5e-4);
  EXPECT_NEAR(relative_change(-14274, -14026), 0.0174, 5e-4);
  EXPECT_NEAR(relative_change(-6936, -6935), 0.0001, 5e-4);
}

TEST(RelativeChange, ScaleFreeAndZeroGuard) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e5, -1.0);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = 0.01 + std::fabs(u(rng)) / 1000.0;
    EXPECT_NEAR(relative_change(a, b), relative_change(c * a, c * b), 1e-12);
  }
  EXPECT_EQ(relative_change(0.0, -3.0), 0.0);
}

TEST(LocalBdeu, TrueParentStillPreferredAfterDuplication) {
  auto t = forward_sample(pair_spec(0.75), 1000, 12);
  std::vector<std::vector<int>> cols(2);
  for (int v = 0; v < 2; ++v) {
    cols[static_cast<std::size_t>(v)] = t.column(v);
    cols[static_cast<std::size_t>(v)].insert(cols[static_cast<std::size_t>(v)].end(), t.column(v).begin(), t.column(v).end());
  }
  DiscreteTable twice(t.variables(), cols);
  const double z1 = local_bdeu(t, 1, std::vector<int>{});
  const double z2 = local_bdeu(twice, 1, std::vector<int>{});
  EXPECT_GT(std::fabs(z2), 1.9 * std::fabs(z1));
  EXPECT_GT(local_bdeu(t, 1, std::vector<int>{0}), z1);
  EXPECT_GT(local_bdeu(twice, 1, std::vector<int>{0}), z2);
}
