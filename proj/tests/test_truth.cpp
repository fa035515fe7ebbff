#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "agct/truth.hpp"

using namespace agct;

namespace {

Context ctx(const char* s) { return Context::parse(s, Alphabet::of_size(2)); }

std::map<Context, std::vector<Distribution>, TreeOrder> random_laws(Rng& rng, const TreeShape& shape, std::size_t groups,
                                                                    std::size_t k) {
  std::map<Context, std::vector<Distribution>, TreeOrder> laws;
  for (const auto& leaf : shape.leaves(k)) {
    for (std::size_t l = 0; l < groups; ++l) {
      std::vector<double> p(k);
      double s = 0;
      for (auto& x : p) s += (x = 0.05 + rng.uniform());
      for (auto& x : p) x /= s;
      laws[leaf].push_back(Distribution(p));
    }
  }
  return laws;
}

TreeShape random_complete_tree(Rng& rng, std::size_t k, std::size_t depth) {
  std::set<Context, TreeOrder> nodes{Context{}};
  std::vector<Context> frontier{Context{}};
  while (!frontier.empty()) {
    auto w = frontier.back();
    frontier.pop_back();
    if (w.size() >= depth || (w.size() > 0 && rng.uniform() < 0.4)) continue;
    for (std::size_t a = 0; a < k; ++a) {
      auto c = w.extend_older(static_cast<symbol>(a));
      nodes.insert(c);
      frontier.push_back(c);
    }
  }
  return TreeShape(nodes);
}

}  // namespace

TEST(RenewalLaw, PinnedValues) {
  auto m = make_renewal();
  const auto& law = *m.renewal;
  // 1/(3(2 ln 2 - 1)) and 1/(30(2 ln 2 - 1))
  EXPECT_NEAR(law.pmf(1), 0.86289981652069661, 1e-15);
  EXPECT_NEAR(law.pmf(2), 0.086289981652069661, 1e-16);
  EXPECT_NEAR(law.hazard(0), law.pmf(1), 1e-15);
  EXPECT_NEAR(law.mean(), 1.2943497247810449, 1e-15);
  EXPECT_DOUBLE_EQ(law.survival(0), 1.0);
  double total = 0.0;
  for (std::uint64_t k = 1000000; k >= 1; --k) total += law.pmf(k);
  EXPECT_NEAR(total + law.survival(1000000), 1.0, 1e-12);
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(RenewalLaw, HazardIdentityAndTail) {
  auto m = make_renewal();
  const auto& law = *m.renewal;
  for (std::uint64_t j : {0, 1, 2, 5, 17, 100, 5000, 70000, 1000000}) {
    EXPECT_NEAR(law.hazard(j), law.pmf(j + 1) / law.survival(j), 1e-12 * law.hazard(j));
    EXPECT_NEAR(law.survival(j) - law.survival(j + 1), law.pmf(j + 1), 1e-13 * law.pmf(j + 1) + 1e-18);
  }
  for (std::uint64_t j = 0; j < 2000; ++j) EXPECT_LT(law.hazard(j + 1), law.hazard(j));
  double mass = 0.0;
  for (std::uint64_t j = 0; j < 200; ++j) mass += law.age_pmf(j);
  EXPECT_NEAR(mass, 1.0 - 1.0 / (4.0 * 200.5), 1e-5);
}

TEST(Simulate, SeedDeterminism) {
  auto m = make_order3_chain();
  auto a = simulate(m, 500, 3, 9);
  auto b = simulate(m, 500, 3, 9);
  auto c = simulate(m, 500, 3, 10);
  EXPECT_EQ(a.sample.sequences, b.sample.sequences);
  EXPECT_EQ(a.conditionals, b.conditionals);
  EXPECT_NE(a.sample.sequences, c.sample.sequences);
  auto r1 = simulate(make_renewal(), 500, 2, 4);
  auto r2 = simulate(make_renewal(), 500, 2, 4);
  EXPECT_EQ(r1.sample.sequences, r2.sample.sequences);
  EXPECT_EQ(r1.initial_age, r2.initial_age);
}

TEST(Order3Chain, LeafLawsAndTransitionRows) {
  auto m = make_order3_chain();
  EXPECT_EQ(m.shape.size(), 15u);
  EXPECT_DOUBLE_EQ(m.law(ctx("000"), 0)[0], 0.75);
  EXPECT_DOUBLE_EQ(m.law(ctx("001"), 0)[0], 0.75);
  EXPECT_DOUBLE_EQ(m.law(ctx("110"), 0)[0], 0.25);
  EXPECT_DOUBLE_EQ(m.law(ctx("010"), 0)[0], 0.5);
  std::vector<symbol> past{1, 0, 0, 0};
  EXPECT_DOUBLE_EQ(true_prob(m, past)[0], 0.75);
  std::vector<symbol> short_past{0, 0};
  EXPECT_THROW(true_prob(m, short_past), error);
}

TEST(Order3Chain, StationaryLawMatchesIndependentSolve) {
  // left eigenvector of the 8x8 window chain, solved separately; keys are oldest-first
  std::map<std::vector<symbol>, double> expect{{{0, 0, 0}, 2.0 / 11}, {{0, 0, 1}, 1.0 / 11}, {{0, 1, 0}, 3.0 / 22},
                                               {{0, 1, 1}, 1.0 / 11}, {{1, 0, 0}, 1.0 / 11}, {{1, 0, 1}, 3.0 / 22},
                                               {{1, 1, 0}, 1.0 / 11}, {{1, 1, 1}, 2.0 / 11}};
  auto m = make_order3_chain();
  WindowChain chain(m);
  auto pi = chain.stationary(0);
  std::vector<symbol> w;
  for (std::size_t s = 0; s < chain.states(); ++s) {
    chain.decode(s, w);
    EXPECT_NEAR(pi[s], expect.at(w), 1e-13);
    EXPECT_EQ(chain.encode(w), s);
  }
}

TEST(Simulate, WindowsAreStationary) {
  // the last window of many short independent runs is an exact stationary draw
  auto m = make_order3_chain();
  WindowChain chain(m);
  auto pi = chain.stationary(0);
  const std::size_t runs = 20000;
  auto sim = simulate(m, 40, runs, 77);
  std::vector<double> count(8, 0.0);
  for (const auto& x : sim.sample.sequences) count[chain.encode(x)] += 1;
  double chi2 = 0.0;
  for (std::size_t s = 0; s < 8; ++s) chi2 += std::pow(count[s] - runs * pi[s], 2) / (runs * pi[s]);
  EXPECT_LT(chi2, 7.0 + 4.0 * std::sqrt(14.0));
}

TEST(Simulate, LawOfLargeNumbersAfterLeaf) {
  auto m = make_order3_chain();
  auto sim = simulate(m, 1000000, 1, 5);
  const auto& x = sim.sample.sequences[0];
  double hits = 0, zeros = 0;
  for (std::size_t i = 3; i < x.size(); ++i)
    if (x[i - 3] == 0 && x[i - 2] == 0 && x[i - 1] == 0) {
      ++hits;
      zeros += x[i] == 0;
    }
  EXPECT_NEAR(zeros / hits, 0.75, 0.01);
}

TEST(Simulate, RenewalMeanGap) {
  auto m = make_renewal();
  auto sim = simulate(m, 2000000, 1, 3);
  const auto& x = sim.sample.sequences[0];
  std::size_t first = 0, last = 0, ones = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] == 1) {
      if (ones == 0) first = i;
      last = i;
      ++ones;
    }
  const double gap = static_cast<double>(last - first) / static_cast<double>(ones - 1);
  // infinite-variance gaps: the tolerance is loose on purpose
  EXPECT_NEAR(gap, m.renewal->mean(), 0.03);
}

TEST(TrueProb, RenewalUsesAgeSinceLastOne) {
  auto m = make_renewal();
  std::vector<symbol> one{0, 1};
  EXPECT_NEAR(true_prob(m, one)[1], m.renewal->hazard(0), 1e-15);
  std::vector<symbol> later{1, 0, 0, 0};
  EXPECT_NEAR(true_prob(m, later)[1], m.renewal->hazard(3), 1e-15);
  std::vector<symbol> none{0, 0};
  EXPECT_THROW(true_prob(m, none), error);
  EXPECT_TRUE(m.in_true_tree(ctx("1000")));
  EXPECT_TRUE(m.in_true_tree(ctx("0000")));
  EXPECT_FALSE(m.in_true_tree(ctx("0100")));
}

TEST(OracleProb, FullContextGivesLeafLaw) {
  auto m = make_order3_chain();
  auto sim = simulate(m, 3000, 2, 8);
  for (const char* w : {"000", "0110", "10101"}) {
    auto c = ctx(w);
    auto leaf = c.suffix(3);
    for (std::size_t l = 0; l < 2; ++l) {
      auto p = oracle_prob(sim, c, l);
      EXPECT_NEAR(p[0], m.law(leaf, l)[0], 1e-14);
    }
  }
  // unseen in one group -> uniform everywhere
  auto p = oracle_prob(sim, Context(std::vector<symbol>(40, 1)), 0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
}

TEST(OracleProb, RootIsLeafCountMixture) {
  auto m = make_order3_chain();
  auto sim = simulate(m, 2000, 1, 12);
  // glue the warm-up window in front and count the leaf reached at every ending position
  std::vector<symbol> full = sim.warmup[0];
  full.insert(full.end(), sim.sample.sequences[0].begin(), sim.sample.sequences[0].end());
  const std::size_t h = sim.warmup[0].size();
  std::map<Context, double, TreeOrder> weight;
  const std::size_t n = sim.sample.sequences[0].size();
  for (std::size_t i = 1; i + 1 <= n; ++i) {
    std::vector<symbol> past(full.begin() + static_cast<std::ptrdiff_t>(i), full.begin() + static_cast<std::ptrdiff_t>(i + h));
    weight[terminal_node(m.shape, past, 2)] += 1.0;
  }
  double p0 = 0.0;
  for (const auto& [leaf, w] : weight) p0 += w * m.law(leaf, 0)[0];
  p0 /= static_cast<double>(n - 1);
  EXPECT_NEAR(oracle_prob(sim, Context{}, 0)[0], p0, 1e-12);
}

TEST(OracleProb, TrieTableMatchesDirectScan) {
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    auto m = rep % 2 ? make_renewal() : make_order3_chain();
    auto sim = simulate(m, 300, 2, rng.next());
    auto trie = CountTrie::build(sim.sample);
    auto table = oracle_table(trie, sim);
    for (CountTrie::node_id v = 0; v < trie.size(); ++v) {
      auto rows = oracle_rows(sim, trie.context(v));
      for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t a = 0; a < 2; ++a) EXPECT_NEAR(table[(v * 2 + l) * 2 + a], rows[l][a], 1e-12);
    }
  }
}

TEST(ApproxError, ZeroBelowLeavesAndPinnedBarAtRoot) {
  auto m = make_order3_chain();
  auto sim = simulate(m, 2000, 1, 1);
  EXPECT_NEAR(approx_error(m, sim, ctx("010"), SetFamily::singletons, 1), 0.0, 1e-14);
  EXPECT_NEAR(approx_error(m, sim, ctx("1010"), SetFamily::singletons, 1), 0.0, 1e-14);
  EXPECT_GT(approx_error(m, sim, ctx("10"), SetFamily::singletons, 1), 0.1);
  EXPECT_DOUBLE_EQ(approx_error_bar(m, Context{}, 1, SetFamily::singletons, 1), 0.5);
  EXPECT_DOUBLE_EQ(approx_error_bar(m, ctx("00"), 1, SetFamily::singletons, 1), 0.25);
}

TEST(ApproxError, ChainBetweenBothErrors) {
  Rng rng(31);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t k = 2 + rng.below(2);
    const std::size_t L = 1 + rng.below(3);
    auto shape = random_complete_tree(rng, k, 3);
    auto m = make_finite(Alphabet::of_size(k), shape, random_laws(rng, shape, L, k));
    auto sim = simulate(m, 400, L, rng.next());
    auto trie = CountTrie::build(sim.sample);
    const auto probe = TreeShape::full(k, 2);
    for (const auto& w : probe.nodes()) {
      // p̄ is a mixture of compatible laws only on contexts every group has seen
      if (!trie.visible(w)) continue;
      for (auto fam : {SetFamily::singletons, SetFamily::all_subsets}) {
        for (double q : {1.0, 2.0, infinity}) {
          const double c = approx_error(m, sim, w, fam, q);
          const double cbar = approx_error_bar(m, w, L, fam, q);
          EXPECT_LE(c, cbar + 1e-12);
          EXPECT_LE(cbar, 2 * c + 1e-12);
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 1000);
  auto r = make_renewal();
  auto sim = simulate(r, 3000, 1, 6);
  for (const char* w : {"e", "0", "00", "000", "1", "10", "100", "0100"}) {
    const double c = approx_error(r, sim, ctx(w), SetFamily::singletons, 1);
    const double cbar = approx_error_bar(r, ctx(w), 1, SetFamily::singletons, 1);
    EXPECT_LE(c, cbar + 1e-12);
    EXPECT_LE(cbar, 2 * c + 1e-12);
  }
}

TEST(OracleTree, ZeroRadiiRecoverTheTrueTree) {
  auto m = make_order3_chain();
  auto sim = simulate(m, 3000, 1, 4);
  auto score = [&](const Context& w) { return approx_error(m, sim, w, SetFamily::singletons, 1); };
  auto t = oracle_tree_exhaustive(2, 3, score);
  EXPECT_EQ(t.tree, m.shape);
  EXPECT_DOUBLE_EQ(t.value, 0.0);
  EXPECT_EQ(oracle_tree_dp(2, 3, score).tree, m.shape);
}

TEST(OracleTree, UnitRadiiBelowRootKeepTheRoot) {
  // {e} scores 0.35 + 0.25; every split pays a leaf score of at least 1
  auto score = [](const Context& w) { return w.empty() ? 0.6 : 1.0 + 0.1 * static_cast<double>(w.size()); };
  auto t = oracle_tree_exhaustive(2, 3, score);
  EXPECT_EQ(t.tree.size(), 1u);
  EXPECT_DOUBLE_EQ(t.value, 0.6);
}

TEST(OracleTree, ExhaustiveAndBottomUpAgree) {
  Rng rng(19);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t k = rep % 3 == 0 ? 3 : 2;
    const std::size_t depth = k == 3 ? 2 : 1 + rng.below(3);
    // coarse scores create many ties
    std::map<Context, double, TreeOrder> s;
    const auto full = TreeShape::full(k, depth);
    for (const auto& w : full.nodes()) s[w] = static_cast<double>(rng.below(5)) / 4.0;
    auto score = [&](const Context& w) { return s.at(w); };
    auto a = oracle_tree_exhaustive(k, depth, score);
    auto b = oracle_tree_dp(k, depth, score);
    EXPECT_EQ(a.profile, b.profile);
    EXPECT_EQ(a.tree, b.tree);
    EXPECT_TRUE(a.tree.is_complete(k));
  }
  EXPECT_THROW(oracle_tree_exhaustive(2, 6, [](const Context&) { return 0.0; }), error);
}

TEST(CheckGood, TrivialRadii) {
  auto m = make_order3_chain();
  auto sim = simulate(m, 500, 2, 3);
  auto trie = CountTrie::build(sim.sample);
  auto table = oracle_table(trie, sim);
  EXPECT_TRUE(check_good(trie, [](CountTrie::node_id, std::size_t) { return 1.0; }, table, SetFamily::singletons, 2));
  EXPECT_FALSE(check_good(trie, [](CountTrie::node_id, std::size_t) { return 1e-300; }, table, SetFamily::singletons, 2));
}

TEST(Theorems, HoldOnGoodReplications) {
  auto m = make_order3_chain();
  EstimationConfig cfg;
  int good = 0;
  for (std::uint64_t rep = 0; rep < 6; ++rep) {
    auto sim = simulate(m, 2500, 10, replication_seed(50, rep));
    auto f = fit(sim.sample, cfg);
    auto r = check_theorems(m, sim, f, 3);
    if (!r.good) continue;
    ++good;
    EXPECT_TRUE(r.subset_ok);
    EXPECT_TRUE(r.evaluated);
    EXPECT_TRUE(r.radius_ok) << r.radius_gap;
    EXPECT_TRUE(r.oracle_ok) << r.oracle_gap;
    EXPECT_EQ(r.pasts, 16u);
  }
  EXPECT_GT(good, 3);
}

TEST(Study, DeterministicAcrossThreadCounts) {
  StudyConfig cfg;
  cfg.model = make_order3_chain();
  cfg.n = 800;
  cfg.groups = 2;
  cfg.replications = 6;
  cfg.seed = 11;
  auto a = run_study(cfg);
  cfg.threads = 3;
  auto b = run_study(cfg);
  EXPECT_EQ(a.frequency, b.frequency);
  EXPECT_EQ(a.mean_extra, b.mean_extra);
  EXPECT_EQ(a.tracked.size(), 15u);
  EXPECT_EQ(a.tracked.back(), Context{});
  EXPECT_DOUBLE_EQ(a.frequency.back(), 1.0);
  for (double f : a.frequency) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
  cfg.replications = 0;
  EXPECT_THROW(run_study(cfg), error);
}
