#include <map>

#include <gtest/gtest.h>

#include "agct/counting.hpp"
#include "agct/rng.hpp"

using namespace agct;

namespace {

GroupSample sample_of(std::vector<std::vector<symbol>> seqs, std::size_t k = 2) {
  return GroupSample{Alphabet::of_size(k), std::move(seqs)};
}

Context ctx(const char* s) { return Context::parse(s, Alphabet::of_size(2)); }

// Independent count oracle: direct window comparison at every ending index.
std::uint64_t brute_count(const std::vector<symbol>& x, const Context& w, std::size_t upto) {
  std::uint64_t c = 0;
  for (std::size_t i = std::max<std::size_t>(w.size(), 1); i <= upto; ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < w.size(); ++j)
      if (x[i - w.size() + j] != w[j]) ok = false;
    c += ok;
  }
  return c;
}

GroupSample random_sample(Rng& rng, std::size_t groups, std::size_t max_n, std::size_t k) {
  GroupSample s{Alphabet::of_size(k), {}};
  for (std::size_t l = 0; l < groups; ++l) {
    std::vector<symbol> x(2 + rng.below(max_n - 1));
    for (auto& a : x) a = static_cast<symbol>(rng.below(k));
    s.sequences.push_back(std::move(x));
  }
  return s;
}

}  // namespace

TEST(CountTrie, AlternatingExample) {
  auto t = CountTrie::build(sample_of({{0, 1, 0, 1, 0}}));
  auto v0 = *t.find(ctx("0"));
  EXPECT_EQ(t.count_full(v0, 0), 3u);
  EXPECT_EQ(t.count_context(v0, 0), 2u);
  EXPECT_EQ(t.count_next(v0, 0, 1), 2u);
  EXPECT_EQ(t.counts(ctx("01"), 0).full, 2u);
  EXPECT_DOUBLE_EQ(empirical_prob(t, ctx("0"), 0)[1], 1.0);
  EXPECT_EQ(t.count_full(CountTrie::root, 0), 5u);
  EXPECT_EQ(t.count_context(CountTrie::root, 0), 4u);
}

TEST(CountTrie, SecondExample) {
  auto t = CountTrie::build(sample_of({{0, 0, 1, 1, 0}}), {.max_depth = std::nullopt, .collapse_unique = false});
  auto c0 = t.counts(ctx("0"), 0);
  EXPECT_EQ(c0.full, 3u);
  EXPECT_EQ(c0.context, 2u);
  EXPECT_EQ(t.counts(ctx("00"), 0).full, 1u);
  EXPECT_EQ(t.counts(ctx("01"), 0).full, 1u);
  auto p = empirical_prob(t, ctx("e"), 0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(CountTrie, UnseenContextIsUniform) {
  auto t = CountTrie::build(sample_of({{0, 0, 0, 0}}));
  auto p = empirical_prob(t, ctx("1"), 0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_THROW(empirical_prob(t, ctx("1"), 3), error);
}

TEST(CountTrie, RejectsBadInput) {
  EXPECT_THROW(CountTrie::build(sample_of({{0, 2}})), error);
  EXPECT_THROW(CountTrie::build(sample_of({})), error);
  EXPECT_THROW(CountTrie::build(sample_of({{0, 1}}), {.max_depth = 0}), error);
}

TEST(CountTrie, MatchesBruteForceOnRandomSamples) {
  Rng rng(99);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t k = 2 + rng.below(2);
    auto s = random_sample(rng, 1 + rng.below(3), 40, k);
    auto t = CountTrie::build(s, {.max_depth = std::nullopt, .collapse_unique = false});
    // Every visible context up to depth 5 must be present with exact counts.
    std::vector<Context> frontier{Context{}};
    std::size_t visible = 0;
    while (!frontier.empty()) {
      std::vector<Context> next;
      for (const auto& w : frontier) {
        bool vis = true;
        for (std::size_t l = 0; l < s.groups(); ++l)
          if (brute_count(s.sequences[l], w, s.length(l) - 1) == 0) vis = false;
        auto v = t.find(w);
        if (!vis) {
          if (!w.empty()) {
            EXPECT_FALSE(v.has_value());
          }
          continue;
        }
        ++visible;
        ASSERT_TRUE(v.has_value());
        for (std::size_t l = 0; l < s.groups(); ++l) {
          EXPECT_EQ(t.count_full(*v, l), brute_count(s.sequences[l], w, s.length(l)));
          EXPECT_EQ(t.count_context(*v, l), brute_count(s.sequences[l], w, s.length(l) - 1));
          std::uint64_t total = 0;
          for (std::size_t a = 0; a < k; ++a) {
            auto wa = w.extend_newer(static_cast<symbol>(a));
            // the pair (occurrence of w ending at i <= n-1, next symbol a) is an occurrence of wa ending at i+1
            std::uint64_t expect = brute_count(s.sequences[l], wa, s.length(l));
            if (w.empty() && s.sequences[l][0] == a) --expect;
            EXPECT_EQ(t.count_next(*v, l, static_cast<symbol>(a)), expect);
            total += t.count_next(*v, l, static_cast<symbol>(a));
          }
          EXPECT_EQ(total, t.count_context(*v, l));
        }
        EXPECT_EQ(t.context(*v), w);
        for (std::size_t a = 0; a < k; ++a) next.push_back(w.extend_older(static_cast<symbol>(a)));
      }
      frontier = std::move(next);
    }
    // the root exists even when nothing else does
    EXPECT_EQ(t.size(), std::max<std::size_t>(visible, 1));
  }
}

TEST(CountTrie, CollapsedNodesKeepExactCountsForDeeperContexts) {
  Rng rng(5);
  auto s = random_sample(rng, 2, 30, 2);
  auto full = CountTrie::build(s, {.max_depth = std::nullopt, .collapse_unique = false});
  auto lean = CountTrie::build(s);
  EXPECT_LE(lean.size(), full.size());
  for (CountTrie::node_id v = 0; v < full.size(); ++v) {
    auto w = full.context(v);
    for (std::size_t l = 0; l < s.groups(); ++l) {
      auto c = lean.counts(w, l);
      EXPECT_EQ(c.context, full.count_context(v, l));
      EXPECT_EQ(c.full, full.count_full(v, l));
    }
    EXPECT_TRUE(lean.visible(w));
  }
}

TEST(CountTrie, SubtreeRangesArePreorder) {
  Rng rng(17);
  auto s = random_sample(rng, 1, 60, 3);
  auto t = CountTrie::build(s);
  for (CountTrie::node_id v = 0; v < t.size(); ++v) {
    auto w = t.context(v);
    for (CountTrie::node_id u = 0; u < t.size(); ++u) {
      const bool inside = u >= v && u < t.subtree_end(v);
      EXPECT_EQ(inside, w.is_suffix_of(t.context(u)));
    }
  }
}

TEST(CountTrie, NodeCountWithinSubstringBound) {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    auto s = random_sample(rng, 2, 80, 2);
    auto t = CountTrie::build(s, {.max_depth = std::nullopt, .collapse_unique = false});
    std::size_t bound = 0;
    for (std::size_t l = 0; l < s.groups(); ++l) bound += s.length(l) * (s.length(l) + 1) / 2;
    EXPECT_LE(t.size(), bound);
  }
}

TEST(CountTrie, MaxDepthTruncates) {
  Rng rng(1);
  auto s = random_sample(rng, 1, 200, 2);
  auto t = CountTrie::build(s, {.max_depth = 2});
  for (CountTrie::node_id v = 0; v < t.size(); ++v) EXPECT_LE(t.depth(v), 2u);
}

TEST(CountTrie, AccumulateSumsOverContextOccurrences) {
  Rng rng(8);
  auto s = random_sample(rng, 2, 50, 2);
  auto t = CountTrie::build(s);
  std::vector<std::vector<double>> vals(2);
  for (std::size_t l = 0; l < 2; ++l) {
    vals[l].assign(s.length(l) + 1, 0.0);
    for (std::size_t i = 1; i <= s.length(l); ++i) vals[l][i] = 1.0;
  }
  auto acc = t.accumulate(vals, 1);
  for (CountTrie::node_id v = 0; v < t.size(); ++v)
    for (std::size_t l = 0; l < 2; ++l) EXPECT_DOUBLE_EQ(acc[v * 2 + l], t.count_context(v, l));
}

TEST(CountTrie, BudgetWarningAndHardLimit) {
  // a constant run gives a chain of about twenty visible contexts
  auto s = sample_of({std::vector<symbol>(20, 0)});
  auto t = CountTrie::build(s, {.max_depth = std::nullopt, .collapse_unique = true, .node_budget = 5});
  EXPECT_GT(t.size(), 5u);
  EXPECT_FALSE(t.warnings().empty());
  EXPECT_THROW(CountTrie::build(s, {.max_depth = std::nullopt, .collapse_unique = false, .node_budget = 1}), error);
}
