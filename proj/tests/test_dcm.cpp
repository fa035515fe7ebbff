#include <cmath>

#include <gtest/gtest.h>

#include "agct/dcm.hpp"
#include "agct/dp.hpp"
#include "agct/truth.hpp"

using namespace agct;

namespace {

std::vector<symbol> random_past(Rng& rng, std::size_t A, std::size_t len) {
  std::vector<symbol> x(len);
  for (auto& s : x) s = static_cast<symbol>(rng.below(A));
  return x;
}

ContextTreeModel fitted(std::size_t n, std::size_t L, std::uint64_t seed) {
  auto sim = simulate(make_order3_chain(), n, L, seed);
  return fit(sim.sample, dcm_estimation_config()).model;
}

}  // namespace

TEST(MarginalEffect, AntisymmetricAndSumsToZero) {
  auto model = fitted(2000, 4, 7);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    auto x = random_past(rng, 2, 12);
    auto y = random_past(rng, 2, 12);
    double total = 0.0;
    for (symbol a = 0; a < 2; ++a) {
      const double xy = avem(model, {a, x, y}).average;
      const double yx = avem(model, {a, y, x}).average;
      EXPECT_EQ(xy, -yx);
      total += xy;
    }
    EXPECT_NEAR(total, 0.0, 1e-15);
    EXPECT_EQ(avem(model, {1, x, x}).average, 0.0);
  }
}

TEST(MarginalEffect, PeriodicSequenceGivesUnitEffect) {
  GroupSample sample{Alphabet::of_size(2), {{}}};
  for (int i = 0; i < 5000; ++i) sample.sequences[0].push_back(static_cast<symbol>(i % 2));
  auto model = fit(sample, dcm_estimation_config()).model;
  std::vector<symbol> x{1, 0}, y{0, 1};
  EXPECT_DOUBLE_EQ(marginal_effect(model, 0, {1, x, y}), 1.0);
  EXPECT_DOUBLE_EQ(marginal_effect(model, 0, {0, x, y}), -1.0);
}

TEST(Avem, IdenticalAgentsAverageToTheCommonEffect) {
  auto truth = make_order3_chain();
  auto model = exact_model(truth, 5);
  std::vector<symbol> x{0, 0, 1}, y{1, 1, 0};
  auto r = avem(model, {0, x, y});
  for (double m : r.per_agent) EXPECT_EQ(m, r.per_agent[0]);
  EXPECT_DOUBLE_EQ(r.average, r.per_agent[0]);
  EXPECT_DOUBLE_EQ(r.average, 0.75 - 0.25);
}

TEST(Avem, AverageBoundedByLargestAgentEffect) {
  auto model = fitted(1500, 6, 3);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    auto r = avem(model, {static_cast<symbol>(rng.below(2)), random_past(rng, 2, 10), random_past(rng, 2, 10)});
    double big = 0.0;
    for (double m : r.per_agent) big = std::max(big, std::abs(m));
    EXPECT_LE(std::abs(r.average), big + 1e-15);
  }
}

TEST(Avem, HeterogeneousPopulationMeanEffect) {
  const std::size_t L = 40;
  auto truth = make_heterogeneous_depth1(L);
  std::vector<symbol> x{1, 0, 1, 0}, y{0, 1, 0, 1};
  // mean of 0.3 + 0.4 l/(L-1) is 0.5, against 0.8 after a 1
  EXPECT_NEAR(avem(exact_model(truth, L), {1, x, y}).average, -0.3, 1e-12);

  auto sim = simulate(make_heterogeneous_depth1(20), 40000, 20, 11);
  auto model = fit(sim.sample, dcm_estimation_config()).model;
  auto r = avem(model, {1, x, y});
  EXPECT_EQ(r.node_x, Context{0});
  EXPECT_EQ(r.node_y, Context{1});
  EXPECT_NEAR(r.average, -0.3, 0.03);
  EXPECT_NEAR(r.factor, 4 * 1.01 * 1.01 / 0.01, 1e-9);
  EXPECT_LE(std::abs(r.average + 0.3), r.diagnostic_envelope);
}

TEST(Avem, EnvelopeTerms) {
  // sqrt(2 log(2 * 10^4 / 0.2) / 4) + 0.5
  EXPECT_NEAR(avem_sampling_term(2, 10, 4, 0.05), std::sqrt(std::log(1e5) / 2.0) + 0.5, 1e-12);
  EXPECT_NEAR(avem_envelope(0.1, 0.0, 0.2, 0.3, 2, 10, 4, 0.05, 2.0), 16.0 * (0.6 + avem_sampling_term(2, 10, 4, 0.05)), 1e-12);
  EXPECT_THROW(avem_factor(1.0), error);
}

TEST(MarginalEffect, RejectsBadOption) {
  auto model = fitted(300, 1, 2);
  std::vector<symbol> x{0}, y{1};
  EXPECT_THROW(marginal_effect(model, 0, {2, x, y}), error);
}
