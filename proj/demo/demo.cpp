// Small end-to-end walk through: simulate grouped sequences, fit a context tree,
// predict, solve a two-action decision problem, and compute an average marginal effect.

#include <cstdio>

#include "agct/dcm.hpp"
#include "agct/dp.hpp"
#include "agct/truth.hpp"

using namespace agct;

int main() {
  const auto truth = make_order3_chain();
  const auto alpha = truth.alphabet;

  auto sim = simulate(truth, 20000, 2, 42);
  EstimationConfig cfg;
  cfg.radius.mode = RadiusMode::precise;
  auto fitted = fit(sim.sample, cfg);
  const auto& model = fitted.model;

  std::printf("fitted %zu nodes from %zu counted contexts\n", model.shape.size(), fitted.trie.size());
  for (const auto& leaf : model.shape.leaves(alpha.size())) {
    const auto& e = model.at(leaf);
    std::printf("  %-4s p(1|w) =", leaf.str(alpha).c_str());
    for (std::size_t l = 0; l < model.groups(); ++l) std::printf(" %.3f", e.probs[l][1]);
    std::printf("\n");
  }

  const std::vector<symbol> past{0, 1, 1, 0};
  const auto p = predict(complete_model(model), past, 0);
  std::printf("after 0110 group 0 predicts p(0)=%.3f p(1)=%.3f\n", p[0], p[1]);

  MDPSpec spec;
  spec.actions = 2;
  spec.beta = 0.9;
  spec.reward = {1.0, 0.0, 0.0, 1.2};
  auto table = value_iteration(complete_model(model), spec);
  std::printf("value iteration: %zu states, residual %.2e\n", table.values.size(), table.residual);
  const std::vector<symbol> ones(4, 1);
  std::printf("  V(0110) = %.4f, V(1111) = %.4f\n", table.value(past), table.value(ones));

  const std::size_t L = 50;
  auto choices = simulate(make_heterogeneous_depth1(L), 20000, L, 7);
  auto dcm = fit(choices.sample, dcm_estimation_config()).model;
  auto eff = avem(dcm, {1, {1, 0, 1, 0, 1}, {0, 1, 0, 1, 0}});
  std::printf("average effect of last choice 1 vs 0 on choosing 1: %.3f (population value 0.300)\n", eff.average);
}
