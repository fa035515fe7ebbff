#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "agct/core.hpp"
#include "agct/pruning.hpp"

namespace agct {

/// Fitting settings used for choice models: d = ‖·‖_∞, k = 1, r = m = 2, multi-group radii.
inline EstimationConfig dcm_estimation_config() {
  EstimationConfig cfg;
  cfg.radius.mode = RadiusMode::l2;
  cfg.fam = SetFamily::singletons;
  cfg.k = 1.0;
  cfg.r = 2.0;
  cfg.m = 2.0;
  return cfg;
}

/// Option a and two histories, both newest-last.
struct EffectQuery {
  symbol option = 0;
  std::vector<symbol> x;
  std::vector<symbol> y;
};

struct EffectReport {
  std::vector<double> per_agent;
  double average = 0.0;
  Context node_x, node_y;
  /// R_2{conf(T̂(x))} and R_2{conf(T̂(y))}
  double radius_x = 0.0, radius_y = 0.0;
  /// sqrt(2 log(|A| n^4 / (4δ)) / L) + 2/L
  double sampling_term = 0.0;
  /// 4c^2/(c-1)
  double factor = 0.0;
  /// factor times the observable terms; the approximation errors of the oracle tree are left out
  double diagnostic_envelope = 0.0;
};

/// m̂_l(a, x, y) = p̂_l(a | T̂(x)) - p̂_l(a | T̂(y))
inline double marginal_effect(const ContextTreeModel& model, std::size_t l, const EffectQuery& q) {
  require(q.option < model.alphabet.size(), "option outside the alphabet");
  const double px = predict(model, q.x, l)[q.option];
  const double py = predict(model, q.y, l)[q.option];
  return px - py;
}

inline double avem_sampling_term(std::size_t alphabet_size, std::size_t n, std::size_t groups, double delta) {
  const double N = static_cast<double>(n);
  const double L = static_cast<double>(groups);
  return std::sqrt(2.0 * std::log(static_cast<double>(alphabet_size) * N * N * N * N / (4.0 * delta)) / L) + 2.0 / L;
}

inline double avem_factor(double c) {
  require(c > 1.0, "the average-effect bound needs c > 1");
  return 4.0 * c * c / (c - 1.0);
}

/// Bound on |ÂVEm - AVEm| given the oracle-tree terms at T(x) and T(y).
inline double avem_envelope(double c_x, double c_y, double radius_x, double radius_y, std::size_t alphabet_size, std::size_t n,
                            std::size_t groups, double delta, double c) {
  return avem_factor(c) * (c_x + c_y + radius_x + radius_y + avem_sampling_term(alphabet_size, n, groups, delta));
}

/// ÂVEm = mean over agents of m̂_l, with the observable envelope terms.
inline EffectReport avem(const ContextTreeModel& model, const EffectQuery& q) {
  const std::size_t A = model.alphabet.size();
  EffectReport r;
  r.node_x = terminal_node(model.shape, q.x, A);
  r.node_y = terminal_node(model.shape, q.y, A);
  for (std::size_t l = 0; l < model.groups(); ++l) r.per_agent.push_back(marginal_effect(model, l, q));
  double s = 0.0;
  for (double m : r.per_agent) s += m;
  r.average = s / static_cast<double>(r.per_agent.size());
  r.radius_x = group_norm(model.at(r.node_x).conf, 2.0);
  r.radius_y = group_norm(model.at(r.node_y).conf, 2.0);
  std::size_t n = 1;
  for (auto len : model.lengths) n = std::max(n, len);
  r.sampling_term = avem_sampling_term(A, n, model.groups(), model.config.radius.delta);
  if (model.config.c > 1.0) {
    r.factor = avem_factor(model.config.c);
    r.diagnostic_envelope = r.factor * (r.radius_x + r.radius_y + r.sampling_term);
  }
  return r;
}

}  // namespace agct
