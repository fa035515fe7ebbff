#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agct/core.hpp"
#include "agct/pruning.hpp"
#include "agct/truth.hpp"

namespace agct {

/// Actions, rewards f(a, u) indexed by the current symbol a, and the discount factor.
struct MDPSpec {
  std::size_t actions = 1;
  /// f(a, u) stored at a * actions + u
  std::vector<double> reward;
  double beta = 0.9;

  double f(symbol a, std::size_t u) const { return reward[a * actions + u]; }

  void validate(std::size_t alphabet_size) const {
    require(actions >= 1, "an MDP needs at least one action");
    require(reward.size() == alphabet_size * actions, "reward table must have |A| x |U| entries");
    for (double r : reward) require(std::isfinite(r), "rewards must be finite");
    require(beta >= 0.0 && beta < 1.0, "discount must lie in [0, 1)");
  }
};

struct DPOptions {
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  /// largest |A|^h handled by the exact embedding
  std::size_t budget = 2'000'000;
  /// above the budget, iterate on tree nodes with truncated histories instead of failing
  bool allow_fallback = false;
};

/// Fitting settings used for decision problems: d = ‖·‖_1 / 2 and k = r = m = ∞.
inline EstimationConfig dp_estimation_config() {
  EstimationConfig cfg;
  cfg.fam = SetFamily::all_subsets;
  cfg.k = infinity;
  cfg.r = infinity;
  cfg.m = infinity;
  return cfg;
}

/// A finite controlled chain: successor next[s * A + a], law probs[(s * U + u) * A + a],
/// current symbol last[s].
struct FiniteMDP {
  std::size_t states = 0;
  std::size_t alphabet_size = 0;
  std::size_t actions = 0;
  std::vector<std::size_t> next;
  std::vector<double> probs;
  std::vector<symbol> last;
  /// order of the window embedding; 0 for the node-level fallback
  std::size_t order = 0;
  std::vector<Context> labels;
  bool approximate = false;

  std::span<const double> law(std::size_t s, std::size_t u) const {
    return {probs.data() + (s * actions + u) * alphabet_size, alphabet_size};
  }
};

struct ValueTable {
  std::size_t order = 0;
  std::size_t alphabet_size = 0;
  std::vector<double> values;
  std::vector<std::size_t> policy;
  /// sup-norm change of the Bellman operator applied to the returned values
  double residual = 0.0;
  std::size_t iterations = 0;
  /// sup-norm gap of every sweep
  std::vector<double> gaps;
  bool contraction_ok = true;
  bool approximate = false;
  std::vector<Context> labels;

  /// Value of the window formed by the last `order` symbols of a past (newest-last).
  double value(std::span<const symbol> past) const {
    require(!approximate, "node-level tables are indexed by label");
    require(past.size() >= order, "past shorter than the embedding order");
    std::size_t s = 0;
    for (std::size_t i = order; i-- > 0;) s = s * alphabet_size + past[past.size() - order + i];
    return values.at(s);
  }
};

inline double bellman(const FiniteMDP& mdp, const MDPSpec& spec, const std::vector<double>& V, std::size_t s,
                      std::size_t* arg = nullptr) {
  double best = -infinity;
  for (std::size_t u = 0; u < mdp.actions; ++u) {
    const auto p = mdp.law(s, u);
    double ev = 0.0;
    for (std::size_t a = 0; a < mdp.alphabet_size; ++a) ev += p[a] * V[mdp.next[s * mdp.alphabet_size + a]];
    const double q = spec.f(mdp.last[s], u) + spec.beta * ev;
    if (q > best) {
      best = q;
      if (arg) *arg = u;
    }
  }
  return best;
}

/// Synchronous value iteration to a sup-norm gap below tol.
inline ValueTable solve_mdp(const FiniteMDP& mdp, const MDPSpec& spec, const DPOptions& opt = {}) {
  spec.validate(mdp.alphabet_size);
  require(spec.actions == mdp.actions, "action count differs between model and spec");
  ValueTable t;
  t.order = mdp.order;
  t.alphabet_size = mdp.alphabet_size;
  t.approximate = mdp.approximate;
  t.labels = mdp.labels;
  std::vector<double> V(mdp.states, 0.0), W(mdp.states);
  t.policy.assign(mdp.states, 0);
  for (std::size_t it = 1;; ++it) {
    if (it > opt.max_iter)
      fail(errc::convergence, "value iteration hit max_iter with gap " + std::to_string(t.gaps.back()));
    double gap = 0.0;
    for (std::size_t s = 0; s < mdp.states; ++s) {
      W[s] = bellman(mdp, spec, V, s);
      gap = std::max(gap, std::abs(W[s] - V[s]));
    }
    V.swap(W);
    if (!t.gaps.empty() && gap > spec.beta * t.gaps.back() + 1e-12) t.contraction_ok = false;
    t.gaps.push_back(gap);
    t.iterations = it;
    if (gap <= opt.tol) break;
  }
  double res = 0.0;
  for (std::size_t s = 0; s < mdp.states; ++s) res = std::max(res, std::abs(bellman(mdp, spec, V, s, &t.policy[s]) - V[s]));
  t.residual = res;
  t.values = std::move(V);
  return t;
}

namespace detail {

inline std::size_t window_states(std::size_t A, std::size_t h, std::size_t budget) {
  std::size_t states = 1;
  for (std::size_t i = 0; i < h; ++i) {
    if (states > budget / A) return budget + 1;
    states *= A;
  }
  return states;
}

/// Window embedding of order h with the law of (state, action) given by `law`.
template <typename Law>
FiniteMDP window_mdp(std::size_t A, std::size_t U, std::size_t h, Law&& law) {
  FiniteMDP mdp;
  mdp.alphabet_size = A;
  mdp.actions = U;
  mdp.order = h;
  std::size_t states = 1;
  for (std::size_t i = 0; i < h; ++i) states *= A;
  const std::size_t top = states / A;
  mdp.states = states;
  mdp.next.resize(states * A);
  mdp.probs.resize(states * U * A);
  mdp.last.resize(states);
  std::vector<symbol> w(h);
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t x = s;
    for (std::size_t i = 0; i < h; ++i) {
      w[i] = static_cast<symbol>(x % A);
      x /= A;
    }
    mdp.last[s] = w[h - 1];
    for (std::size_t a = 0; a < A; ++a) mdp.next[s * A + a] = s / A + a * top;
    for (std::size_t u = 0; u < U; ++u) {
      const Distribution p = law(std::span<const symbol>(w), u);
      for (std::size_t a = 0; a < A; ++a) mdp.probs[(s * U + u) * A + a] = p[a];
    }
  }
  return mdp;
}

/// Deepest node of `shape` that is a suffix of w, reading w newest-first for as long as it lasts.
inline Context deepest_determined(const TreeShape& shape, const Context& w) {
  Context best;
  for (std::size_t k = 1; k <= w.size(); ++k) {
    Context s = w.suffix(k);
    if (!shape.contains(s)) break;
    best = std::move(s);
  }
  return best;
}

}  // namespace detail

/// The estimated decision chain: order-h windows, h = max(height, 1), or tree nodes as a fallback.
inline FiniteMDP build_mdp(const ContextTreeModel& model, const MDPSpec& spec, const DPOptions& opt = {}) {
  const std::size_t A = model.alphabet.size();
  require(model.groups() == spec.actions, "groups of the model must match the actions");
  const std::size_t h = std::max<std::size_t>(model.shape.height(), 1);
  if (detail::window_states(A, h, opt.budget) <= opt.budget)
    return detail::window_mdp(A, spec.actions, h, [&](std::span<const symbol> w, std::size_t u) { return predict(model, w, u); });
  if (!opt.allow_fallback)
    fail(errc::budget_exceeded, "|A|^h = " + std::to_string(A) + "^" + std::to_string(h) +
                                    " states exceed the budget; enable the node-level fallback (approximate)");
  const ContextTreeModel full = complete_model(model);
  FiniteMDP mdp;
  mdp.alphabet_size = A;
  mdp.actions = spec.actions;
  mdp.approximate = true;
  mdp.labels.assign(full.shape.nodes().begin(), full.shape.nodes().end());
  std::map<Context, std::size_t, TreeOrder> index;
  for (std::size_t i = 0; i < mdp.labels.size(); ++i) index[mdp.labels[i]] = i;
  mdp.states = mdp.labels.size();
  mdp.next.resize(mdp.states * A);
  mdp.probs.resize(mdp.states * spec.actions * A);
  mdp.last.resize(mdp.states);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    const Context& w = mdp.labels[s];
    // the root carries no current symbol; use symbol 0 for its reward
    mdp.last[s] = w.empty() ? 0 : w.newest();
    for (std::size_t a = 0; a < A; ++a)
      mdp.next[s * A + a] = index.at(detail::deepest_determined(full.shape, w.extend_newer(static_cast<symbol>(a))));
    const auto& e = full.at(w);
    for (std::size_t u = 0; u < spec.actions; ++u)
      for (std::size_t a = 0; a < A; ++a) mdp.probs[(s * spec.actions + u) * A + a] = e.probs[u][a];
  }
  return mdp;
}

inline ValueTable value_iteration(const ContextTreeModel& model, const MDPSpec& spec, const DPOptions& opt = {}) {
  return solve_mdp(build_mdp(model, spec, opt), spec, opt);
}

/// The true decision chain of a finite model whose groups are the actions, embedded at order h.
inline FiniteMDP true_mdp(const TrueModel& truth, const MDPSpec& spec, std::size_t h) {
  require(truth.kind == TrueModel::Kind::finite, "exact value iteration needs a finite true model");
  truth.validate(spec.actions);
  require(h >= std::max<std::size_t>(truth.height(), 1), "embedding order below the true tree height");
  return detail::window_mdp(truth.alphabet.size(), spec.actions, h,
                            [&](std::span<const symbol> w, std::size_t u) { return true_prob(truth, w, u); });
}

/// The true model as a fitted-model object (probabilities exact, counts zero).
inline ContextTreeModel exact_model(const TrueModel& truth, std::size_t groups) {
  require(truth.kind == TrueModel::Kind::finite, "exact_model needs a finite true model");
  truth.validate(groups);
  ContextTreeModel m;
  m.alphabet = truth.alphabet;
  m.shape = truth.shape;
  m.config = dp_estimation_config();
  m.lengths.assign(groups, 0);
  m.completed = true;
  const std::size_t A = truth.alphabet.size();
  for (const auto& w : truth.shape.nodes()) {
    NodeEstimate e;
    for (std::size_t l = 0; l < groups; ++l) {
      std::vector<double> p(A, 0.0);
      if (truth.laws.count(w)) {
        const auto& d = truth.law(w, l);
        p.assign(d.probs().begin(), d.probs().end());
      } else {
        p.assign(A, 1.0 / static_cast<double>(A));
      }
      e.probs.push_back(std::move(p));
      e.conf.push_back(1.0);
      e.counts.push_back(0);
    }
    m.nodes.emplace(w, std::move(e));
  }
  return m;
}

/// Per-state terms of the value-function perturbation bound and its global form.
struct DPErrorBound {
  std::size_t order = 0;
  /// |V̂(x) - V(x)|
  std::vector<double> lhs;
  /// (β/(1-β)) ‖V(x·)‖_{q/(q-1)} max_u ‖P̂_u(·|x) - p_u(·|x)‖_q
  std::vector<double> rhs;
  double max_lhs = 0.0;
  /// (β/(1-β)) max_x ‖V(x·)‖ · max_x max_u ‖P̂_u - p_u‖_q
  double global_rhs = 0.0;
  std::size_t state_violations = 0;
  bool holds = true;
};

inline double dual_norm(std::span<const double> v, double q) {
  // ‖·‖_{q/(q-1)}: q = 1 gives the sup norm, q = ∞ gives the l1 norm
  if (q == 1.0) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  const double p = std::isinf(q) ? 1.0 : q / (q - 1.0);
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

inline double lq_norm(std::span<const double> v, double q) {
  if (std::isinf(q)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), q);
  return std::pow(s, 1.0 / q);
}

/// Compares value iteration on the estimated and the true decision chains on a shared embedding.
inline DPErrorBound dp_error_bound(const TrueModel& truth, const ContextTreeModel& model, const MDPSpec& spec, double q = 1.0,
                                   const DPOptions& opt = {}) {
  require(q >= 1.0, "the bound needs q >= 1");
  const std::size_t A = truth.alphabet.size();
  const std::size_t h = std::max({model.shape.height(), truth.height(), std::size_t{1}});
  require(detail::window_states(A, h, opt.budget) <= opt.budget, "embedding too large for the error bound");
  const FiniteMDP est =
      detail::window_mdp(A, spec.actions, h, [&](std::span<const symbol> w, std::size_t u) { return predict(model, w, u); });
  const FiniteMDP tru = true_mdp(truth, spec, h);
  const auto Vh = solve_mdp(est, spec, opt);
  const auto V = solve_mdp(tru, spec, opt);
  DPErrorBound out;
  out.order = h;
  // both tables are within tol/(1-β) of their fixed points
  const double slack = 1e-9 + 2.0 * opt.tol / (1.0 - spec.beta);
  const double factor = spec.beta / (1.0 - spec.beta);
  double max_vnorm = 0.0, max_delta = 0.0;
  std::vector<double> succ(A), diff(A);
  for (std::size_t s = 0; s < est.states; ++s) {
    for (std::size_t a = 0; a < A; ++a) succ[a] = V.values[tru.next[s * A + a]];
    double delta = 0.0;
    for (std::size_t u = 0; u < spec.actions; ++u) {
      const auto p = est.law(s, u), t = tru.law(s, u);
      for (std::size_t a = 0; a < A; ++a) diff[a] = p[a] - t[a];
      delta = std::max(delta, lq_norm(diff, q));
    }
    const double vnorm = dual_norm(succ, q);
    const double lhs = std::abs(Vh.values[s] - V.values[s]);
    const double rhs = factor * vnorm * delta;
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    out.state_violations += lhs > rhs + slack;
    out.max_lhs = std::max(out.max_lhs, lhs);
    max_vnorm = std::max(max_vnorm, vnorm);
    max_delta = std::max(max_delta, delta);
  }
  out.global_rhs = factor * max_vnorm * max_delta;
  out.holds = out.max_lhs <= out.global_rhs + slack;
  return out;
}

}  // namespace agct
