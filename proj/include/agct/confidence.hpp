#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agct/core.hpp"
#include "agct/counting.hpp"

namespace agct {

enum class RadiusMode { inf, l2, inf_var, l2_var, precise };

inline const char* radius_mode_name(RadiusMode m) {
  switch (m) {
    case RadiusMode::inf: return "inf";
    case RadiusMode::l2: return "l2";
    case RadiusMode::inf_var: return "inf_var";
    case RadiusMode::l2_var: return "l2_var";
    case RadiusMode::precise: return "precise";
  }
  return "inf";
}

inline std::optional<RadiusMode> parse_radius_mode(const std::string& s) {
  for (auto m : {RadiusMode::inf, RadiusMode::l2, RadiusMode::inf_var, RadiusMode::l2_var, RadiusMode::precise})
    if (s == radius_mode_name(m)) return m;
  return std::nullopt;
}

struct RadiusConfig {
  RadiusMode mode = RadiusMode::inf;
  double delta = 0.05;
  /// Geometric grid base for the precise radii.
  double gamma = 2.0;
  SetFamily fam = SetFamily::singletons;

  void validate() const {
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
    require(gamma > 1.0, "gamma must exceed 1");
  }
};

/// c(N, ε) = 2 √(1/N) √(log(1/ε) + 2 log(2 + 2 log N)), natural logs, uncapped.
inline double base_radius(double count, double eps) {
  require(count >= 1.0, "base_radius needs at least one occurrence");
  require(eps > 0.0 && eps <= 1.0, "base_radius needs eps in (0,1]");
  return 2.0 * std::sqrt(1.0 / count) * std::sqrt(std::log(1.0 / eps) + 2.0 * std::log(2.0 + 2.0 * std::log(count)));
}

/// Smallest i with γ^i log²(2 - 1/γ) >= 2 log(2/δ) + 2 log[(1+i)(2+i)].
inline int grid_start_index(double gamma, double delta) {
  require(gamma > 1.0, "gamma must exceed 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
  const double l2 = std::pow(std::log(2.0 - 1.0 / gamma), 2);
  for (int i = 0; i < 100000; ++i) {
    const double lhs = std::pow(gamma, i) * l2;
    const double rhs = 2.0 * std::log(2.0 / delta) + 2.0 * std::log((1.0 + i) * (2.0 + i));
    if (lhs >= rhs) return i;
  }
  fail(errc::convergence, "grid start index search did not terminate");
}

/// Sample-size constants shared by every node of one fit.
struct RadiusSetup {
  RadiusConfig cfg;
  double n = 0;             // max_l n_l
  double groups = 1;        // L
  double family = 2;        // |S|
  double eps_inf = 1;       // δ / (n² |S| L)
  // two-norm radii
  double alpha = 0;
  bool l2_valid = false;
  double eps_l2 = 1;
  double l2_inflation = 1;
  // precise radii
  double lambda = 0;
  double delta_c = 0;
  int i0 = 0;

  static RadiusSetup make(const RadiusConfig& cfg, std::size_t n, std::size_t groups, std::size_t alphabet_size) {
    cfg.validate();
    require(n >= 1 && groups >= 1, "radius setup needs a nonempty sample");
    RadiusSetup s;
    s.cfg = cfg;
    s.n = static_cast<double>(n);
    s.groups = static_cast<double>(groups);
    s.family = static_cast<double>(family_size(cfg.fam, alphabet_size));
    s.eps_inf = std::min(1.0, cfg.delta / (s.n * s.n * s.family * s.groups));
    const bool needs_large_n =
        cfg.mode == RadiusMode::l2 || cfg.mode == RadiusMode::l2_var || cfg.mode == RadiusMode::precise;
    if (needs_large_n) {
      require(n >= 9, "two-norm and precise radii need n >= 9");
      const double loglog = std::log(std::log(s.n));
      const double big = std::log(s.n * s.n * s.groups / cfg.delta);
      s.alpha = big * big / (s.groups * loglog);
      s.l2_valid = s.alpha < 3.0;
      s.eps_l2 = std::min(1.0, loglog / (4.0 * s.family * big * big));
      s.l2_inflation = std::sqrt((1.0 + 1.5 * s.alpha) * (1.0 + 1.0 / std::log(s.n)));
      s.lambda = std::log(4.0 * s.family * std::log(s.n) * big / loglog);
      const double mu = 1.0 / std::log(s.n);
      const double M = big / loglog;
      s.delta_c = mu / (2.0 * (1.0 + mu) * M * s.family);
      s.i0 = grid_start_index(cfg.gamma, s.delta_c);
    }
    return s;
  }

  bool two_norm() const { return cfg.mode == RadiusMode::l2 || cfg.mode == RadiusMode::l2_var; }
  bool fallback() const { return two_norm() && !l2_valid; }
};

/// conf^I for the sup-norm event, capped at 1; unseen contexts get 1.
inline double radius_inf(double count, const RadiusSetup& s) {
  if (count < 1.0) return 1.0;
  return std::min(1.0, base_radius(count, s.eps_inf));
}

/// conf^I for the two-norm event. Empty when α >= 3 and the caller must fall back to radius_inf.
inline std::optional<double> radius_l2(double count, const RadiusSetup& s) {
  require(s.n >= 9, "two-norm radii need n >= 9");
  if (!s.l2_valid) return std::nullopt;
  if (count < 1.0) return 1.0;
  return std::min(1.0, base_radius(count, s.eps_l2) * s.l2_inflation);
}

/// Upper-confidence plug-in for σ̄: every p̂(S) is moved toward 1/2 by `conf` before
/// taking the largest Bernoulli variance.
inline double sigma_hat(std::span<const double> phat, SetFamily fam, double conf) {
  double best = 0.0;
  for (double p : event_probabilities(phat, fam)) {
    double q = p < 0.5 ? std::min(0.5, p + conf) : std::max(0.5, p - conf);
    best = std::max(best, q * (1.0 - q));
  }
  return std::sqrt(std::min(0.25, best));
}

/// Sample-size event J: enough occurrences for the variance-based radius.
inline bool variance_event(double count, double sigma, const RadiusSetup& s) {
  const double v = sigma * sigma;
  if (v <= 0.0 || count < 1.0) return false;
  const double inner = 2.0 + 2.0 * std::log(v * count);
  if (inner <= 0.0) return false;
  const double l15 = std::log(1.5);
  const double need = (2.0 * std::log(s.n * s.n * s.family / s.cfg.delta) + 4.0 * std::log(inner)) / (v * l15 * l15);
  return count >= need;
}

/// conf^σ̃ = σ̃ · conf^I with σ̃ = √2 σ̂ on J and 1 otherwise.
inline double radius_var(double conf_i, double count, double sigma, const RadiusSetup& s) {
  const double tilde = variance_event(count, sigma, s) ? std::sqrt(2.0) * sigma : 1.0;
  return tilde * conf_i;
}

/// Two-branch γ-grid radius, capped at 1.
inline double radius_precise(double count, double sigma, const RadiusSetup& s) {
  if (count < 1.0) return 1.0;
  const double g = s.cfg.gamma;
  const double lg = std::log(g);
  const double v = sigma * sigma * count;
  double r;
  if (v >= std::pow(g, s.i0)) {
    r = g * std::sqrt(2.0 * sigma * sigma / count) * std::sqrt(s.lambda + 2.0 * std::log(2.0 + std::log(v) / lg));
  } else {
    r = std::sqrt(2.0 * g / count) * std::sqrt(s.lambda + 2.0 * std::log(2.0 + std::log(count) / lg));
  }
  return std::min(1.0, r);
}

/// Radius of one context in one group before monotonization.
/// `counts` holds N_{n-1,l}(w) for every group; `phat` the group's empirical row.
inline double raw_radius(std::span<const double> counts, std::size_t group, std::span<const double> phat,
                         const RadiusSetup& s) {
  for (double c : counts)
    if (c < 1.0) return 1.0;
  const double N = counts[group];
  const double ri = radius_inf(N, s);
  switch (s.cfg.mode) {
    case RadiusMode::inf: return ri;
    case RadiusMode::l2: return radius_l2(N, s).value_or(ri);
    case RadiusMode::inf_var: return radius_var(ri, N, sigma_hat(phat, s.cfg.fam, ri), s);
    case RadiusMode::l2_var: {
      const double base = radius_l2(N, s).value_or(ri);
      return radius_var(base, N, sigma_hat(phat, s.cfg.fam, base), s);
    }
    case RadiusMode::precise: return radius_precise(N, sigma_hat(phat, s.cfg.fam, ri), s);
  }
  return ri;
}

/// Running max down the tree: conf*(w) = max over suffixes w' ⪯ w of conf(w').
/// `parent[v]` must precede v; the root has parent npos.
inline void monotonize(std::vector<double>& table, std::span<const std::uint32_t> parent, std::size_t groups) {
  for (std::size_t v = 0; v < parent.size(); ++v) {
    if (parent[v] == CountTrie::npos) continue;
    for (std::size_t l = 0; l < groups; ++l)
      table[v * groups + l] = std::max(table[v * groups + l], table[parent[v] * groups + l]);
  }
}

/// Per-node, per-group radii for every explicit node of a trie.
class RadiusTable {
 public:
  RadiusTable() = default;

  static RadiusTable build(const CountTrie& trie, const RadiusConfig& cfg) {
    RadiusTable t;
    t.setup_ = RadiusSetup::make(cfg, trie.sample().max_length(), trie.groups(), trie.alphabet_size());
    if (t.setup_.fallback())
      t.warnings_.push_back("two-norm radii invalid (alpha = " + std::to_string(t.setup_.alpha) +
                            " >= 3); using sup-norm radii");
    const std::size_t L = trie.groups();
    const std::size_t A = trie.alphabet_size();
    t.groups_ = L;
    t.raw_.assign(trie.size() * L, 1.0);
    std::vector<double> counts(L), row(A);
    std::vector<std::uint32_t> parent(trie.size());
    for (CountTrie::node_id v = 0; v < trie.size(); ++v) {
      parent[v] = trie.parent(v);
      for (std::size_t l = 0; l < L; ++l) counts[l] = trie.count_context(v, l);
      for (std::size_t l = 0; l < L; ++l) {
        trie.empirical(v, l, row);
        t.raw_[v * L + l] = raw_radius(counts, l, row, t.setup_);
      }
    }
    t.conf_ = t.raw_;
    monotonize(t.conf_, parent, L);
    return t;
  }

  const RadiusSetup& setup() const noexcept { return setup_; }
  std::size_t groups() const noexcept { return groups_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Monotone radius conf*_l at an explicit node.
  double conf(CountTrie::node_id v, std::size_t l) const { return conf_[v * groups_ + l]; }
  double raw(CountTrie::node_id v, std::size_t l) const { return raw_[v * groups_ + l]; }
  std::span<const double> conf_row(CountTrie::node_id v) const { return {conf_.data() + v * groups_, groups_}; }

  /// Monotone radii for any context, computed from exact counts when the context is not explicit.
  std::vector<double> conf_of(const CountTrie& trie, const Context& w) const {
    const std::size_t L = groups_;
    const std::size_t A = trie.alphabet_size();
    std::vector<double> out(L, 0.0);
    std::vector<double> counts(L), row(A);
    CountTrie::node_id v = CountTrie::root;
    for (std::size_t len = 0; len <= w.size(); ++len) {
      if (len > 0 && v != CountTrie::npos) v = trie.child(v, w[w.size() - len]);
      if (v != CountTrie::npos) {
        for (std::size_t l = 0; l < L; ++l) out[l] = std::max(out[l], raw(v, l));
        continue;
      }
      const Context s = w.suffix(len);
      std::vector<CountTrie::Counts> c;
      for (std::size_t l = 0; l < L; ++l) {
        c.push_back(trie.counts(s, l));
        counts[l] = static_cast<double>(c.back().context);
      }
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t a = 0; a < A; ++a)
          row[a] = c[l].context ? static_cast<double>(c[l].next[a]) / counts[l] : 1.0 / static_cast<double>(A);
        out[l] = std::max(out[l], raw_radius(counts, l, row, setup_));
      }
    }
    return out;
  }

 private:
  RadiusSetup setup_;
  std::size_t groups_ = 0;
  std::vector<double> raw_;
  std::vector<double> conf_;
  std::vector<std::string> warnings_;
};

}  // namespace agct
