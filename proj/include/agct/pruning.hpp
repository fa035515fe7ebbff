#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "agct/confidence.hpp"
#include "agct/core.hpp"
#include "agct/counting.hpp"

namespace agct {

/// Order in which PruneTree examines the current leaves.
enum class ExamOrder { deepest_first, random };

struct EstimationConfig {
  SetFamily fam = SetFamily::singletons;
  double k = 1.0;
  double r = 2.0;
  double m = 2.0;
  /// Slack multiplying the radii in the removal test.
  double c = 1.01;
  RadiusConfig radius{};
  std::optional<std::size_t> max_depth;
  /// Compare w' only against parent(w) rather than every w'' below parent(w).
  bool restricted_candidates = false;
  ExamOrder order = ExamOrder::deepest_first;
  std::uint64_t order_seed = 0;
  bool collapse_unique = true;
  std::size_t node_budget = 10'000'000;

  /// k, r, m in [1, ∞] with k <= m and r >= km/(m-k), or k <= r = m = ∞.
  static bool exponents_compatible(double k, double r, double m) {
    if (!(k >= 1.0 && r >= 1.0 && m >= 1.0)) return false;
    if (std::isinf(m)) {
      if (std::isinf(r)) return true;
      return !std::isinf(k) && r >= k * (1.0 - 1e-12);
    }
    if (std::isinf(k) || k > m) return false;
    if (k == m) return std::isinf(r);
    const double need = k * m / (m - k);
    return std::isinf(r) || r >= need * (1.0 - 1e-12);
  }

  void validate() const {
    require(exponents_compatible(k, r, m), "exponents (k, r, m) violate k <= m and r >= km/(m-k)");
    require(c > 0.0 && std::isfinite(c), "slack c must be positive");
    if (max_depth) require(*max_depth > 0, "max_depth must be positive");
    RadiusConfig rc = radius;
    rc.fam = fam;
    rc.validate();
  }

  RadiusConfig radius_config() const {
    RadiusConfig rc = radius;
    rc.fam = fam;
    return rc;
  }
};

/// The removal inequality for one pair: M_k{d} <= c R_r{conf'} + c R_r{conf''}.
inline bool pair_within_slack(std::span<const double> distances, std::span<const double> conf_a,
                              std::span<const double> conf_b, const EstimationConfig& cfg) {
  return group_norm(distances, cfg.k) <= cfg.c * group_norm(conf_a, cfg.r) + cfg.c * group_norm(conf_b, cfg.r);
}

/// Per-node payload of a fitted model.
struct NodeEstimate {
  /// p̂_l(·|w), one row per group.
  std::vector<std::vector<double>> probs;
  /// conf*_l(w)
  std::vector<double> conf;
  /// N_{n-1,l}(w)
  std::vector<std::uint64_t> counts;
  /// Added by completion; carries the parent's rows.
  bool synthetic = false;
};

struct ContextTreeModel {
  Alphabet alphabet;
  TreeShape shape;
  std::map<Context, NodeEstimate, TreeOrder> nodes;
  EstimationConfig config;
  std::vector<std::size_t> lengths;
  bool completed = false;
  std::vector<std::string> warnings;

  std::size_t groups() const noexcept { return lengths.size(); }
  const NodeEstimate& at(const Context& w) const {
    auto it = nodes.find(w);
    if (it == nodes.end()) fail(errc::invalid_argument, "context not in model");
    return it->second;
  }
};

/// Evaluates CanRmv on the nodes of a count trie and runs the pruning loop.
///
/// The candidate set {w' ∈ E_n : w ⪯ w'} of a node is its preorder id range, so the
/// per-node lists of the efficiency remark are read straight off the trie.
class Pruner {
 public:
  using node_id = CountTrie::node_id;

  Pruner(const CountTrie& trie, const RadiusTable& radii, const EstimationConfig& cfg)
      : trie_(trie), radii_(radii), cfg_(cfg), L_(trie.groups()), A_(trie.alphabet_size()), size_(trie.size()) {
    cfg.validate();
    rows_.resize(size_ * L_ * A_);
    radius_norm_.resize(size_);
    for (node_id v = 0; v < size_; ++v) {
      for (std::size_t l = 0; l < L_; ++l)
        trie_.empirical(v, l, std::span<double>(rows_.data() + (v * L_ + l) * A_, A_));
      radius_norm_[v] = group_norm(radii_.conf_row(v), cfg_.r);
    }
    memo_.assign(size_, -1);
    build_spans();
    if (L_ == 1 && family_size(cfg_.fam, A_) <= 64) build_event_aggregates();
  }

  std::size_t size() const noexcept { return size_; }

  /// R_r{conf(w)}
  double radius_norm(node_id v) const { return radius_norm_[v]; }

  /// M_k{ d_l(p̂(·|u), p̂(·|v)) }
  double distance(node_id u, node_id v) const {
    std::vector<double> d(L_);
    for (std::size_t l = 0; l < L_; ++l) d[l] = metric_distance(row(u, l), row(v, l), cfg_.fam);
    return group_norm(d, cfg_.k);
  }

  /// True when the pair breaks the removal inequality.
  bool violates(node_id u, node_id v) const {
    return distance(u, v) > cfg_.c * radius_norm_[u] + cfg_.c * radius_norm_[v];
  }

  bool can_remove(node_id w) {
    require(w != CountTrie::root, "the root is never removed");
    if (memo_[w] < 0) memo_[w] = compute_can_remove(w) ? 1 : 0;
    return memo_[w] == 1;
  }

  /// Straight double loop over all candidate pairs, used as a reference.
  bool can_remove_brute(node_id w) const {
    require(w != CountTrie::root, "the root is never removed");
    const node_id p = trie_.parent(w);
    const node_id p_end = cfg_.restricted_candidates ? p + 1 : trie_.subtree_end(p);
    for (node_id u = w; u < trie_.subtree_end(w); ++u)
      for (node_id v = p; v < p_end; ++v)
        if (violates(u, v)) return false;
    return true;
  }

  /// The leaf-examination loop. Returns an alive flag per node.
  std::vector<std::uint8_t> run() {
    std::vector<std::uint8_t> alive(size_, 1), examined(size_, 0);
    std::vector<std::uint32_t> live_children(size_, 0);
    for (node_id v = 1; v < size_; ++v) ++live_children[trie_.parent(v)];

    std::vector<node_id> pending;
    for (node_id v = 1; v < size_; ++v)
      if (live_children[v] == 0) pending.push_back(v);

    auto deeper = [&](node_id a, node_id b) {
      if (trie_.depth(a) != trie_.depth(b)) return trie_.depth(a) < trie_.depth(b);
      return a > b;
    };
    std::mt19937_64 rng(cfg_.order_seed);
    if (cfg_.order == ExamOrder::deepest_first) std::make_heap(pending.begin(), pending.end(), deeper);

    while (!pending.empty()) {
      node_id w;
      if (cfg_.order == ExamOrder::deepest_first) {
        std::pop_heap(pending.begin(), pending.end(), deeper);
        w = pending.back();
        pending.pop_back();
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pending.size() - 1);
        const std::size_t i = pick(rng);
        w = pending[i];
        pending[i] = pending.back();
        pending.pop_back();
      }
      if (can_remove(w)) {
        alive[w] = 0;
        const node_id p = trie_.parent(w);
        if (--live_children[p] == 0 && p != CountTrie::root && !examined[p]) {
          pending.push_back(p);
          if (cfg_.order == ExamOrder::deepest_first) std::push_heap(pending.begin(), pending.end(), deeper);
        }
      }
      examined[w] = 1;
    }
    return alive;
  }

 private:
  std::span<const double> row(node_id v, std::size_t l) const { return {rows_.data() + (v * L_ + l) * A_, A_}; }

  void build_spans() {
    hi_.resize(size_ * L_ * A_);
    lo_.resize(size_ * L_ * A_);
    std::copy(rows_.begin(), rows_.end(), hi_.begin());
    std::copy(rows_.begin(), rows_.end(), lo_.begin());
    for (node_id v = static_cast<node_id>(size_); v-- > 1;) {
      const node_id p = trie_.parent(v);
      for (std::size_t j = 0; j < L_ * A_; ++j) {
        hi_[p * L_ * A_ + j] = std::max(hi_[p * L_ * A_ + j], hi_[v * L_ * A_ + j]);
        lo_[p * L_ * A_ + j] = std::min(lo_[p * L_ * A_ + j], lo_[v * L_ * A_ + j]);
      }
    }
  }

  /// Upper bound on M_k{d} over any pair drawn from the subtree of v.
  double spread(node_id v) const {
    std::vector<double> u(L_);
    for (std::size_t l = 0; l < L_; ++l) {
      const double* h = hi_.data() + (v * L_ + l) * A_;
      const double* s = lo_.data() + (v * L_ + l) * A_;
      double acc = 0.0;
      for (std::size_t a = 0; a < A_; ++a) {
        if (cfg_.fam == SetFamily::singletons)
          acc = std::max(acc, h[a] - s[a]);
        else
          acc += h[a] - s[a];
      }
      u[l] = cfg_.fam == SetFamily::singletons ? acc : std::min(1.0, 0.5 * acc);
    }
    return group_norm(u, cfg_.k);
  }

  void build_event_aggregates() {
    S_ = family_size(cfg_.fam, A_);
    plus_.resize(size_ * S_);
    minus_.resize(size_ * S_);
    for (node_id v = 0; v < size_; ++v) {
      auto ev = event_probabilities(row(v, 0), cfg_.fam);
      const double cr = cfg_.c * radius_norm_[v];
      for (std::size_t s = 0; s < S_; ++s) {
        plus_[v * S_ + s] = ev[s] - cr;
        minus_[v * S_ + s] = -ev[s] - cr;
      }
    }
    for (node_id v = static_cast<node_id>(size_); v-- > 1;) {
      const node_id p = trie_.parent(v);
      for (std::size_t s = 0; s < S_; ++s) {
        plus_[p * S_ + s] = std::max(plus_[p * S_ + s], plus_[v * S_ + s]);
        minus_[p * S_ + s] = std::max(minus_[p * S_ + s], minus_[v * S_ + s]);
      }
    }
    aggregates_ = true;
  }

  bool compute_can_remove(node_id w) const {
    const node_id p = trie_.parent(w);
    const double c = cfg_.c;

    if (aggregates_ && !cfg_.restricted_candidates) {
      // With one group, d = sup_S |p̂(S|w') - p̂(S|w'')| and the test separates per S.
      double best = -infinity;
      for (std::size_t s = 0; s < S_; ++s) {
        best = std::max(best, plus_[w * S_ + s] + minus_[p * S_ + s]);
        best = std::max(best, minus_[w * S_ + s] + plus_[p * S_ + s]);
      }
      if (best > 1e-12) return false;
      if (best < -1e-12) return true;
    }

    const node_id w_end = trie_.subtree_end(w);
    const node_id p_end = cfg_.restricted_candidates ? p + 1 : trie_.subtree_end(p);
    const double U = cfg_.restricted_candidates ? infinity : spread(p);
    // conf* is monotone, so R(w) and R(parent(w)) are the smallest radii on each side.
    if (c * (radius_norm_[w] + radius_norm_[p]) >= U) return true;

    std::vector<node_id> left, right;
    for (node_id u = w; u < w_end; ++u)
      if (c * (radius_norm_[u] + radius_norm_[p]) < U) left.push_back(u);
    for (node_id v = p; v < p_end; ++v)
      if (c * (radius_norm_[v] + radius_norm_[w]) < U) right.push_back(v);
    auto by_radius = [&](node_id a, node_id b) { return radius_norm_[a] < radius_norm_[b]; };
    std::sort(left.begin(), left.end(), by_radius);
    std::sort(right.begin(), right.end(), by_radius);
    for (node_id u : left) {
      for (node_id v : right) {
        if (c * (radius_norm_[u] + radius_norm_[v]) >= U) break;
        if (violates(u, v)) return false;
      }
    }
    return true;
  }

  const CountTrie& trie_;
  const RadiusTable& radii_;
  EstimationConfig cfg_;
  std::size_t L_, A_, size_;
  std::vector<double> rows_;
  std::vector<double> radius_norm_;
  std::vector<double> hi_, lo_;
  bool aggregates_ = false;
  std::size_t S_ = 0;
  std::vector<double> plus_, minus_;
  std::vector<std::int8_t> memo_;
};

/// Everything produced by one fit; the trie and radii stay available for diagnostics.
struct Fit {
  CountTrie trie;
  RadiusTable radii;
  std::vector<std::uint8_t> alive;
  ContextTreeModel model;
};

inline ContextTreeModel model_from(const CountTrie& trie, const RadiusTable& radii, const EstimationConfig& cfg,
                                   const std::vector<std::uint8_t>& alive) {
  ContextTreeModel m;
  m.alphabet = trie.alphabet();
  m.config = cfg;
  for (std::size_t l = 0; l < trie.groups(); ++l) m.lengths.push_back(trie.sample().length(l));
  std::set<Context, TreeOrder> shape;
  const std::size_t L = trie.groups();
  const std::size_t A = trie.alphabet_size();
  for (CountTrie::node_id v = 0; v < trie.size(); ++v) {
    if (!alive[v]) continue;
    Context w = trie.context(v);
    NodeEstimate e;
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> p(A);
      trie.empirical(v, l, p);
      e.probs.push_back(std::move(p));
      e.conf.push_back(radii.conf(v, l));
      e.counts.push_back(trie.count_context(v, l));
    }
    shape.insert(w);
    m.nodes.emplace(std::move(w), std::move(e));
  }
  m.shape = TreeShape(std::move(shape));
  m.warnings = trie.warnings();
  m.warnings.insert(m.warnings.end(), radii.warnings().begin(), radii.warnings().end());
  return m;
}

/// PruneTree on an already built trie and radius table.
inline ContextTreeModel prune_tree(const CountTrie& trie, const RadiusTable& radii, const EstimationConfig& cfg) {
  Pruner pruner(trie, radii, cfg);
  return model_from(trie, radii, cfg, pruner.run());
}

inline Fit fit(GroupSample sample, const EstimationConfig& cfg) {
  cfg.validate();
  TrieOptions opt;
  opt.max_depth = cfg.max_depth;
  opt.collapse_unique = cfg.collapse_unique;
  opt.node_budget = cfg.node_budget;
  Fit f{CountTrie::build(std::move(sample), opt), {}, {}, {}};
  f.radii = RadiusTable::build(f.trie, cfg.radius_config());
  Pruner pruner(f.trie, f.radii, cfg);
  f.alive = pruner.run();
  f.model = model_from(f.trie, f.radii, cfg, f.alive);
  return f;
}

/// Adds the missing children of every internal node; new leaves copy their parent's rows.
inline ContextTreeModel complete_model(ContextTreeModel model) {
  const std::size_t A = model.alphabet.size();
  std::vector<std::pair<Context, NodeEstimate>> added;
  for (const auto& w : model.shape.nodes()) {
    const auto kids = model.shape.children(w, A);
    if (kids.empty() || kids.size() == A) continue;
    for (std::size_t a = 0; a < A; ++a) {
      Context child = w.extend_older(static_cast<symbol>(a));
      if (model.shape.contains(child)) continue;
      NodeEstimate e = model.at(w);
      e.synthetic = true;
      e.counts.assign(e.counts.size(), 0);
      added.emplace_back(std::move(child), std::move(e));
    }
  }
  if (added.empty()) {
    model.completed = true;
    return model;
  }
  std::set<Context, TreeOrder> shape = model.shape.nodes();
  for (auto& [w, e] : added) {
    shape.insert(w);
    model.nodes.emplace(w, std::move(e));
  }
  model.shape = TreeShape(std::move(shape));
  model.completed = true;
  return model;
}

/// P̂_n(·|x) = p̂_n(·|T̂_n(x)) for group l; `past` is newest-last.
inline Distribution predict(const ContextTreeModel& model, std::span<const symbol> past, std::size_t l) {
  require(l < model.groups(), "group index out of range");
  for (symbol a : past)
    if (a >= model.alphabet.size()) fail(errc::alphabet_mismatch, "past contains a symbol outside the alphabet");
  const Context t = terminal_node(model.shape, past, model.alphabet.size());
  return Distribution(model.at(t).probs[l], 1e-9);
}

}  // namespace agct
