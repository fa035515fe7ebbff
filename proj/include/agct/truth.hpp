#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "agct/confidence.hpp"
#include "agct/core.hpp"
#include "agct/counting.hpp"
#include "agct/pruning.hpp"
#include "agct/rng.hpp"

namespace agct {

/// Inter-arrival law P(t = k) = 1 / [(2 ln 2 - 1) k (4k^2 - 1)], k >= 1, of a binary renewal
/// process in which each 1 marks a renewal.
class RenewalLaw {
 public:
  static constexpr std::size_t tail_table = std::size_t{1} << 16;
  static constexpr std::size_t age_table = std::size_t{1} << 20;

  RenewalLaw() {
    tail_.resize(tail_table + 1);
    tail_[tail_table] = asymptotic_tail(tail_table);
    for (std::size_t j = tail_table; j-- > 0;) tail_[j] = tail_[j + 1] + term(j + 1);
    // P(A >= j) = 2 Σ_{i >= j} T(i); accumulated backwards from the asymptotic tail mass.
    age_upper_.resize(age_table + 1);
    age_upper_[age_table] = 2.0 * asymptotic_tail_mass(age_table);
    for (std::size_t j = age_table; j-- > 0;) age_upper_[j] = age_upper_[j + 1] + 2.0 * tail_sum(j);
    const double total = age_upper_[0];
    if (std::abs(total - 1.0) > 1e-9)
      fail(errc::convergence, "renewal age law does not normalize: total mass " + std::to_string(total) +
                                  " with truncation at " + std::to_string(age_table));
  }

  static double norm() { return 2.0 * std::log(2.0) - 1.0; }

  double pmf(std::uint64_t k) const {
    require(k >= 1, "inter-arrival times start at 1");
    return term(k) / norm();
  }

  /// P(t > j)
  double survival(std::uint64_t j) const { return tail_sum(j) / norm(); }

  /// P(t = j + 1 | t > j): probability of a 1 after j zeros since the last 1.
  double hazard(std::uint64_t j) const { return term(j + 1) / tail_sum(j); }

  /// E[t] = 1 / (2 (2 ln 2 - 1))
  double mean() const { return 0.5 / norm(); }

  /// P(A = j) = P(t > j) / E[t] for the age A (zeros since the last 1) of the stationary process.
  double age_pmf(std::uint64_t j) const { return 2.0 * tail_sum(j); }

  /// Draws the stationary age by inverting the tabulated upper tail, then the 1/(4j) asymptote.
  std::uint64_t sample_age(Rng& rng) const {
    const double u = 1.0 - rng.uniform();  // in (0, 1]
    if (u <= age_upper_[age_table]) {
      const double j = std::floor(0.25 / u - 0.5);
      return std::max<std::uint64_t>(age_table, static_cast<std::uint64_t>(std::min(j, 0x1.0p62)));
    }
    // largest j with P(A >= j) >= u; age_upper_ is decreasing
    auto it = std::upper_bound(age_upper_.begin(), age_upper_.end(), u, std::greater<double>());
    if (it == age_upper_.begin()) return 0;
    return static_cast<std::uint64_t>(it - age_upper_.begin()) - 1;
  }

  /// sup_{j >= k} h(j); the hazard decreases like 2/j, so only a finite window is scanned.
  double hazard_sup_from(std::uint64_t k) const {
    double best = hazard(k);
    for (std::uint64_t j = k + 1; j < std::max<std::uint64_t>(k + 64, tail_table); ++j) best = std::max(best, hazard(j));
    return best;
  }

 private:
  static double term(std::uint64_t k) {
    const double x = static_cast<double>(k);
    return 1.0 / (x * (4.0 * x * x - 1.0));
  }

  // Σ_{k>j} 1/(k(4k^2-1)) = 1/(8x^2) - 1/(64x^4) + O(x^-6), x = j + 1/2
  static double asymptotic_tail(std::uint64_t j) {
    const double x = static_cast<double>(j) + 0.5;
    const double x2 = x * x;
    return 1.0 / (8.0 * x2) - 1.0 / (64.0 * x2 * x2);
  }

  // Σ_{i>=j} T(i) from the same expansion and ψ'(x) = 1/x + 1/(2x^2) + 1/(6x^3) + ...
  static double asymptotic_tail_mass(std::uint64_t j) {
    const double x = static_cast<double>(j) + 0.5;
    const double tri = 1.0 / x + 0.5 / (x * x) + 1.0 / (6.0 * x * x * x);
    return tri / 8.0 - 1.0 / (192.0 * x * x * x);
  }

  double tail_sum(std::uint64_t j) const { return j < tail_table ? tail_[j] : asymptotic_tail(j); }

  std::vector<double> tail_;
  std::vector<double> age_upper_;
};

/// A process with known conditional laws: a finite complete context tree with per-leaf,
/// per-group distributions, or the binary renewal process.
struct TrueModel {
  enum class Kind { finite, renewal };

  Kind kind = Kind::finite;
  Alphabet alphabet;
  std::string name;
  TreeShape shape;
  /// leaf -> law per group; a single entry is shared by every group
  std::map<Context, std::vector<Distribution>, TreeOrder> laws;
  std::shared_ptr<const RenewalLaw> renewal;

  std::size_t height() const { return kind == Kind::finite ? shape.height() : 0; }

  /// Number of distinct group laws (1 when shared).
  std::size_t law_groups() const {
    if (kind == Kind::renewal || laws.empty()) return 1;
    return laws.begin()->second.size();
  }

  const Distribution& law(const Context& leaf, std::size_t l) const {
    auto it = laws.find(leaf);
    if (it == laws.end()) fail(errc::invalid_argument, "not a leaf of the true tree");
    return it->second.size() == 1 ? it->second[0] : it->second.at(l);
  }

  Distribution renewal_law(std::uint64_t age) const {
    const double h = renewal->hazard(age);
    return Distribution({1.0 - h, h}, 1e-9);
  }

  /// Membership in T*; for the renewal process T* = {0^k} ∪ {10^k}.
  bool in_true_tree(const Context& w) const {
    if (kind == Kind::finite) return shape.contains(w);
    for (std::size_t i = 1; i < w.size(); ++i)
      if (w[i] != 0) return false;
    return true;
  }

  void validate(std::size_t groups) const {
    if (kind == Kind::renewal) {
      require(alphabet.size() == 2 && renewal != nullptr, "renewal model needs a binary alphabet and a law");
      return;
    }
    const std::size_t A = alphabet.size();
    require(shape.is_complete(A), "true tree must be complete");
    const auto leaves = shape.leaves(A);
    require(leaves.size() == laws.size(), "every leaf of the true tree needs a law");
    for (const auto& leaf : leaves) {
      auto it = laws.find(leaf);
      require(it != laws.end(), "missing law for a leaf");
      require(it->second.size() == 1 || it->second.size() == groups, "per-group laws must cover every group");
      for (const auto& d : it->second) require(d.size() == A, "law over the wrong alphabet");
    }
  }
};

inline TrueModel make_finite(Alphabet alphabet, TreeShape shape, std::map<Context, std::vector<Distribution>, TreeOrder> laws,
                             std::string name = "finite") {
  TrueModel m;
  m.kind = TrueModel::Kind::finite;
  m.alphabet = std::move(alphabet);
  m.shape = std::move(shape);
  m.laws = std::move(laws);
  m.name = std::move(name);
  m.validate(m.law_groups());
  return m;
}

/// Binary chain of order 3: p(0 | x) is 3/4 after (x_{-3}, x_{-2}) = (0, 0), 1/4 after (1, 1)
/// and 1/2 otherwise, for either value of x_{-1}.
inline TrueModel make_order3_chain() {
  const auto A = Alphabet::of_size(2);
  auto shape = TreeShape::full(2, 3);
  std::map<Context, std::vector<Distribution>, TreeOrder> laws;
  for (const auto& leaf : shape.leaves(2)) {
    // oldest-first: leaf[0] = x_{-3}, leaf[1] = x_{-2}
    double p0 = 0.5;
    if (leaf[0] == 0 && leaf[1] == 0) p0 = 0.75;
    if (leaf[0] == 1 && leaf[1] == 1) p0 = 0.25;
    laws[leaf] = {Distribution({p0, 1.0 - p0})};
  }
  return make_finite(A, std::move(shape), std::move(laws), "order3");
}

inline TrueModel make_renewal() {
  TrueModel m;
  m.kind = TrueModel::Kind::renewal;
  m.alphabet = Alphabet::of_size(2);
  m.name = "renewal";
  static const auto law = std::make_shared<const RenewalLaw>();
  m.renewal = law;
  return m;
}

/// Depth-1 binary model with agent-specific laws: p_l(1|0) = 0.3 + 0.4 (l-1)/(L-1), p_l(1|1) = high.
inline TrueModel make_heterogeneous_depth1(std::size_t groups, double high = 0.8) {
  require(groups >= 2, "heterogeneous population needs at least two agents");
  std::map<Context, std::vector<Distribution>, TreeOrder> laws;
  for (std::size_t l = 0; l < groups; ++l) {
    const double p = 0.3 + 0.4 * static_cast<double>(l) / static_cast<double>(groups - 1);
    laws[Context{0}].push_back(Distribution({1.0 - p, p}));
    laws[Context{1}].push_back(Distribution({1.0 - high, high}));
  }
  return make_finite(Alphabet::of_size(2), TreeShape::full(2, 1), std::move(laws), "heterogeneous");
}

/// Order-h embedding of a finite model: windows of h symbols (oldest is the least significant
/// digit) and the leaf each window resolves to.
class WindowChain {
 public:
  explicit WindowChain(const TrueModel& m, std::size_t budget = 1u << 22) : model_(&m) {
    require(m.kind == TrueModel::Kind::finite, "window chain needs a finite model");
    A_ = m.alphabet.size();
    h_ = std::max<std::size_t>(m.height(), 1);
    states_ = 1;
    for (std::size_t i = 0; i < h_; ++i) {
      states_ *= A_;
      if (states_ > budget) fail(errc::budget_exceeded, "true model has too many windows to simulate");
    }
    top_ = states_ / A_;
    leaves_ = m.shape.leaves(A_);
    std::map<Context, std::uint32_t, TreeOrder> index;
    for (std::uint32_t i = 0; i < leaves_.size(); ++i) index[leaves_[i]] = i;
    leaf_of_.resize(states_);
    std::vector<symbol> w(h_);
    for (std::size_t s = 0; s < states_; ++s) {
      decode(s, w);
      leaf_of_[s] = index.at(terminal_node(m.shape, w, A_));
    }
  }

  std::size_t order() const noexcept { return h_; }
  std::size_t states() const noexcept { return states_; }
  std::size_t shift(std::size_t s, symbol a) const { return s / A_ + a * top_; }
  const Context& leaf(std::size_t s) const { return leaves_[leaf_of_[s]]; }

  void decode(std::size_t s, std::vector<symbol>& w) const {
    w.resize(h_);
    for (std::size_t i = 0; i < h_; ++i) {
      w[i] = static_cast<symbol>(s % A_);
      s /= A_;
    }
  }

  std::size_t encode(std::span<const symbol> w) const {
    require(w.size() >= h_, "window shorter than the chain order");
    std::size_t s = 0;
    for (std::size_t i = h_; i-- > 0;) s = s * A_ + w[w.size() - h_ + i];
    return s;
  }

  /// Stationary law of group l over windows.
  std::vector<double> stationary(std::size_t l) const {
    const auto S = static_cast<Eigen::Index>(states_);
    if (states_ <= 2048) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(S, S);
      for (std::size_t s = 0; s < states_; ++s) {
        const auto& p = model_->law(leaf(s), l);
        for (std::size_t a = 0; a < A_; ++a)
          M(static_cast<Eigen::Index>(shift(s, static_cast<symbol>(a))), static_cast<Eigen::Index>(s)) += p[a];
      }
      M -= Eigen::MatrixXd::Identity(S, S);
      M.row(S - 1).setOnes();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
      rhs(S - 1) = 1.0;
      Eigen::VectorXd pi = M.fullPivLu().solve(rhs);
      std::vector<double> out(pi.data(), pi.data() + S);
      for (double& v : out) {
        if (!(v > -1e-12)) fail(errc::convergence, "stationary law solve failed (reducible chain?)");
        v = std::max(v, 0.0);
      }
      return out;
    }
    // large state spaces: damped power iteration to 1e-13
    std::vector<double> pi(states_, 1.0 / static_cast<double>(states_)), next(states_);
    for (int it = 0; it < 1000000; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t s = 0; s < states_; ++s) {
        const auto& p = model_->law(leaf(s), l);
        for (std::size_t a = 0; a < A_; ++a) next[shift(s, static_cast<symbol>(a))] += 0.5 * pi[s] * p[a];
      }
      double diff = 0.0;
      for (std::size_t s = 0; s < states_; ++s) {
        next[s] += 0.5 * pi[s];
        diff = std::max(diff, std::abs(next[s] - pi[s]));
      }
      pi.swap(next);
      if (diff < 1e-13) return pi;
    }
    fail(errc::convergence, "stationary power iteration did not converge");
  }

 private:
  const TrueModel* model_;
  std::size_t A_ = 0, h_ = 0, states_ = 0, top_ = 0;
  std::vector<Context> leaves_;
  std::vector<std::uint32_t> leaf_of_;
};

/// A simulated sample together with the true conditional law at every position.
struct Simulation {
  GroupSample sample;
  /// conditionals[l][i * |A| + a] = P(X_{i+1} = a | past up to X_i), i = 0..n
  std::vector<std::vector<double>> conditionals;
  /// finite models: the stationary window drawn before X_1 (newest-last)
  std::vector<std::vector<symbol>> warmup;
  /// renewal: zeros since the last 1 just before X_1
  std::vector<std::uint64_t> initial_age;
};

/// L independent stationary sequences of length n; group l uses replication_seed(seed, l).
inline Simulation simulate(const TrueModel& model, std::size_t n, std::size_t groups, std::uint64_t seed) {
  require(n >= 1, "simulate needs n >= 1");
  require(groups >= 1, "simulate needs at least one group");
  model.validate(groups);
  const std::size_t A = model.alphabet.size();
  Simulation sim;
  sim.sample.alphabet = model.alphabet;
  sim.sample.sequences.resize(groups);
  sim.conditionals.resize(groups);
  if (model.kind == TrueModel::Kind::renewal) {
    sim.initial_age.resize(groups);
    for (std::size_t l = 0; l < groups; ++l) {
      Rng rng(replication_seed(seed, l));
      auto& x = sim.sample.sequences[l];
      auto& cond = sim.conditionals[l];
      x.resize(n);
      cond.resize((n + 1) * 2);
      std::uint64_t age = model.renewal->sample_age(rng);
      sim.initial_age[l] = age;
      for (std::size_t i = 0; i <= n; ++i) {
        const double h = model.renewal->hazard(age);
        cond[2 * i] = 1.0 - h;
        cond[2 * i + 1] = h;
        if (i == n) break;
        const bool one = rng.uniform() < h;
        x[i] = one ? 1 : 0;
        age = one ? 0 : age + 1;
      }
    }
    return sim;
  }
  WindowChain chain(model);
  sim.warmup.resize(groups);
  std::vector<double> pi;
  for (std::size_t l = 0; l < groups; ++l) {
    if (l == 0 || model.law_groups() > 1) pi = chain.stationary(l);
    Rng rng(replication_seed(seed, l));
    std::size_t s = rng.categorical(pi);
    chain.decode(s, sim.warmup[l]);
    std::vector<const Distribution*> law(chain.states());
    for (std::size_t t = 0; t < chain.states(); ++t) law[t] = &model.law(chain.leaf(t), l);
    auto& x = sim.sample.sequences[l];
    auto& cond = sim.conditionals[l];
    x.resize(n);
    cond.resize((n + 1) * A);
    for (std::size_t i = 0; i <= n; ++i) {
      const auto& p = *law[s];
      for (std::size_t a = 0; a < A; ++a) cond[i * A + a] = p[a];
      if (i == n) break;
      const auto a = static_cast<symbol>(rng.categorical(p));
      x[i] = a;
      s = chain.shift(s, a);
    }
  }
  return sim;
}

/// Exact p_l(·|x) for a past given newest-last.
inline Distribution true_prob(const TrueModel& model, std::span<const symbol> past, std::size_t l = 0) {
  for (symbol a : past)
    if (a >= model.alphabet.size()) fail(errc::alphabet_mismatch, "past contains a symbol outside the alphabet");
  if (model.kind == TrueModel::Kind::finite) return model.law(terminal_node(model.shape, past, model.alphabet.size()), l);
  std::uint64_t age = 0;
  for (auto it = past.rbegin(); it != past.rend(); ++it, ++age)
    if (*it == 1) return model.renewal_law(age);
  fail(errc::insufficient_history, "renewal past has no 1; supply the age instead");
}

/// p̄_{n,l}(·|w) for every group by a direct scan of the sample; uniform when some group never
/// sees w followed by a symbol.
inline std::vector<std::vector<double>> oracle_rows(const Simulation& sim, const Context& w) {
  const std::size_t L = sim.sample.groups();
  const std::size_t A = sim.sample.alphabet.size();
  std::vector<std::vector<double>> rows(L, std::vector<double>(A, 0.0));
  std::vector<std::uint64_t> counts(L, 0);
  const auto ws = w.symbols();
  for (std::size_t l = 0; l < L; ++l) {
    const auto& x = sim.sample.sequences[l];
    const std::size_t n = x.size();
    for (std::size_t i = std::max<std::size_t>(w.size(), 1); i + 1 <= n; ++i) {
      if (!std::equal(ws.begin(), ws.end(), x.begin() + static_cast<std::ptrdiff_t>(i - w.size()))) continue;
      ++counts[l];
      for (std::size_t a = 0; a < A; ++a) rows[l][a] += sim.conditionals[l][i * A + a];
    }
  }
  const bool seen = *std::min_element(counts.begin(), counts.end()) > 0;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t a = 0; a < A; ++a)
      rows[l][a] = seen ? rows[l][a] / static_cast<double>(counts[l]) : 1.0 / static_cast<double>(A);
  return rows;
}

inline Distribution oracle_prob(const Simulation& sim, const Context& w, std::size_t l) {
  require(l < sim.sample.groups(), "group index out of range");
  return Distribution(oracle_rows(sim, w)[l], 1e-9);
}

/// p̄ at every explicit trie node, node-major [v][l][a].
inline std::vector<double> oracle_table(const CountTrie& trie, const Simulation& sim) {
  const std::size_t L = trie.groups();
  const std::size_t A = trie.alphabet_size();
  auto acc = trie.accumulate(sim.conditionals, A);
  for (CountTrie::node_id v = 0; v < trie.size(); ++v) {
    const bool seen = trie.visible(v);
    for (std::size_t l = 0; l < L; ++l) {
      double* row = acc.data() + (v * L + l) * A;
      const double N = trie.count_context(v, l);
      for (std::size_t a = 0; a < A; ++a) row[a] = seen ? row[a] / N : 1.0 / static_cast<double>(A);
    }
  }
  return acc;
}

/// The true laws p_l(·|z) over pasts z extending w, as a finite set whose convex hull covers them.
inline std::vector<Distribution> compatible_laws(const TrueModel& model, const Context& w, std::size_t l) {
  std::vector<Distribution> out;
  if (model.kind == TrueModel::Kind::finite) {
    const std::size_t A = model.alphabet.size();
    for (const auto& leaf : model.shape.leaves(A))
      if (leaf.is_suffix_of(w) || w.is_suffix_of(leaf)) out.push_back(model.law(leaf, l));
    return out;
  }
  // age = trailing zeros of w when w holds a 1; otherwise any age >= |w| (and the h -> 0 limit)
  std::size_t zeros = 0;
  while (zeros < w.size() && w[w.size() - 1 - zeros] == 0) ++zeros;
  if (zeros < w.size()) {
    out.push_back(model.renewal_law(zeros));
    return out;
  }
  const double hmax = model.renewal->hazard_sup_from(w.size());
  out.push_back(Distribution({1.0 - hmax, hmax}, 1e-9));
  out.push_back(Distribution({1.0, 0.0}));
  return out;
}

/// c_w = M_k over groups of sup_{z ⪰ w} d(p_l(·|z), p̄_l(·|w)), pasts chosen per group.
inline double approx_error(const TrueModel& model, const std::vector<std::vector<double>>& pbar, const Context& w,
                           SetFamily fam, double k) {
  std::vector<double> per(pbar.size(), 0.0);
  for (std::size_t l = 0; l < pbar.size(); ++l)
    for (const auto& p : compatible_laws(model, w, l)) per[l] = std::max(per[l], metric_distance(p.probs(), pbar[l], fam));
  return group_norm(per, k);
}

inline double approx_error(const TrueModel& model, const Simulation& sim, const Context& w, SetFamily fam, double k) {
  return approx_error(model, oracle_rows(sim, w), w, fam, k);
}

/// c̄_w = R_k over groups of sup over pairs of pasts extending w of d(p_l(·|x), p_l(·|y)).
inline double approx_error_bar(const TrueModel& model, const Context& w, std::size_t groups, SetFamily fam, double k) {
  std::vector<double> per(groups, 0.0);
  for (std::size_t l = 0; l < groups; ++l) {
    const auto laws = compatible_laws(model, w, l);
    for (std::size_t i = 0; i < laws.size(); ++i)
      for (std::size_t j = i + 1; j < laws.size(); ++j) per[l] = std::max(per[l], metric_distance(laws[i], laws[j], fam));
  }
  return group_norm(per, k);
}

/// A complete tree minimizing the largest leaf score, with leximax tie-breaking.
struct OracleTree {
  TreeShape tree;
  double value = 0.0;
  /// leaf scores, sorted in decreasing order
  std::vector<double> profile;
};

namespace detail {

/// Leximax order on decreasing score profiles; a missing entry ranks below any score.
inline int compare_profiles(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] < b[i]) return -1;
    if (a[i] > b[i]) return 1;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

inline bool nodes_less(const TreeShape& a, const TreeShape& b) {
  return std::lexicographical_compare(a.nodes().begin(), a.nodes().end(), b.nodes().begin(), b.nodes().end(), TreeOrder{});
}

inline bool better(const OracleTree& a, const OracleTree& b) {
  const int c = compare_profiles(a.profile, b.profile);
  if (c != 0) return c < 0;
  return nodes_less(a.tree, b.tree);
}

inline OracleTree finish(std::set<Context, TreeOrder> nodes, std::vector<double> profile) {
  std::sort(profile.begin(), profile.end(), std::greater<double>());
  OracleTree t{TreeShape(std::move(nodes)), profile.front(), std::move(profile)};
  return t;
}

}  // namespace detail

using LeafScore = std::function<double(const Context&)>;

/// Exhaustive search over all complete trees of depth <= max_depth.
inline OracleTree oracle_tree_exhaustive(std::size_t alphabet_size, std::size_t max_depth, const LeafScore& score,
                                         std::size_t budget = 1'000'000) {
  double count = 1.0;
  for (std::size_t d = 0; d < max_depth; ++d) {
    count = 1.0 + std::pow(count, static_cast<double>(alphabet_size));
    if (count > static_cast<double>(budget)) fail(errc::budget_exceeded, "too many complete trees to enumerate");
  }
  std::map<Context, double, TreeOrder> cache;
  auto g = [&](const Context& w) {
    auto it = cache.find(w);
    if (it == cache.end()) it = cache.emplace(w, score(w)).first;
    return it->second;
  };
  // each tree is its list of leaves; expand subtrees recursively
  std::function<std::vector<std::vector<Context>>(const Context&, std::size_t)> trees = [&](const Context& w, std::size_t left) {
    std::vector<std::vector<Context>> out{{w}};
    if (left == 0) return out;
    std::vector<std::vector<Context>> acc{{}};
    for (std::size_t a = 0; a < alphabet_size; ++a) {
      auto sub = trees(w.extend_older(static_cast<symbol>(a)), left - 1);
      std::vector<std::vector<Context>> next;
      for (const auto& p : acc)
        for (const auto& s : sub) {
          auto q = p;
          q.insert(q.end(), s.begin(), s.end());
          next.push_back(std::move(q));
        }
      acc = std::move(next);
    }
    out.insert(out.end(), acc.begin(), acc.end());
    return out;
  };
  std::optional<OracleTree> best;
  for (const auto& leaves : trees(Context{}, max_depth)) {
    std::vector<double> profile;
    std::set<Context, TreeOrder> nodes;
    for (const auto& v : leaves) {
      profile.push_back(g(v));
      for (std::size_t len = 0; len <= v.size(); ++len) nodes.insert(v.suffix(len));
    }
    auto cand = detail::finish(std::move(nodes), std::move(profile));
    if (!best || detail::better(cand, *best)) best = std::move(cand);
  }
  return *best;
}

/// Bottom-up solver: each subtree keeps its own leximax-best completion.
inline OracleTree oracle_tree_dp(std::size_t alphabet_size, std::size_t max_depth, const LeafScore& score) {
  struct Partial {
    std::set<Context, TreeOrder> nodes;
    std::vector<double> profile;
  };
  auto better = [](const Partial& x, const Partial& y) {
    const int c = detail::compare_profiles(x.profile, y.profile);
    if (c != 0) return c < 0;
    return std::lexicographical_compare(x.nodes.begin(), x.nodes.end(), y.nodes.begin(), y.nodes.end(), TreeOrder{});
  };
  std::function<Partial(const Context&, std::size_t)> solve = [&](const Context& w, std::size_t left) {
    Partial leaf{{w}, {score(w)}};
    if (left == 0) return leaf;
    Partial split{{w}, {}};
    for (std::size_t a = 0; a < alphabet_size; ++a) {
      auto sub = solve(w.extend_older(static_cast<symbol>(a)), left - 1);
      split.nodes.insert(sub.nodes.begin(), sub.nodes.end());
      split.profile.insert(split.profile.end(), sub.profile.begin(), sub.profile.end());
    }
    std::sort(split.profile.begin(), split.profile.end(), std::greater<double>());
    return better(split, leaf) ? split : leaf;
  };
  auto best = solve(Context{}, max_depth);
  return detail::finish(std::move(best.nodes), std::move(best.profile));
}

/// Everything needed to evaluate oracle quantities on one fitted replication.
class OracleView {
 public:
  OracleView(const TrueModel& model, const Simulation& sim, const Fit& fit)
      : model_(model), sim_(sim), fit_(fit), cfg_(fit.model.config), table_(oracle_table(fit.trie, sim)) {}

  const std::vector<double>& table() const noexcept { return table_; }

  std::vector<std::vector<double>> pbar(const Context& w) const {
    if (auto v = fit_.trie.find(w)) {
      const std::size_t L = fit_.trie.groups(), A = fit_.trie.alphabet_size();
      std::vector<std::vector<double>> rows(L);
      for (std::size_t l = 0; l < L; ++l) {
        const double* r = table_.data() + (*v * L + l) * A;
        rows[l].assign(r, r + A);
      }
      return rows;
    }
    return oracle_rows(sim_, w);
  }

  double c(const Context& w) const { return approx_error(model_, pbar(w), w, cfg_.fam, cfg_.k); }

  std::vector<double> conf(const Context& w) const { return fit_.radii.conf_of(fit_.trie, w); }

  /// c_w + R_r{conf(w)}
  double score(const Context& w) const { return c(w) + group_norm(conf(w), cfg_.r); }

  OracleTree oracle_tree(std::size_t max_depth) const {
    return oracle_tree_exhaustive(fit_.trie.alphabet_size(), max_depth, [this](const Context& w) { return score(w); });
  }

 private:
  const TrueModel& model_;
  const Simulation& sim_;
  const Fit& fit_;
  EstimationConfig cfg_;
  std::vector<double> table_;
};

/// Good_m: ‖d_l(p̄, p̂)/conf_l‖_{L,m} <= 1 at every visible context. Contexts inside a collapsed
/// node share its single occurrence per group, so explicit nodes cover E_n.
inline bool check_good(const CountTrie& trie, const std::function<double(CountTrie::node_id, std::size_t)>& conf,
                       const std::vector<double>& pbar, SetFamily fam, double m) {
  const std::size_t L = trie.groups(), A = trie.alphabet_size();
  std::vector<double> phat(A), ratio(L);
  for (CountTrie::node_id v = 0; v < trie.size(); ++v) {
    if (!trie.visible(v)) continue;
    for (std::size_t l = 0; l < L; ++l) {
      trie.empirical(v, l, phat);
      const std::span<const double> pb(pbar.data() + (v * L + l) * A, A);
      ratio[l] = metric_distance(pb, phat, fam) / conf(v, l);
    }
    if (group_norm(ratio, m) > 1.0 + 1e-12) return false;
  }
  return true;
}

inline bool check_good(const CountTrie& trie, const RadiusTable& radii, const std::vector<double>& pbar, SetFamily fam,
                       double m) {
  return check_good(trie, [&](CountTrie::node_id v, std::size_t l) { return radii.conf(v, l); }, pbar, fam, m);
}

/// Outcome of the conditional-theorem checks on one replication.
struct TheoremReport {
  bool good = false;
  bool subset_ok = true;
  /// the radius and oracle inequalities were evaluated (finite truth, c > 1, small trees)
  bool evaluated = false;
  bool radius_ok = true;
  bool oracle_ok = true;
  /// largest LHS - RHS seen (<= 0 when the bound holds)
  double radius_gap = -infinity;
  double oracle_gap = -infinity;
  std::size_t pasts = 0;
  OracleTree oracle;
};

inline TheoremReport check_theorems(const TrueModel& model, const Simulation& sim, const Fit& fit,
                                    std::size_t oracle_depth = 3, double m = std::numeric_limits<double>::quiet_NaN()) {
  const auto& cfg = fit.model.config;
  const std::size_t A = fit.trie.alphabet_size();
  const std::size_t L = fit.trie.groups();
  OracleView view(model, sim, fit);
  TheoremReport rep;
  rep.good = check_good(fit.trie, fit.radii, view.table(), cfg.fam, std::isnan(m) ? cfg.m : m);
  for (const auto& w : fit.model.shape.nodes())
    if (!model.in_true_tree(w)) rep.subset_ok = false;
  const std::size_t H = std::max({fit.model.shape.height(), oracle_depth, model.height()}) + 1;
  if (model.kind != TrueModel::Kind::finite || cfg.c <= 1.0 || H > 16) return rep;
  rep.evaluated = true;
  rep.oracle = view.oracle_tree(oracle_depth);
  const auto& T = rep.oracle.tree;
  std::map<Context, std::pair<double, double>, TreeOrder> leaf_terms;  // c, R_r(conf)
  for (const auto& u : T.leaves(A)) leaf_terms[u] = {view.c(u), group_norm(view.conf(u), cfg.r)};
  std::map<Context, std::vector<std::vector<double>>, TreeOrder> pbar_of;
  for (const auto& u : T.leaves(A)) pbar_of[u] = view.pbar(u);
  const double c = cfg.c;
  std::size_t total = 1;
  for (std::size_t i = 0; i < H; ++i) total *= A;
  std::vector<symbol> x(H);
  std::vector<double> d1(L), d2(L);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t s = code;
    for (std::size_t i = 0; i < H; ++i) {
      x[i] = static_cast<symbol>(s % A);
      s /= A;
    }
    const Context that = terminal_node(fit.model.shape, x, A);
    const Context u = terminal_node(T, x, A);
    const auto& est = fit.model.at(that);
    const auto [cu, Ru] = leaf_terms.at(u);
    // radius bound
    const double Rhat = group_norm(est.conf, cfg.r);
    const double rhs33 = std::max(Ru, 2.0 * cu / (c - 1.0) - Ru);
    rep.radius_gap = std::max(rep.radius_gap, Rhat - rhs33);
    // oracle inequality, both the p̄ and the p forms
    const auto& pb = pbar_of.at(u);
    for (std::size_t l = 0; l < L; ++l) {
      const Distribution p = true_prob(model, x, l);
      d1[l] = metric_distance(std::span<const double>(est.probs[l]), pb[l], cfg.fam);
      d2[l] = metric_distance(std::span<const double>(est.probs[l]), p.probs(), cfg.fam);
    }
    const double slack = std::max((1.0 + 2.0 * c) * Ru, (c + 1.0) / (c - 1.0) * cu);
    rep.oracle_gap = std::max({rep.oracle_gap, group_norm(d1, cfg.k) - slack, group_norm(d2, cfg.k) - (cu + slack)});
    ++rep.pasts;
  }
  rep.radius_ok = rep.radius_gap <= 1e-12;
  rep.oracle_ok = rep.oracle_gap <= 1e-12;
  return rep;
}

struct StudyConfig {
  TrueModel model;
  std::size_t n = 1000;
  std::size_t groups = 1;
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  EstimationConfig estimation{};
  /// rows of the selection table; empty picks the default rows of the model
  std::vector<Context> tracked;
  /// exponent of the Good event; NaN uses estimation.m
  double good_m = std::numeric_limits<double>::quiet_NaN();
  bool theorems = false;
  std::size_t oracle_depth = 3;
  std::size_t threads = 1;

  void validate() const {
    require(replications >= 1, "a study needs at least one replication");
    require(n >= 1 && groups >= 1, "a study needs n >= 1 and at least one group");
    estimation.validate();
    model.validate(groups);
  }
};

/// Table rows: the true tree to depth 3 for finite models, 0^k / 10^k up to depth 8 for renewal.
inline std::vector<Context> default_tracked(const TrueModel& model) {
  std::vector<Context> rows;
  if (model.kind == TrueModel::Kind::renewal) {
    for (std::size_t d = 8; d >= 1; --d) {
      std::vector<symbol> z(d, 0);
      rows.emplace_back(z);
      z[0] = 1;
      rows.emplace_back(z);
    }
    rows.emplace_back();
    return rows;
  }
  std::vector<Context> nodes(model.shape.nodes().begin(), model.shape.nodes().end());
  std::stable_sort(nodes.begin(), nodes.end(), [](const Context& a, const Context& b) { return a.size() > b.size(); });
  for (const auto& w : nodes)
    if (w.size() <= 3) rows.push_back(w);
  return rows;
}

struct ReplicationOutcome {
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> selected;
  std::size_t tree_size = 0;
  std::size_t height = 0;
  /// nodes of the estimate outside the true tree
  std::size_t extra = 0;
  /// nodes inside the true tree but not among the tracked rows
  std::size_t others = 0;
  bool good = false;
  std::optional<TheoremReport> theorems;
  double seconds = 0.0;
};

struct StudyReport {
  std::string model;
  std::size_t n = 0, groups = 0, replications = 0;
  std::uint64_t seed = 0;
  double c = 0.0;
  std::vector<Context> tracked;
  std::vector<double> frequency;
  double mean_extra = 0.0;
  double mean_others = 0.0;
  double good_frequency = 0.0;
  std::size_t theorem_runs = 0;
  std::size_t subset_violations = 0, radius_violations = 0, oracle_violations = 0;
  std::vector<ReplicationOutcome> runs;
  double seconds = 0.0;
};

inline ReplicationOutcome run_replication(const StudyConfig& cfg, const std::vector<Context>& tracked, std::size_t rep) {
  const auto t0 = std::chrono::steady_clock::now();
  ReplicationOutcome out;
  out.seed = replication_seed(cfg.seed, rep);
  const Simulation sim = simulate(cfg.model, cfg.n, cfg.groups, out.seed);
  const Fit f = fit(sim.sample, cfg.estimation);
  const auto& shape = f.model.shape;
  for (const auto& w : tracked) out.selected.push_back(shape.contains(w) ? 1 : 0);
  std::set<Context, TreeOrder> rows(tracked.begin(), tracked.end());
  for (const auto& w : shape.nodes()) {
    if (!cfg.model.in_true_tree(w))
      ++out.extra;
    else if (!rows.count(w))
      ++out.others;
  }
  out.tree_size = shape.size();
  out.height = shape.height();
  const double m = std::isnan(cfg.good_m) ? cfg.estimation.m : cfg.good_m;
  if (cfg.theorems) {
    out.theorems = check_theorems(cfg.model, sim, f, cfg.oracle_depth, m);
    out.good = out.theorems->good;
  } else {
    OracleView view(cfg.model, sim, f);
    out.good = check_good(f.trie, f.radii, view.table(), cfg.estimation.fam, m);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Monte Carlo selection study; replications run on `threads` workers and are reduced in order.
inline StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  StudyReport rep;
  rep.model = cfg.model.name;
  rep.n = cfg.n;
  rep.groups = cfg.groups;
  rep.replications = cfg.replications;
  rep.seed = cfg.seed;
  rep.c = cfg.estimation.c;
  rep.tracked = cfg.tracked.empty() ? default_tracked(cfg.model) : cfg.tracked;
  rep.runs.resize(cfg.replications);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.replications; i = next++) {
      try {
        rep.runs[i] = run_replication(cfg, rep.tracked, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, cfg.replications));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  rep.frequency.assign(rep.tracked.size(), 0.0);
  const double R = static_cast<double>(cfg.replications);
  for (const auto& run : rep.runs) {
    for (std::size_t j = 0; j < rep.tracked.size(); ++j) rep.frequency[j] += run.selected[j] / R;
    rep.mean_extra += static_cast<double>(run.extra) / R;
    rep.mean_others += static_cast<double>(run.others) / R;
    rep.good_frequency += run.good / R;
    if (run.theorems && run.good) {
      ++rep.theorem_runs;
      rep.subset_violations += !run.theorems->subset_ok;
      rep.radius_violations += run.theorems->evaluated && !run.theorems->radius_ok;
      rep.oracle_violations += run.theorems->evaluated && !run.theorems->oracle_ok;
    }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace agct
