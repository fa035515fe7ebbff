#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agct/core.hpp"

namespace agct {

/// L sequences over a shared alphabet, X_1^{n_l}(l) stored 0-based.
struct GroupSample {
  Alphabet alphabet;
  std::vector<std::vector<symbol>> sequences;

  std::size_t groups() const noexcept { return sequences.size(); }
  std::size_t length(std::size_t group) const { return sequences.at(group).size(); }

  std::size_t max_length() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n = std::max(n, s.size());
    return n;
  }

  void validate() const {
    require(!sequences.empty(), "a sample needs at least one group");
    for (std::size_t l = 0; l < sequences.size(); ++l) {
      require(!sequences[l].empty(), "group " + std::to_string(l) + " is empty");
      for (symbol a : sequences[l])
        if (a >= alphabet.size())
          fail(errc::alphabet_mismatch, "group " + std::to_string(l) + " contains a symbol outside the alphabet");
    }
  }
};

struct TrieOptions {
  /// Deepest context materialized. Unbounded when empty.
  std::optional<std::size_t> max_depth;
  /// Stop expanding a node once every group has exactly one context occurrence.
  /// All deeper extensions of such a node carry identical counts, so they are left implicit.
  bool collapse_unique = true;
  /// Soft node budget; exceeding it records a warning, ten times it aborts.
  std::size_t node_budget = 10'000'000;
};

/// Suffix trie of the visible contexts E_n = {w : min_l N_{n-1,l}(w) > 0} with per-group counts.
///
/// An occurrence of w "ends at i" when X_{i-|w|+1..i} = w, so
///   N_{n,l}(w)   = #{ i <= n   : w ends at i },
///   N_{n-1,l}(w) = #{ i <= n-1 : w ends at i },
/// and N_{n,l}(wa) is stored as the next-symbol count of w, which makes
/// sum_a N_{n,l}(wa) = N_{n-1,l}(w) exact.
///
/// Nodes are numbered in preorder (children by increasing symbol), so the subtree of
/// node v is the contiguous id range [v, subtree_end(v)).
class CountTrie {
 public:
  using node_id = std::uint32_t;
  static constexpr node_id npos = ~node_id{0};
  static constexpr node_id root = 0;

  static CountTrie build(GroupSample sample, TrieOptions options = {}) {
    sample.validate();
    if (options.max_depth) require(*options.max_depth > 0, "max_depth must be positive");
    CountTrie t;
    t.sample_ = std::make_shared<const GroupSample>(std::move(sample));
    t.options_ = options;
    t.alphabet_size_ = t.sample_->alphabet.size();
    t.groups_ = t.sample_->groups();
    t.build_nodes();
    return t;
  }

  const GroupSample& sample() const noexcept { return *sample_; }
  const Alphabet& alphabet() const noexcept { return sample_->alphabet; }
  std::size_t alphabet_size() const noexcept { return alphabet_size_; }
  std::size_t groups() const noexcept { return groups_; }
  std::size_t size() const noexcept { return parent_.size(); }
  const TrieOptions& options() const noexcept { return options_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  node_id parent(node_id v) const { return parent_[v]; }
  std::size_t depth(node_id v) const { return depth_[v]; }
  node_id child(node_id v, symbol a) const { return child_[v * alphabet_size_ + a]; }
  node_id subtree_end(node_id v) const { return end_[v]; }
  bool collapsed(node_id v) const { return collapsed_[v] != 0; }

  bool is_leaf(node_id v) const {
    for (std::size_t a = 0; a < alphabet_size_; ++a)
      if (child_[v * alphabet_size_ + a] != npos) return false;
    return true;
  }

  /// N_{n-1,l}(w)
  std::uint32_t count_context(node_id v, std::size_t l) const { return ctx_[v * groups_ + l]; }
  /// N_{n,l}(w)
  std::uint32_t count_full(node_id v, std::size_t l) const { return full_[v * groups_ + l]; }
  /// N_{n,l}(wa)
  std::uint32_t count_next(node_id v, std::size_t l, symbol a) const {
    return next_[(v * groups_ + l) * alphabet_size_ + a];
  }

  bool visible(node_id v) const {
    for (std::size_t l = 0; l < groups_; ++l)
      if (count_context(v, l) == 0) return false;
    return true;
  }

  /// p̂_{n,l}(·|w) written into `out` (|A| entries).
  void empirical(node_id v, std::size_t l, std::span<double> out) const {
    if (!visible(v)) {
      std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(alphabet_size_));
      return;
    }
    const double inv = 1.0 / static_cast<double>(count_context(v, l));
    for (std::size_t a = 0; a < alphabet_size_; ++a) out[a] = count_next(v, l, static_cast<symbol>(a)) * inv;
  }

  Context context(node_id v) const {
    std::vector<symbol> s;
    while (v != root) {
      s.push_back(sym_[v]);
      v = parent_[v];
    }
    return Context(std::move(s));
  }

  std::optional<node_id> find(const Context& w) const {
    node_id v = root;
    for (std::size_t k = w.size(); k-- > 0;) {
      v = child(v, w[k]);
      if (v == npos) return std::nullopt;
    }
    return v;
  }

  struct Counts {
    std::uint64_t full = 0;
    std::uint64_t context = 0;
    std::vector<std::uint64_t> next;
  };

  /// Exact counts for any context, explicit or not.
  Counts counts(const Context& w, std::size_t l) const {
    require(l < groups_, "group index out of range");
    Counts c;
    c.next.assign(alphabet_size_, 0);
    if (auto v = find(w)) {
      c.full = count_full(*v, l);
      c.context = count_context(*v, l);
      for (std::size_t a = 0; a < alphabet_size_; ++a) c.next[a] = count_next(*v, l, static_cast<symbol>(a));
      return c;
    }
    const auto& x = sample_->sequences[l];
    const std::size_t n = x.size();
    const std::size_t len = w.size();
    auto ws = w.symbols();
    for (std::size_t i = std::max<std::size_t>(len, 1); i <= n; ++i) {
      if (!std::equal(ws.begin(), ws.end(), x.begin() + static_cast<std::ptrdiff_t>(i - len))) continue;
      ++c.full;
      if (i <= n - 1) {
        ++c.context;
        ++c.next[x[i]];
      }
    }
    return c;
  }

  bool visible(const Context& w) const {
    for (std::size_t l = 0; l < groups_; ++l)
      if (counts(w, l).context == 0) return false;
    return true;
  }

  /// Sums `values[l][i * width + j]` over every context occurrence ending at i <= n_l - 1,
  /// for every explicit node. Returns a node-major array of size() * groups() * width.
  std::vector<double> accumulate(const std::vector<std::vector<double>>& values, std::size_t width) const {
    require(values.size() == groups_, "accumulate needs one value table per group");
    std::vector<double> acc(size() * groups_ * width, 0.0);
    for (std::size_t l = 0; l < groups_; ++l) {
      const auto& x = sample_->sequences[l];
      const std::size_t n = x.size();
      require(values[l].size() >= (n + 1) * width, "value table too short");
      for (std::size_t i = 1; i + 1 <= n; ++i) {
        const double* src = values[l].data() + i * width;
        node_id v = root;
        std::size_t d = 0;
        while (true) {
          double* dst = acc.data() + (v * groups_ + l) * width;
          for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
          if (i <= d) break;
          v = child(v, x[i - d - 1]);
          if (v == npos) break;
          ++d;
        }
      }
    }
    return acc;
  }

 private:
  CountTrie() = default;

  struct Frame {
    node_id parent;
    symbol sym;
    std::uint32_t depth;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;
  };

  void build_nodes() {
    const std::size_t A = alphabet_size_;
    const std::size_t L = groups_;
    const auto& seqs = sample_->sequences;

    // pos[l] holds 1-based ending indices; each frame owns a contiguous range per group.
    std::vector<std::vector<std::uint32_t>> pos(L);
    std::vector<std::vector<std::uint32_t>> scratch(L);
    Frame top{npos, 0, 0, {}};
    for (std::size_t l = 0; l < L; ++l) {
      const auto n = static_cast<std::uint32_t>(seqs[l].size());
      pos[l].resize(n);
      scratch[l].resize(n);
      for (std::uint32_t i = 0; i < n; ++i) pos[l][i] = i + 1;
      top.ranges.emplace_back(0, n);
    }

    std::vector<Frame> stack;
    stack.push_back(std::move(top));
    std::vector<std::uint32_t> bucket(A + 1);
    std::vector<std::uint32_t> child_ctx((A + 1) * L);
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> child_ranges(A);
    bool warned = false;

    while (!stack.empty()) {
      Frame f = std::move(stack.back());
      stack.pop_back();

      const auto id = static_cast<node_id>(parent_.size());
      if (!warned && parent_.size() >= options_.node_budget) {
        warnings_.push_back("count trie exceeded the node budget of " + std::to_string(options_.node_budget) +
                            " nodes; consider max_depth");
        warned = true;
      }
      if (parent_.size() >= 10 * options_.node_budget)
        fail(errc::budget_exceeded, "count trie grew past ten times the node budget");

      parent_.push_back(f.parent);
      sym_.push_back(f.sym);
      depth_.push_back(f.depth);
      child_.resize(child_.size() + A, npos);
      ctx_.resize(ctx_.size() + L, 0);
      full_.resize(full_.size() + L, 0);
      next_.resize(next_.size() + L * A, 0);
      if (f.parent != npos) child_[f.parent * A + f.sym] = id;

      bool all_unique = true;
      for (std::size_t l = 0; l < L; ++l) {
        const auto n = static_cast<std::uint32_t>(seqs[l].size());
        auto [b, e] = f.ranges[l];
        std::uint32_t ctx = 0;
        for (std::uint32_t k = b; k < e; ++k) {
          const std::uint32_t i = pos[l][k];
          if (i <= n - 1) {
            ++ctx;
            ++next_[(id * L + l) * A + seqs[l][i]];
          }
        }
        ctx_[id * L + l] = ctx;
        full_[id * L + l] = e - b;
        if (ctx != 1) all_unique = false;
      }
      const bool collapse = options_.collapse_unique && all_unique;
      collapsed_.push_back(collapse ? 1 : 0);
      if (collapse) continue;
      if (options_.max_depth && f.depth >= *options_.max_depth) continue;

      // Partition each group's range by the symbol one step further into the past.
      std::fill(child_ctx.begin(), child_ctx.end(), 0);
      for (auto& r : child_ranges) r.assign(L, {0, 0});
      const std::uint32_t d = f.depth;
      for (std::size_t l = 0; l < L; ++l) {
        const auto n = static_cast<std::uint32_t>(seqs[l].size());
        auto [b, e] = f.ranges[l];
        std::fill(bucket.begin(), bucket.end(), 0);
        auto key = [&](std::uint32_t i) -> std::size_t { return i > d ? seqs[l][i - d - 1] : A; };
        for (std::uint32_t k = b; k < e; ++k) ++bucket[key(pos[l][k])];
        std::uint32_t offset = b;
        for (std::size_t a = 0; a <= A; ++a) {
          const std::uint32_t c = bucket[a];
          if (a < A) child_ranges[a][l] = {offset, offset + c};
          bucket[a] = offset;
          offset += c;
        }
        for (std::uint32_t k = b; k < e; ++k) {
          const std::uint32_t i = pos[l][k];
          const std::size_t a = key(i);
          scratch[l][bucket[a]++] = i;
          if (a < A && i <= n - 1) ++child_ctx[a * L + l];
        }
        std::copy(scratch[l].begin() + b, scratch[l].begin() + e, pos[l].begin() + b);
      }
      for (std::size_t a = A; a-- > 0;) {
        bool visible = true;
        for (std::size_t l = 0; l < L; ++l)
          if (child_ctx[a * L + l] == 0) visible = false;
        if (!visible) continue;
        stack.push_back(Frame{id, static_cast<symbol>(a), d + 1, child_ranges[a]});
      }
    }

    end_.resize(parent_.size());
    for (node_id v = 0; v < end_.size(); ++v) end_[v] = v + 1;
    for (node_id v = static_cast<node_id>(end_.size()); v-- > 1;) end_[parent_[v]] = std::max(end_[parent_[v]], end_[v]);
  }

  std::shared_ptr<const GroupSample> sample_;
  TrieOptions options_;
  std::size_t alphabet_size_ = 0;
  std::size_t groups_ = 0;
  std::vector<node_id> parent_;
  std::vector<symbol> sym_;
  std::vector<std::uint32_t> depth_;
  std::vector<node_id> child_;
  std::vector<node_id> end_;
  std::vector<std::uint32_t> ctx_;
  std::vector<std::uint32_t> full_;
  std::vector<std::uint32_t> next_;
  std::vector<std::uint8_t> collapsed_;
  std::vector<std::string> warnings_;
};

/// p̂_{n,l}(·|w) for any context; uniform when some group never saw w.
inline Distribution empirical_prob(const CountTrie& trie, const Context& w, std::size_t l) {
  require(l < trie.groups(), "group index out of range");
  const std::size_t A = trie.alphabet_size();
  if (auto v = trie.find(w)) {
    std::vector<double> p(A);
    trie.empirical(*v, l, p);
    return Distribution(std::move(p));
  }
  if (!trie.visible(w)) return Distribution::uniform(A);
  auto c = trie.counts(w, l);
  std::vector<double> p(A);
  for (std::size_t a = 0; a < A; ++a) p[a] = static_cast<double>(c.next[a]) / static_cast<double>(c.context);
  return Distribution(std::move(p));
}

}  // namespace agct
