#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "agct/error.hpp"

namespace agct {

using symbol = std::uint8_t;

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Ordered finite alphabet. Symbols are referred to by their index.
class Alphabet {
 public:
  Alphabet() = default;

  explicit Alphabet(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    require(tokens_.size() >= 2, "alphabet needs at least two symbols");
    require(tokens_.size() <= 256, "alphabet limited to 256 symbols");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      require(!tokens_[i].empty(), "empty alphabet token");
      auto [it, fresh] = index_.emplace(tokens_[i], static_cast<symbol>(i));
      require(fresh, "duplicate alphabet token '" + tokens_[i] + "'");
    }
  }

  /// Alphabet {0, 1, ..., k-1} with decimal tokens.
  static Alphabet of_size(std::size_t k) {
    std::vector<std::string> t;
    for (std::size_t i = 0; i < k; ++i) t.push_back(std::to_string(i));
    return Alphabet(std::move(t));
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(symbol a) const { return tokens_.at(a); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::optional<symbol> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool single_char_tokens() const {
    return std::all_of(tokens_.begin(), tokens_.end(), [](const auto& t) { return t.size() == 1; });
  }

  friend bool operator==(const Alphabet& a, const Alphabet& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, symbol> index_;
};

/// A context w = w_{-|w|} ... w_{-1}, stored oldest symbol first.
class Context {
 public:
  Context() = default;
  explicit Context(std::vector<symbol> s) : s_(std::move(s)) {}
  Context(std::initializer_list<symbol> s) : s_(s) {}

  /// Parses a string of single-character tokens, e.g. "010".
  static Context parse(const std::string& text, const Alphabet& alphabet) {
    std::vector<symbol> s;
    if (text == "e") return Context{};
    for (char ch : text) {
      auto a = alphabet.find(std::string(1, ch));
      if (!a) fail(errc::alphabet_mismatch, "symbol '" + std::string(1, ch) + "' not in alphabet");
      s.push_back(*a);
    }
    return Context(std::move(s));
  }

  std::size_t size() const noexcept { return s_.size(); }
  bool empty() const noexcept { return s_.empty(); }
  symbol operator[](std::size_t i) const { return s_[i]; }
  std::span<const symbol> symbols() const noexcept { return s_; }

  /// Newest symbol w_{-1}.
  symbol newest() const { return s_.back(); }
  symbol oldest() const { return s_.front(); }

  /// Drops the oldest symbol. The root has no parent.
  Context parent() const {
    require(!s_.empty(), "the empty context has no parent");
    return Context(std::vector<symbol>(s_.begin() + 1, s_.end()));
  }

  /// a·w : one symbol further into the past.
  Context extend_older(symbol a) const {
    std::vector<symbol> s;
    s.reserve(s_.size() + 1);
    s.push_back(a);
    s.insert(s.end(), s_.begin(), s_.end());
    return Context(std::move(s));
  }

  /// w·a : a new most recent symbol.
  Context extend_newer(symbol a) const {
    auto s = s_;
    s.push_back(a);
    return Context(std::move(s));
  }

  /// Suffix of length k (the k most recent symbols).
  Context suffix(std::size_t k) const {
    require(k <= s_.size(), "suffix longer than context");
    return Context(std::vector<symbol>(s_.end() - static_cast<std::ptrdiff_t>(k), s_.end()));
  }

  /// this ⪯ other
  bool is_suffix_of(const Context& other) const {
    if (s_.size() > other.s_.size()) return false;
    return std::equal(s_.rbegin(), s_.rend(), other.s_.rbegin());
  }

  std::string str(const Alphabet& alphabet) const {
    if (s_.empty()) return "e";
    std::string out;
    const bool compact = alphabet.single_char_tokens();
    for (std::size_t i = 0; i < s_.size(); ++i) {
      if (!compact && i) out += '.';
      out += alphabet.token(s_[i]);
    }
    return out;
  }

  std::vector<std::string> tokens(const Alphabet& alphabet) const {
    std::vector<std::string> out;
    for (auto a : s_) out.push_back(alphabet.token(a));
    return out;
  }

  friend auto operator<=>(const Context&, const Context&) = default;
  friend bool operator==(const Context&, const Context&) = default;

 private:
  std::vector<symbol> s_;
};

/// Orders contexts by length, then by symbols read newest-first (tree order).
struct TreeOrder {
  bool operator()(const Context& a, const Context& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    auto sa = a.symbols();
    auto sb = b.symbols();
    return std::lexicographical_compare(sa.rbegin(), sa.rend(), sb.rbegin(), sb.rend());
  }
};

/// A probability distribution over an alphabet, indexed by symbol.
class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(std::vector<double> p, double tol = 1e-12) : p_(std::move(p)) {
    require(!p_.empty(), "empty distribution");
    double total = 0.0;
    for (double v : p_) {
      require(v >= 0.0 && std::isfinite(v), "distribution entries must be finite and nonnegative");
      total += v;
    }
    require(std::abs(total - 1.0) <= tol, "distribution does not sum to one");
  }

  static Distribution uniform(std::size_t k) { return Distribution(std::vector<double>(k, 1.0 / static_cast<double>(k))); }

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t a) const { return p_[a]; }
  std::span<const double> probs() const noexcept { return p_; }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> p_;
};

/// Family of events 𝒮 defining d_𝒮(p, q) = sup_S |p(S) - q(S)|.
enum class SetFamily { singletons, all_subsets };

inline std::size_t family_size(SetFamily fam, std::size_t alphabet_size) {
  if (fam == SetFamily::singletons) return alphabet_size;
  require(alphabet_size < 63, "alphabet too large for the all-subsets family");
  return std::size_t{1} << alphabet_size;
}

inline const char* family_name(SetFamily fam) { return fam == SetFamily::singletons ? "linf" : "l1half"; }

/// ‖v‖_{L,q} = ((1/L) Σ |v_l|^q)^{1/q}; q = ∞ gives the max.
inline double group_norm(std::span<const double> v, double q) {
  require(!v.empty(), "group_norm of an empty vector");
  require(q >= 1.0, "group_norm exponent must be >= 1");
  if (std::isinf(q)) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  const double inv_len = 1.0 / static_cast<double>(v.size());
  if (q == 1.0) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s * inv_len;
  }
  if (q == 2.0) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s * inv_len);
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), q);
  return std::pow(s * inv_len, 1.0 / q);
}

/// d_𝒮 on raw probability vectors. Singletons give ‖p-q‖_∞, all subsets ‖p-q‖_1 / 2.
inline double metric_distance(std::span<const double> p, std::span<const double> q, SetFamily fam) {
  if (p.size() != q.size()) fail(errc::alphabet_mismatch, "distributions over different alphabets");
  double acc = 0.0;
  if (fam == SetFamily::singletons) {
    for (std::size_t a = 0; a < p.size(); ++a) acc = std::max(acc, std::abs(p[a] - q[a]));
    return acc;
  }
  for (std::size_t a = 0; a < p.size(); ++a) acc += std::abs(p[a] - q[a]);
  return std::min(1.0, 0.5 * acc);
}

inline double metric_distance(const Distribution& p, const Distribution& q, SetFamily fam) {
  return metric_distance(p.probs(), q.probs(), fam);
}

/// p(S) for every S in the family, in a fixed enumeration order.
inline std::vector<double> event_probabilities(std::span<const double> p, SetFamily fam) {
  if (fam == SetFamily::singletons) return {p.begin(), p.end()};
  const std::size_t count = family_size(fam, p.size());
  std::vector<double> out(count, 0.0);
  for (std::size_t mask = 1; mask < count; ++mask) {
    // lowest set bit + the subset without it
    const auto low = static_cast<std::size_t>(__builtin_ctzll(mask));
    out[mask] = out[mask & (mask - 1)] + p[low];
  }
  return out;
}

/// A suffix-closed set of contexts containing the root.
class TreeShape {
 public:
  TreeShape() : nodes_{Context{}} {}

  explicit TreeShape(std::set<Context, TreeOrder> nodes) : nodes_(std::move(nodes)) {
    require(nodes_.count(Context{}) == 1, "a tree must contain the empty context");
    for (const auto& w : nodes_)
      if (!w.empty()) require(nodes_.count(w.parent()) == 1, "tree is not suffix-closed");
  }

  template <typename Range>
  static TreeShape from(const Range& contexts) {
    std::set<Context, TreeOrder> s(contexts.begin(), contexts.end());
    s.insert(Context{});
    return TreeShape(std::move(s));
  }

  /// Smallest tree containing every given context (closure under parent).
  template <typename Range>
  static TreeShape closure_of(const Range& contexts) {
    std::set<Context, TreeOrder> s{Context{}};
    for (Context w : contexts) {
      while (s.insert(w).second && !w.empty()) w = w.parent();
    }
    return TreeShape(std::move(s));
  }

  /// All contexts of length at most `depth`.
  static TreeShape full(std::size_t alphabet_size, std::size_t depth) {
    std::set<Context, TreeOrder> s{Context{}};
    std::vector<Context> frontier{Context{}};
    for (std::size_t d = 0; d < depth; ++d) {
      std::vector<Context> next;
      for (const auto& w : frontier)
        for (std::size_t a = 0; a < alphabet_size; ++a) next.push_back(w.extend_older(static_cast<symbol>(a)));
      for (const auto& w : next) s.insert(w);
      frontier = std::move(next);
    }
    return TreeShape(std::move(s));
  }

  const std::set<Context, TreeOrder>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool contains(const Context& w) const { return nodes_.count(w) == 1; }

  std::size_t height() const { return nodes_.empty() ? 0 : nodes_.rbegin()->size(); }

  std::vector<Context> children(const Context& w, std::size_t alphabet_size) const {
    std::vector<Context> out;
    for (std::size_t a = 0; a < alphabet_size; ++a) {
      auto child = w.extend_older(static_cast<symbol>(a));
      if (contains(child)) out.push_back(std::move(child));
    }
    return out;
  }

  bool is_leaf(const Context& w, std::size_t alphabet_size) const {
    return contains(w) && children(w, alphabet_size).empty();
  }

  std::vector<Context> leaves(std::size_t alphabet_size) const {
    std::vector<Context> out;
    for (const auto& w : nodes_)
      if (is_leaf(w, alphabet_size)) out.push_back(w);
    return out;
  }

  /// Every non-leaf has exactly |A| children.
  bool is_complete(std::size_t alphabet_size) const {
    for (const auto& w : nodes_) {
      const auto k = children(w, alphabet_size).size();
      if (k != 0 && k != alphabet_size) return false;
    }
    return true;
  }

  bool is_subset_of(const TreeShape& other) const {
    return std::all_of(nodes_.begin(), nodes_.end(), [&](const auto& w) { return other.contains(w); });
  }

  friend bool operator==(const TreeShape& a, const TreeShape& b) { return a.nodes_ == b.nodes_; }

 private:
  std::set<Context, TreeOrder> nodes_;
};

/// T(x): the longest suffix x_{-k}..x_{-1} such that every shorter suffix is in the tree.
/// `past` is newest-last. Throws insufficient_history when the supplied past runs out
/// while the tree still has deeper nodes below the current one.
inline Context terminal_node(const TreeShape& tree, std::span<const symbol> past, std::size_t alphabet_size) {
  std::vector<symbol> node;
  std::size_t k = 0;
  while (true) {
    if (k == past.size()) {
      Context here(node);
      for (std::size_t a = 0; a < alphabet_size; ++a)
        if (tree.contains(here.extend_older(static_cast<symbol>(a))))
          fail(errc::insufficient_history, "past of length " + std::to_string(past.size()) +
                                               " does not resolve a terminal node");
      return here;
    }
    const symbol next = past[past.size() - 1 - k];
    node.insert(node.begin(), next);
    if (!tree.contains(Context(node))) {
      node.erase(node.begin());
      return Context(std::move(node));
    }
    ++k;
  }
}

}  // namespace agct
