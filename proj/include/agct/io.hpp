#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "agct/dcm.hpp"
#include "agct/dp.hpp"
#include "agct/pruning.hpp"
#include "agct/truth.hpp"
#include "json.hpp"

namespace agct {

using json = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::data_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::data_error, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(errc::data_error, "write to '" + path + "' failed");
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) fail(errc::data_error, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------- corpus

namespace detail {

struct Token {
  std::string text;
  std::size_t column;
};

inline std::vector<Token> split_ws(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

inline bool blank_or_comment(const std::string& line) {
  for (char ch : line) {
    if (ch == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(ch))) return false;
  }
  return true;
}

}  // namespace detail

/// Corpus text: an `alphabet: s1 ... sk` header, then one whitespace-separated sequence per line.
/// Lines starting with `#` are comments.
inline GroupSample parse_corpus_text(const std::string& text, const std::string& source = "<corpus>") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::optional<Alphabet> alphabet;
  GroupSample sample;
  auto where = [&](std::size_t col) { return source + ":" + std::to_string(lineno) + ":" + std::to_string(col) + ": "; };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::blank_or_comment(line)) continue;
    auto tokens = detail::split_ws(line);
    if (!alphabet) {
      const auto& head = tokens.front();
      std::vector<std::string> symbols;
      if (head.text == "alphabet:") {
        for (std::size_t i = 1; i < tokens.size(); ++i) symbols.push_back(tokens[i].text);
      } else if (head.text.rfind("alphabet:", 0) == 0) {
        symbols.push_back(head.text.substr(9));
        for (std::size_t i = 1; i < tokens.size(); ++i) symbols.push_back(tokens[i].text);
      } else {
        fail(errc::parse_error, where(head.column) + "expected 'alphabet:' header");
      }
      try {
        alphabet = Alphabet(symbols);
      } catch (const error& e) {
        fail(errc::parse_error, where(head.column) + e.what());
      }
      sample.alphabet = *alphabet;
      continue;
    }
    std::vector<symbol> seq;
    seq.reserve(tokens.size());
    for (const auto& t : tokens) {
      auto a = alphabet->find(t.text);
      if (!a) fail(errc::parse_error, where(t.column) + "token '" + t.text + "' is not in the alphabet");
      seq.push_back(*a);
    }
    sample.sequences.push_back(std::move(seq));
  }
  if (!alphabet) fail(errc::parse_error, source + ": missing 'alphabet:' header");
  if (sample.sequences.empty()) fail(errc::parse_error, source + ": corpus has no sequences");
  return sample;
}

inline GroupSample parse_corpus(const std::string& path) { return parse_corpus_text(read_file(path), path); }

inline std::string format_corpus(const GroupSample& sample) {
  std::string out = "alphabet:";
  for (const auto& t : sample.alphabet.tokens()) out += " " + t;
  out += "\n";
  for (const auto& seq : sample.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out += ' ';
      out += sample.alphabet.token(seq[i]);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------- key-value config

/// `key = value` lines; `#` starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find_first_of("=:");
      if (eq == std::string::npos) fail(errc::parse_error, source + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(errc::parse_error, source + ":" + std::to_string(lineno) + ": empty key");
      cfg.set(key, value);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) { return parse(read_file(path), path); }

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(const std::string& key) const { return entries_.count(key) == 1; }
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_number(key, it->second);
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_count(key, it->second);
  }

  bool flag(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const auto& v = it->second;
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    fail(errc::invalid_argument, "config key '" + key + "' expects a boolean, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    std::string cur;
    for (char ch : it->second + ",") {
      if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    return out;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : list(key)) out.push_back(parse_number(key, s));
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& s : list(key)) out.push_back(parse_count(key, s));
    return out;
  }

  void reject_unknown(const std::set<std::string>& known) const {
    for (const auto& [k, v] : entries_)
      if (!known.count(k)) fail(errc::invalid_argument, "unknown config key '" + k + "'");
  }

  static double parse_number(const std::string& key, const std::string& s) {
    if (s == "inf" || s == "infinity" || s == "Inf") return infinity;
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
      fail(errc::invalid_argument, "config key '" + key + "' expects a number, got '" + s + "'");
    return v;
  }

  static std::size_t parse_count(const std::string& key, const std::string& s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
      fail(errc::invalid_argument, "config key '" + key + "' expects a nonnegative integer, got '" + s + "'");
    return v;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> entries_;
};

inline const std::set<std::string>& estimation_keys() {
  static const std::set<std::string> keys{"fam", "k", "r", "m", "c", "delta", "radius_mode", "gamma", "max_depth",
                                          "restricted_candidates", "order", "order_seed", "collapse_unique", "node_budget"};
  return keys;
}

inline SetFamily parse_family(const std::string& s) {
  if (s == "linf" || s == "singletons") return SetFamily::singletons;
  if (s == "l1half" || s == "all_subsets" || s == "tv") return SetFamily::all_subsets;
  fail(errc::invalid_argument, "unknown set family '" + s + "' (use linf or l1half)");
}

/// Overlays config keys on `base`; missing keys keep the base value.
inline EstimationConfig estimation_from(const KeyValueConfig& kv, EstimationConfig base = {}) {
  EstimationConfig cfg = base;
  if (kv.has("fam")) cfg.fam = parse_family(kv.str("fam", ""));
  cfg.k = kv.number("k", cfg.k);
  cfg.r = kv.number("r", cfg.r);
  cfg.m = kv.number("m", cfg.m);
  cfg.c = kv.number("c", cfg.c);
  cfg.radius.delta = kv.number("delta", cfg.radius.delta);
  cfg.radius.gamma = kv.number("gamma", cfg.radius.gamma);
  if (kv.has("radius_mode")) {
    auto mode = parse_radius_mode(kv.str("radius_mode", ""));
    if (!mode) fail(errc::invalid_argument, "unknown radius_mode '" + kv.str("radius_mode", "") + "'");
    cfg.radius.mode = *mode;
  }
  if (kv.has("max_depth")) cfg.max_depth = kv.count("max_depth", 0);
  cfg.restricted_candidates = kv.flag("restricted_candidates", cfg.restricted_candidates);
  if (kv.has("order")) {
    const auto o = kv.str("order", "");
    if (o == "deepest_first") cfg.order = ExamOrder::deepest_first;
    else if (o == "random") cfg.order = ExamOrder::random;
    else fail(errc::invalid_argument, "unknown order '" + o + "'");
  }
  cfg.order_seed = kv.count("order_seed", cfg.order_seed);
  cfg.collapse_unique = kv.flag("collapse_unique", cfg.collapse_unique);
  cfg.node_budget = kv.count("node_budget", cfg.node_budget);
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------- JSON helpers

/// Finite doubles as JSON numbers (shortest round-trip text); ±inf and NaN as strings.
inline json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double num_of(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return infinity;
    if (s == "-inf") return -infinity;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(errc::parse_error, "expected a number, got " + j.dump());
}

inline json nums(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::vector<double> nums_of(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(num_of(x));
  return out;
}

inline json context_json(const Context& w, const Alphabet& alphabet) { return w.tokens(alphabet); }

inline Context context_of(const json& j, const Alphabet& alphabet) {
  std::vector<symbol> s;
  for (const auto& t : j) {
    auto a = alphabet.find(t.get<std::string>());
    if (!a) fail(errc::alphabet_mismatch, "context token '" + t.get<std::string>() + "' not in alphabet");
    s.push_back(*a);
  }
  return Context(std::move(s));
}

inline json estimation_json(const EstimationConfig& cfg) {
  json j;
  j["fam"] = family_name(cfg.fam);
  j["k"] = num(cfg.k);
  j["r"] = num(cfg.r);
  j["m"] = num(cfg.m);
  j["c"] = num(cfg.c);
  j["delta"] = num(cfg.radius.delta);
  j["radius_mode"] = radius_mode_name(cfg.radius.mode);
  j["gamma"] = num(cfg.radius.gamma);
  j["max_depth"] = cfg.max_depth ? json(*cfg.max_depth) : json(nullptr);
  j["restricted_candidates"] = cfg.restricted_candidates;
  j["order"] = cfg.order == ExamOrder::random ? "random" : "deepest_first";
  j["order_seed"] = cfg.order_seed;
  j["collapse_unique"] = cfg.collapse_unique;
  j["node_budget"] = cfg.node_budget;
  return j;
}

inline EstimationConfig estimation_of(const json& j) {
  EstimationConfig cfg;
  cfg.fam = parse_family(j.at("fam").get<std::string>());
  cfg.k = num_of(j.at("k"));
  cfg.r = num_of(j.at("r"));
  cfg.m = num_of(j.at("m"));
  cfg.c = num_of(j.at("c"));
  cfg.radius.delta = num_of(j.at("delta"));
  auto mode = parse_radius_mode(j.at("radius_mode").get<std::string>());
  if (!mode) fail(errc::parse_error, "unknown radius_mode in model file");
  cfg.radius.mode = *mode;
  cfg.radius.gamma = num_of(j.at("gamma"));
  if (!j.at("max_depth").is_null()) cfg.max_depth = j.at("max_depth").get<std::size_t>();
  cfg.restricted_candidates = j.at("restricted_candidates").get<bool>();
  cfg.order = j.at("order").get<std::string>() == "random" ? ExamOrder::random : ExamOrder::deepest_first;
  cfg.order_seed = j.at("order_seed").get<std::uint64_t>();
  cfg.collapse_unique = j.at("collapse_unique").get<bool>();
  cfg.node_budget = j.at("node_budget").get<std::size_t>();
  return cfg;
}

// ---------------------------------------------------------------- models

inline json model_json(const ContextTreeModel& model) {
  json j;
  j["format"] = "agct-model";
  j["version"] = 1;
  j["alphabet"] = model.alphabet.tokens();
  j["groups"] = model.groups();
  j["lengths"] = model.lengths;
  j["completed"] = model.completed;
  j["config"] = estimation_json(model.config);
  json nodes = json::array();
  for (const auto& [w, e] : model.nodes) {
    json n;
    n["context"] = context_json(w, model.alphabet);
    n["label"] = w.str(model.alphabet);
    n["leaf"] = model.shape.is_leaf(w, model.alphabet.size());
    n["synthetic"] = e.synthetic;
    n["counts"] = e.counts;
    n["conf"] = nums(e.conf);
    json rows = json::array();
    for (const auto& row : e.probs) rows.push_back(nums(row));
    n["probs"] = rows;
    nodes.push_back(n);
  }
  j["nodes"] = nodes;
  j["warnings"] = model.warnings;
  return j;
}

inline ContextTreeModel model_of(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "agct-model") fail(errc::parse_error, "not a model file");
    ContextTreeModel m;
    m.alphabet = Alphabet(j.at("alphabet").get<std::vector<std::string>>());
    m.lengths = j.at("lengths").get<std::vector<std::size_t>>();
    m.completed = j.at("completed").get<bool>();
    m.config = estimation_of(j.at("config"));
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    const std::size_t L = m.lengths.size();
    const std::size_t A = m.alphabet.size();
    std::set<Context, TreeOrder> shape;
    for (const auto& n : j.at("nodes")) {
      Context w = context_of(n.at("context"), m.alphabet);
      NodeEstimate e;
      e.synthetic = n.at("synthetic").get<bool>();
      e.counts = n.at("counts").get<std::vector<std::uint64_t>>();
      e.conf = nums_of(n.at("conf"));
      for (const auto& row : n.at("probs")) e.probs.push_back(nums_of(row));
      if (e.counts.size() != L || e.conf.size() != L || e.probs.size() != L)
        fail(errc::parse_error, "node '" + w.str(m.alphabet) + "' does not have one row per group");
      for (const auto& row : e.probs)
        if (row.size() != A) fail(errc::parse_error, "node '" + w.str(m.alphabet) + "' has a row of the wrong width");
      shape.insert(w);
      if (!m.nodes.emplace(std::move(w), std::move(e)).second) fail(errc::parse_error, "duplicate node in model file");
    }
    m.shape = TreeShape(std::move(shape));
    return m;
  } catch (const json::exception& e) {
    fail(errc::parse_error, std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const ContextTreeModel& model, const std::string& path) { write_file(path, model_json(model).dump(1) + "\n"); }

inline ContextTreeModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    fail(errc::parse_error, path + ": " + e.what());
  }
  return model_of(j);
}

/// Graphviz rendering of a fitted tree; leaves list their per-group distributions.
inline std::string model_dot(const ContextTreeModel& model, std::size_t max_groups = 8) {
  const auto& alpha = model.alphabet;
  const std::size_t A = alpha.size();
  std::ostringstream out;
  out << std::setprecision(3);
  auto id = [&](const Context& w) { return "\"" + w.str(alpha) + "\""; };
  out << "digraph context_tree {\n  node [shape=box, fontname=\"monospace\"];\n";
  for (const auto& [w, e] : model.nodes) {
    out << "  " << id(w) << " [label=\"" << w.str(alpha);
    if (model.shape.is_leaf(w, A)) {
      const std::size_t shown = std::min(max_groups, e.probs.size());
      for (std::size_t l = 0; l < shown; ++l) {
        out << "\\n" << l + 1 << ": (";
        for (std::size_t a = 0; a < A; ++a) out << (a ? ", " : "") << e.probs[l][a];
        out << ")";
      }
      if (shown < e.probs.size()) out << "\\n... " << e.probs.size() - shown << " more";
    }
    out << "\"" << (e.synthetic ? ", style=dashed" : "") << "];\n";
  }
  for (const auto& [w, e] : model.nodes)
    if (!w.empty()) out << "  " << id(w.parent()) << " -> " << id(w) << " [label=\"" << alpha.token(w.oldest()) << "\"];\n";
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------- reports

inline json theorem_json(const TheoremReport& t) {
  json j;
  j["good"] = t.good;
  j["subset_ok"] = t.subset_ok;
  j["evaluated"] = t.evaluated;
  j["radius_ok"] = t.radius_ok;
  j["oracle_ok"] = t.oracle_ok;
  j["radius_gap"] = num(t.radius_gap);
  j["oracle_gap"] = num(t.oracle_gap);
  j["pasts"] = t.pasts;
  return j;
}

inline json study_json(const StudyReport& r, const Alphabet& alphabet) {
  json j;
  j["model"] = r.model;
  j["n"] = r.n;
  j["groups"] = r.groups;
  j["replications"] = r.replications;
  j["seed"] = r.seed;
  j["c"] = num(r.c);
  json rows = json::array();
  for (std::size_t i = 0; i < r.tracked.size(); ++i)
    rows.push_back({{"context", r.tracked[i].str(alphabet)}, {"frequency", num(r.frequency[i])}});
  j["rows"] = rows;
  j["mean_extra"] = num(r.mean_extra);
  j["mean_others"] = num(r.mean_others);
  j["good_frequency"] = num(r.good_frequency);
  j["theorem_runs"] = r.theorem_runs;
  j["subset_violations"] = r.subset_violations;
  j["radius_violations"] = r.radius_violations;
  j["oracle_violations"] = r.oracle_violations;
  json runs = json::array();
  for (const auto& o : r.runs) {
    json x;
    x["seed"] = o.seed;
    x["selected"] = o.selected;
    x["tree_size"] = o.tree_size;
    x["height"] = o.height;
    x["extra"] = o.extra;
    x["others"] = o.others;
    x["good"] = o.good;
    if (o.theorems) x["theorems"] = theorem_json(*o.theorems);
    runs.push_back(x);
  }
  j["runs"] = runs;
  j["seconds"] = num(r.seconds);
  return j;
}

/// Selection frequencies, one column per study, rows in the order of the tracked contexts,
/// followed by the mean counts of extra and other nodes.
inline std::string study_table(const std::vector<StudyReport>& reports, const Alphabet& alphabet) {
  require(!reports.empty(), "no studies to tabulate");
  std::vector<std::string> head{"node"};
  for (const auto& r : reports) head.push_back("n=" + std::to_string(r.n) + ",L=" + std::to_string(r.groups));
  std::vector<std::vector<std::string>> rows;
  auto fmt = [](double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
  };
  for (std::size_t i = 0; i < reports[0].tracked.size(); ++i) {
    std::vector<std::string> row{reports[0].tracked[i].str(alphabet)};
    for (const auto& r : reports) row.push_back(i < r.frequency.size() ? fmt(r.frequency[i], 2) : "-");
    rows.push_back(row);
  }
  std::vector<std::string> extra{"extra"}, others{"others"};
  for (const auto& r : reports) {
    extra.push_back(fmt(r.mean_extra, 2));
    others.push_back(fmt(r.mean_others, 2));
  }
  rows.push_back(extra);
  rows.push_back(others);
  std::vector<std::size_t> width(head.size(), 0);
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) out << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      else out << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    out << "\n";
  };
  line(head);
  for (const auto& row : rows) line(row);
  return out.str();
}

inline json value_table_json(const ValueTable& t, const Alphabet& alphabet) {
  json j;
  j["order"] = t.order;
  j["approximate"] = t.approximate;
  j["iterations"] = t.iterations;
  j["residual"] = num(t.residual);
  j["contraction_ok"] = t.contraction_ok;
  json states = json::array();
  for (std::size_t s = 0; s < t.values.size(); ++s) {
    json x;
    x["state"] = s < t.labels.size() ? t.labels[s].str(alphabet) : std::to_string(s);
    x["value"] = num(t.values[s]);
    x["action"] = t.policy[s];
    states.push_back(x);
  }
  j["states"] = states;
  return j;
}

inline json effect_json(const EffectReport& r, const EffectQuery& q, const Alphabet& alphabet) {
  json j;
  j["option"] = alphabet.token(q.option);
  j["x"] = Context(q.x).tokens(alphabet);
  j["y"] = Context(q.y).tokens(alphabet);
  j["node_x"] = r.node_x.str(alphabet);
  j["node_y"] = r.node_y.str(alphabet);
  j["average"] = num(r.average);
  j["per_agent"] = nums(r.per_agent);
  j["radius_x"] = num(r.radius_x);
  j["radius_y"] = num(r.radius_y);
  j["sampling_term"] = num(r.sampling_term);
  j["factor"] = num(r.factor);
  j["diagnostic_envelope"] = num(r.diagnostic_envelope);
  j["envelope_note"] = "diagnostic envelope omits the oracle-tree approximation errors";
  return j;
}

/// Run record: command, config echo, seed, tool version, input digests and wall time.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;
  double seconds = 0.0;

  void add_input(const std::string& path) { inputs.emplace_back(path, sha256_hex(read_file(path))); }

  json to_json() const {
    json j;
    j["tool"] = "agct";
    j["version"] = "1.0.0";
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["threads"] = threads;
    json in = json::array();
    for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"sha256", d}});
    j["inputs"] = in;
    j["seconds"] = num(seconds);
    return j;
  }
};

}  // namespace agct
