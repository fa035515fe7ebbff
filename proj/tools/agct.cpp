#include <chrono>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "agct/io.hpp"

using namespace agct;

namespace {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string format = "json";
};

KeyValueConfig load_config(const Common& c, const std::set<std::string>& extra) {
  KeyValueConfig kv;
  try {
    if (!c.config.empty()) kv = KeyValueConfig::load(c.config);
    std::set<std::string> known = estimation_keys();
    known.insert(extra.begin(), extra.end());
    known.insert("seed");
    kv.reject_unknown(known);
  } catch (const error& e) {
    throw usage_error(e.what());
  }
  return kv;
}

template <class F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const error& e) {
    if (e.code() == errc::invalid_argument) throw usage_error(e.what());
    throw;
  }
}

std::uint64_t seed_of(const Common& c, const KeyValueConfig& kv) { return c.seed ? *c.seed : kv.count("seed", 1); }

void emit(const Common& c, const std::string& text) {
  if (c.out.empty() || c.out == "-") std::cout << text;
  else write_file(c.out, text);
}

void write_manifest(const Common& c, RunManifest& m, std::chrono::steady_clock::time_point t0) {
  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.threads = c.threads;
  if (!c.out.empty() && c.out != "-") write_file(c.out + ".manifest.json", m.to_json().dump(2) + "\n");
}

/// Symbols separated by whitespace or commas; with one-character tokens a bare string like 0110 also works.
std::vector<symbol> parse_past(const std::string& text, const Alphabet& alphabet) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text + " ") {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (tokens.size() == 1 && alphabet.single_char_tokens() && tokens[0].size() > 1) {
    std::string s = tokens[0];
    tokens.clear();
    for (char ch : s) tokens.emplace_back(1, ch);
  }
  std::vector<symbol> past;
  for (const auto& t : tokens) {
    auto a = alphabet.find(t);
    if (!a) throw usage_error("symbol '" + t + "' is not in the model alphabet");
    past.push_back(*a);
  }
  return past;
}

TrueModel model_named(const std::string& name, std::size_t groups) {
  if (name == "order3") return make_order3_chain();
  if (name == "renewal") return make_renewal();
  if (name == "heterogeneous") return make_heterogeneous_depth1(groups);
  throw usage_error("unknown model '" + name + "' (order3, renewal, heterogeneous)");
}

void add_common(CLI::App* cmd, Common& c, bool formats) {
  cmd->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output file (default stdout)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  if (formats) cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "dot", "table"}));
}

int cmd_fit(const Common& c, const std::string& corpus, bool complete) {
  const auto t0 = std::chrono::steady_clock::now();
  auto kv = load_config(c, {});
  auto cfg = as_usage([&] { return estimation_from(kv); });
  if (c.format == "table") throw usage_error("fit writes json or dot");
  auto sample = parse_corpus(corpus);
  auto model = fit(std::move(sample), cfg).model;
  if (complete) model = complete_model(std::move(model));
  emit(c, c.format == "dot" ? model_dot(model) : model_json(model).dump(1) + "\n");
  RunManifest m{.command = "fit", .config = kv.entries()};
  m.add_input(corpus);
  write_manifest(c, m, t0);
  return 0;
}

int cmd_predict(const Common& c, const std::string& model_path, const std::string& past_text, std::size_t group) {
  auto model = load_model(model_path);
  if (group >= model.groups()) throw usage_error("group index out of range");
  auto past = parse_past(past_text, model.alphabet);
  auto p = predict(model, past, group);
  json j;
  j["context"] = terminal_node(model.shape, past, model.alphabet.size()).str(model.alphabet);
  json probs;
  for (std::size_t a = 0; a < p.size(); ++a) probs[model.alphabet.token(static_cast<symbol>(a))] = num(p[a]);
  j["probs"] = probs;
  emit(c, j.dump() + "\n");
  return 0;
}

int cmd_simulate(const Common& c, const std::string& name, std::size_t n, std::size_t groups) {
  const auto t0 = std::chrono::steady_clock::now();
  auto kv = load_config(c, {});
  const auto seed = seed_of(c, kv);
  auto truth = model_named(name, groups);
  auto sim = as_usage([&] { return simulate(truth, n, groups, seed); });
  emit(c, format_corpus(sim.sample));
  RunManifest m{.command = "simulate " + name, .config = kv.entries(), .seed = seed};
  write_manifest(c, m, t0);
  return 0;
}

int cmd_study(const Common& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto kv = load_config(c, {"model", "n", "groups", "replications", "theorems", "oracle_depth", "good_m"});
  std::vector<StudyReport> reports;
  auto ns = as_usage([&] { return kv.counts("n"); });
  auto ls = as_usage([&] { return kv.counts("groups"); });
  if (ns.empty()) ns = {1000};
  if (ls.empty()) ls.assign(ns.size(), 1);
  if (ls.size() == 1 && ns.size() > 1) ls.assign(ns.size(), ls[0]);
  if (ls.size() != ns.size()) throw usage_error("n and groups lists must have the same length");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    StudyConfig cfg = as_usage([&] {
      StudyConfig s;
      s.model = model_named(kv.str("model", "order3"), ls[i]);
      s.n = ns[i];
      s.groups = ls[i];
      s.replications = kv.count("replications", 100);
      s.seed = seed_of(c, kv);
      s.estimation = estimation_from(kv);
      s.good_m = kv.number("good_m", s.good_m);
      s.theorems = kv.flag("theorems", false);
      s.oracle_depth = kv.count("oracle_depth", 3);
      s.threads = c.threads;
      s.validate();
      return s;
    });
    reports.push_back(run_study(cfg));
  }
  const auto& alphabet = model_named(kv.str("model", "order3"), ls[0]).alphabet;
  if (c.format == "table") {
    emit(c, study_table(reports, alphabet));
  } else if (c.format == "json") {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(study_json(r, alphabet));
    emit(c, arr.dump(1) + "\n");
  } else {
    throw usage_error("study writes json or table");
  }
  RunManifest m{.command = "study", .config = kv.entries(), .seed = seed_of(c, kv)};
  write_manifest(c, m, t0);
  return 0;
}

int cmd_dp(const Common& c, const std::string& model_path) {
  const auto t0 = std::chrono::steady_clock::now();
  auto kv = load_config(c, {"beta", "actions", "reward", "tol", "max_iter", "budget", "fallback"});
  auto model = load_model(model_path);
  auto [spec, opt] = as_usage([&] {
    MDPSpec s;
    s.actions = kv.count("actions", model.groups());
    s.beta = kv.number("beta", 0.9);
    s.reward = kv.numbers("reward");
    DPOptions o;
    o.tol = kv.number("tol", o.tol);
    o.max_iter = kv.count("max_iter", o.max_iter);
    o.budget = kv.count("budget", o.budget);
    o.allow_fallback = kv.flag("fallback", false);
    s.validate(model.alphabet.size());
    return std::pair{s, o};
  });
  auto table = value_iteration(model, spec, opt);
  emit(c, value_table_json(table, model.alphabet).dump(1) + "\n");
  RunManifest m{.command = "dp", .config = kv.entries()};
  m.add_input(model_path);
  write_manifest(c, m, t0);
  return 0;
}

int cmd_avem(const Common& c, const std::string& model_path, const std::string& option, const std::string& x, const std::string& y) {
  const auto t0 = std::chrono::steady_clock::now();
  auto model = load_model(model_path);
  auto a = model.alphabet.find(option);
  if (!a) throw usage_error("option '" + option + "' is not in the model alphabet");
  EffectQuery q{*a, parse_past(x, model.alphabet), parse_past(y, model.alphabet)};
  auto r = avem(model, q);
  emit(c, effect_json(r, q, model.alphabet).dump(1) + "\n");
  RunManifest m{.command = "avem"};
  m.add_input(model_path);
  write_manifest(c, m, t0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit, simulate and evaluate grouped context tree models"};
  app.require_subcommand(1);

  Common common;
  std::string corpus, model_path, past, name = "order3", option, x, y;
  bool complete = false;
  std::size_t group = 0, n = 1000, groups = 1;

  auto* fit_cmd = app.add_subcommand("fit", "estimate a context tree from a corpus");
  fit_cmd->add_option("corpus", corpus, "corpus file")->required()->check(CLI::ExistingFile);
  fit_cmd->add_flag("--complete", complete, "add the missing siblings so every past has a terminal node");
  add_common(fit_cmd, common, true);

  auto* predict_cmd = app.add_subcommand("predict", "next-symbol law for a past under a saved model");
  predict_cmd->add_option("model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--past", past, "past symbols, newest last")->required();
  predict_cmd->add_option("--group", group, "group index (0-based)");
  add_common(predict_cmd, common, false);

  auto* sim_cmd = app.add_subcommand("simulate", "draw a corpus from a built-in model");
  sim_cmd->add_option("--model", name, "order3, renewal or heterogeneous");
  sim_cmd->add_option("--n", n, "sequence length")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--groups", groups, "number of groups")->check(CLI::PositiveNumber);
  add_common(sim_cmd, common, false);

  auto* study_cmd = app.add_subcommand("study", "selection frequencies over replications");
  add_common(study_cmd, common, true);

  auto* dp_cmd = app.add_subcommand("dp", "value iteration with a fitted model, one group per action");
  dp_cmd->add_option("model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  add_common(dp_cmd, common, false);

  auto* avem_cmd = app.add_subcommand("avem", "average marginal effect of a history change");
  avem_cmd->add_option("model", model_path, "model JSON")->required()->check(CLI::ExistingFile);
  avem_cmd->add_option("--option", option, "option a")->required();
  avem_cmd->add_option("--x", x, "first history, newest last")->required();
  avem_cmd->add_option("--y", y, "second history, newest last")->required();
  add_common(avem_cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit_cmd) return cmd_fit(common, corpus, complete);
    if (*predict_cmd) return cmd_predict(common, model_path, past, group);
    if (*sim_cmd) return cmd_simulate(common, name, n, groups);
    if (*study_cmd) return cmd_study(common);
    if (*dp_cmd) return cmd_dp(common, model_path);
    if (*avem_cmd) return cmd_avem(common, model_path, option, x, y);
  } catch (const usage_error& e) {
    std::cerr << "agct: " << e.what() << "\n";
    return 1;
  } catch (const error& e) {
    std::cerr << "agct: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "agct: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
