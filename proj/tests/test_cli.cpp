#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "agct/io.hpp"

using namespace agct;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = std::string(AGCT_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("agct_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string file(const std::string& name, const std::string& text) {
    auto p = (dir / name).string();
    write_file(p, text);
    return p;
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
};

std::string periodic_corpus(std::size_t n) {
  std::string s = "alphabet: 0 1\n";
  for (std::size_t i = 0; i < n; ++i) s += (i % 2 ? "1 " : "0 ");
  return s + "\n";
}

}  // namespace

TEST_F(Cli, FitPeriodicCorpusKeepsTheDepthOneTree) {
  auto corpus = file("periodic.txt", periodic_corpus(5000));
  auto r = run("fit " + corpus + " --out " + path("model.json"));
  ASSERT_EQ(r.status, 0);
  auto model = load_model(path("model.json"));
  std::vector<std::string> labels;
  for (const auto& w : model.shape.nodes()) labels.push_back(w.str(model.alphabet));
  EXPECT_EQ(labels, (std::vector<std::string>{"e", "0", "1"}));
  EXPECT_DOUBLE_EQ(model.config.c, 1.01);
  EXPECT_TRUE(fs::exists(path("model.json.manifest.json")));
  auto manifest = json::parse(read_file(path("model.json.manifest.json")));
  EXPECT_EQ(manifest["inputs"][0]["sha256"], sha256_hex(read_file(corpus)));
}

TEST_F(Cli, PredictMatchesInMemoryBitForBit) {
  auto corpus = file("c.txt", format_corpus(simulate(make_order3_chain(), 2000, 2, 4).sample));
  ASSERT_EQ(run("fit " + corpus + " --complete --out " + path("m.json")).status, 0);
  auto saved = load_model(path("m.json"));
  auto direct = complete_model(fit(parse_corpus(corpus), EstimationConfig{}).model);
  for (const std::string past : {"0 1 1 0", "1,1,1,1,1", "0000", "1"}) {
    auto r = run("predict " + path("m.json") + " --group 1 --past '" + past + "'");
    ASSERT_EQ(r.status, 0) << past;
    auto j = json::parse(r.out);
    std::vector<symbol> p;
    for (char ch : past)
      if (ch == '0' || ch == '1') p.push_back(static_cast<symbol>(ch - '0'));
    auto d = predict(direct, p, 1);
    EXPECT_EQ(j["probs"]["0"].get<double>(), d[0]);
    EXPECT_EQ(j["probs"]["1"].get<double>(), d[1]);
    EXPECT_EQ(predict(saved, p, 1), d);
  }
}

TEST_F(Cli, DotOutput) {
  auto corpus = file("periodic.txt", periodic_corpus(5000));
  auto r = run("fit " + corpus + " --format dot");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("digraph"), std::string::npos);
  EXPECT_NE(r.out.find("\"e\" -> \"0\""), std::string::npos);
}

TEST_F(Cli, SimulateIsSeedDeterministic) {
  auto a = run("simulate --model order3 --n 300 --groups 2 --seed 9");
  auto b = run("simulate --model order3 --n 300 --groups 2 --seed 9");
  auto c = run("simulate --model order3 --n 300 --groups 2 --seed 10");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  auto s = parse_corpus_text(a.out);
  EXPECT_EQ(s.groups(), 2u);
  EXPECT_EQ(s.length(0), 300u);
}

TEST_F(Cli, StudyTableAndJson) {
  auto cfg = file("study.cfg", "model = order3\nn = 300, 600\ngroups = 1\nreplications = 4\n");
  auto t = run("study --config " + cfg + " --format table --threads 2");
  ASSERT_EQ(t.status, 0);
  EXPECT_EQ(t.out.rfind("node", 0), 0u);
  EXPECT_NE(t.out.find("n=600,L=1"), std::string::npos);
  EXPECT_NE(t.out.find("\nothers"), std::string::npos);
  auto j = run("study --config " + cfg + " --format json");
  ASSERT_EQ(j.status, 0);
  EXPECT_EQ(json::parse(j.out).size(), 2u);
}

TEST_F(Cli, DpAndAvem) {
  auto corpus = file("c.txt", format_corpus(simulate(make_order3_chain(), 2000, 2, 4).sample));
  ASSERT_EQ(run("fit " + corpus + " --out " + path("m.json")).status, 0);
  auto cfg = file("dp.cfg", "beta = 0.9\nactions = 2\nreward = 1, 0, 0, 1\n");
  auto d = run("dp " + path("m.json") + " --config " + cfg);
  ASSERT_EQ(d.status, 0);
  auto dj = json::parse(d.out);
  EXPECT_GE(dj["order"].get<int>(), 0);
  EXPECT_LE(dj["residual"].get<double>(), 1e-9);
  auto e = run("avem " + path("m.json") + " --option 1 --x 0011 --y 1100");
  ASSERT_EQ(e.status, 0);
  auto ej = json::parse(e.out);
  EXPECT_EQ(ej["per_agent"].size(), 2u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("--help").status, 0);
  auto bad_cfg = file("bad.cfg", "colour = red\n");
  auto corpus = file("periodic.txt", periodic_corpus(100));
  EXPECT_EQ(run("fit " + corpus + " --config " + bad_cfg).status, 1);
  EXPECT_EQ(run("fit " + corpus + " --config " + file("c2.cfg", "k = 3\nm = 2\n")).status, 1);
  EXPECT_EQ(run("fit " + file("bad.txt", "alphabet: 0 1\n0 1 2\n")).status, 2);
  EXPECT_EQ(run("fit " + file("empty.txt", "alphabet: 0 1\n")).status, 2);
  EXPECT_EQ(run("predict " + file("junk.json", "{}")+ " --past 0").status, 2);
}
