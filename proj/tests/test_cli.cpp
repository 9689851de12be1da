#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace topobi;

namespace {

class Workspace {
 public:
  Workspace() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("topobi_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }

  fs::path operator/(const std::string& name) const { return root_ / name; }

  // Runs the CLI with stdout and stderr captured; returns the exit status.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + TOPOBI_CLI + " " + args + " > " + (root_ / "stdout").string() + " 2> " +
                            (root_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out() const { return slurp(root_ / "stdout"); }
  std::string err() const { return slurp(root_ / "stderr"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  // Manifest over the first `n` test-corpus circuits, by absolute path.
  fs::path manifest(std::size_t n) const {
    std::ifstream in(oracle::corpus_dir() / "manifest.tsv");
    std::ofstream out(root_ / "manifest.tsv");
    std::string line;
    std::size_t rows = 0;
    while (rows < n && std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      out << (oracle::corpus_dir() / line.substr(0, line.find('\t'))).string() << line.substr(line.find('\t'))
          << '\n';
      ++rows;
    }
    return root_ / "manifest.tsv";
  }

 private:
  fs::path root_;
};

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> summary(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (auto eq = line.find('='); eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  return out;
}

}  // namespace

TEST(Usage, MissingSubcommandOrFlagsExitTwo) {
  Workspace w;
  EXPECT_EQ(w.run(""), 2);
  EXPECT_EQ(w.run("frobnicate"), 2);
  EXPECT_EQ(w.run("ingest --out x"), 2);
  EXPECT_EQ(w.run("train --data a --out b --bogus 1"), 2);
}

TEST(Usage, HelpAndVersionExitZero) {
  Workspace w;
  EXPECT_EQ(w.run("--help"), 0);
  EXPECT_NE(w.out().find("ingest"), std::string::npos);
  EXPECT_EQ(w.run("--version"), 0);
  EXPECT_NE(w.out().find("topobi"), std::string::npos);
}

TEST(Usage, DomainFailureExitsOneWithDiagnostics) {
  Workspace w;
  EXPECT_EQ(w.run("ingest --manifest " + q(w / "none.tsv") + " --out " + q(w / "c")), 1);
  EXPECT_NE(w.err().find("Io"), std::string::npos);
  EXPECT_EQ(w.run("generate --type Adder --count 1 --model x --out y"), 1);
  EXPECT_EQ(w.run("generate --type OpAmp --count 1 --out y"), 1);  // neither --model nor --exec
}

TEST(Vocab, DumpToStdoutAndFile) {
  Workspace w;
  ASSERT_EQ(w.run("vocab --dump -"), 0);
  const std::string dump = w.out();
  EXPECT_EQ(dump.rfind("0\tCIRCUIT_OpAmp\tCircuitType\n", 0), 0u);
  ASSERT_EQ(w.run("vocab --dump " + q(w / "v.tsv")), 0);
  EXPECT_EQ(Workspace::slurp(w / "v.tsv"), dump);
  EXPECT_NE(Workspace::slurp(w / "v.tsv.prov").find("config_hash="), std::string::npos);
}

TEST(Vocab, ConfigFileAndEnvironmentDefault) {
  Workspace w;
  std::ofstream(w / "small.cfg") << "limit.NM=5\n";
  ASSERT_EQ(w.run("--config " + q(w / "small.cfg") + " vocab --dump -"), 0);
  const std::string via_flag = w.out();
  EXPECT_NE(via_flag.find("NM5\t"), std::string::npos);
  EXPECT_EQ(via_flag.find("NM6\t"), std::string::npos);
  ASSERT_EQ(w.run("vocab --dump -", "TOPOBI_CONFIG=" + q(w / "small.cfg")), 0);
  EXPECT_EQ(w.out(), via_flag);
}

TEST(Pipeline, TenCircuitsEndToEnd) {
  Workspace w;
  const auto manifest = w.manifest(10);
  ASSERT_EQ(w.run("ingest --manifest " + q(manifest) + " --out " + q(w / "corpus") + " --split 0.9 --seed 1"), 0)
      << w.err();
  EXPECT_TRUE(fs::exists(w / "corpus" / "train_keys.txt"));
  EXPECT_TRUE(fs::exists(w / "corpus" / "provenance.txt"));

  ASSERT_EQ(w.run("augment --corpus " + q(w / "corpus") + " --traversals 3 --renames 1 --seed 2 --out " +
                  q(w / "data.txt")),
            0)
      << w.err();
  const auto data = Workspace::slurp(w / "data.txt");
  EXPECT_FALSE(data.empty());
  EXPECT_TRUE(fs::exists(w / "data.txt.tsv"));
  EXPECT_NE(Workspace::slurp(w / "data.txt.counts.tsv").find("Total\t"), std::string::npos);

  ASSERT_EQ(w.run("train --data " + q(w / "data.txt") + " --order 12 --k 0.1 --out " + q(w / "model.txt")), 0)
      << w.err();
  // The ten circuits cover three types; a long context and a low temperature
  // keep the walks close to the training data so that most of them close.
  ASSERT_EQ(w.run("generate --model " + q(w / "model.txt") +
                  " --type OpAmp,Mirror,Comparator --count 4 --temperature 0.1 --seed 3 --out " + q(w / "gen.txt")),
            0)
      << w.err();

  ASSERT_EQ(w.run("to-spice --in " + q(w / "gen.txt") + " --out " + q(w / "decks")), 0) << w.err();
  // Every Terminated sample has a deck; only the others appear among the failures.
  std::ifstream side(w / "gen.txt.samples.tsv");
  std::string line;
  std::size_t rows = 0, terminated = 0;
  while (std::getline(side, line)) {
    ++rows;
    std::istringstream cols(line);
    std::string id, type, outcome;
    std::getline(cols, id, '\t');
    std::getline(cols, type, '\t');
    std::getline(cols, outcome, '\t');
    if (outcome == "Terminated") {
      ++terminated;
      EXPECT_TRUE(fs::exists(w / "decks" / (id + ".sp"))) << id;
    }
  }
  EXPECT_EQ(rows, 12u);
  EXPECT_GT(terminated, 0u);
  const auto failures = Workspace::slurp(w / "decks" / "failures.tsv");
  EXPECT_EQ(failures.find("TranslationFail"), std::string::npos) << failures;

  ASSERT_EQ(w.run("score --generated " + q(w / "gen.txt") + " --train " + q(w / "corpus") + " --train-data " +
                  q(w / "data.txt") + " --report " + q(w / "report.tsv")),
            0)
      << w.err();
  const auto s = summary(w.out());
  EXPECT_EQ(s.at("samples"), "12");
  EXPECT_NEAR(std::stod(s.at("validity")), static_cast<double>(terminated) / 12, 1e-6);
  EXPECT_TRUE(s.count("ngram_match_rate"));
}

TEST(Pipeline, ScoringTrainingCopiesGivesZeroNovelty) {
  Workspace w;
  ASSERT_EQ(w.run("ingest --manifest " + q(w.manifest(10)) + " --out " + q(w / "corpus") + " --split 1.0"), 0);
  ASSERT_EQ(w.run("augment --corpus " + q(w / "corpus") + " --traversals 2 --out " + q(w / "data.txt")), 0);
  ASSERT_EQ(w.run("score --generated " + q(w / "data.txt") + " --train " + q(w / "corpus") + " --report " +
                  q(w / "r.tsv")),
            0)
      << w.err();
  const auto s = summary(w.out());
  EXPECT_EQ(s.at("validity"), "1.000000");
  EXPECT_EQ(s.at("novelty"), "0.000000");
  EXPECT_EQ(Workspace::slurp(w / "r.tsv.summary"), w.out());
}

TEST(Generate, SameSeedByteIdenticalAcrossRunsAndJobCounts) {
  Workspace w;
  ASSERT_EQ(w.run("ingest --manifest " + q(w.manifest(10)) + " --out " + q(w / "corpus")), 0);
  ASSERT_EQ(w.run("augment --corpus " + q(w / "corpus") + " --out " + q(w / "data.txt")), 0);
  ASSERT_EQ(w.run("train --data " + q(w / "data.txt") + " --out " + q(w / "m.txt")), 0);
  const std::string base = "generate --model " + q(w / "m.txt") + " --type OpAmp --count 3 --seed 7 --out ";
  ASSERT_EQ(w.run(base + q(w / "a.txt")), 0);
  ASSERT_EQ(w.run(base + q(w / "b.txt")), 0);
  ASSERT_EQ(w.run("--jobs 3 " + base + q(w / "c.txt")), 0);
  const auto a = Workspace::slurp(w / "a.txt");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, Workspace::slurp(w / "b.txt"));
  EXPECT_EQ(a, Workspace::slurp(w / "c.txt"));
  EXPECT_EQ(Workspace::slurp(w / "a.txt.samples.tsv"), Workspace::slurp(w / "b.txt.samples.tsv"));
  ASSERT_EQ(w.run(base.substr(0, base.find("--seed")) + "--seed 8 --out " + q(w / "d.txt")), 0);
  EXPECT_NE(a, Workspace::slurp(w / "d.txt"));
}

TEST(Generate, CountTotalSplitsEvenly) {
  Workspace w;
  ASSERT_EQ(w.run("ingest --manifest " + q(w.manifest(10)) + " --out " + q(w / "corpus")), 0);
  ASSERT_EQ(w.run("augment --corpus " + q(w / "corpus") + " --out " + q(w / "data.txt")), 0);
  ASSERT_EQ(w.run("train --data " + q(w / "data.txt") + " --out " + q(w / "m.txt")), 0);
  ASSERT_EQ(w.run("generate --model " + q(w / "m.txt") + " --type all --count-total 20 --max-length 30 --out " +
                  q(w / "g.txt")),
            0);
  std::map<std::string, int> per_type;
  std::ifstream side(w / "g.txt.samples.tsv");
  std::string id, type, rest;
  while (std::getline(side, id, '\t') && std::getline(side, type, '\t') && std::getline(side, rest)) ++per_type[type];
  EXPECT_EQ(per_type.size(), 15u);
  for (auto [t, n] : per_type) EXPECT_EQ(n, t == "OpAmp" || t == "Mirror" || t == "Comparator" || t == "Mixer" ||
                                                    t == "LDO"
                                                ? 2
                                                : 1)
      << t;
}

TEST(Generate, ExternalPeer) {
  Workspace w;
  ASSERT_EQ(w.run("generate --exec \"" + std::string(TOPOBI_FAKE_PEER) +
                  " uniform\" --type Filter --count 2 --max-length 40 --out " + q(w / "g.txt")),
            0)
      << w.err();
  for (auto const& s : [&] {
         std::ifstream in(w / "g.txt");
         return read_sequences(in, Vocabulary::build());
       }())
    EXPECT_EQ(replay(Vocabulary::build(), s, false), std::nullopt);
  EXPECT_EQ(w.run("generate --exec \"" + std::string(TOPOBI_FAKE_PEER) +
                  " malformed\" --type Filter --count 1 --out " + q(w / "h.txt")),
            1);
  EXPECT_NE(w.err().find("Session"), std::string::npos);
}

TEST(ToSpice, StrictFlagTurnsFailuresIntoExitOne) {
  Workspace w;
  std::ofstream(w / "s.txt") << "CIRCUIT_Mirror VSS M_SB NM1 M_GD NET1 M_G NM2 M_D VOUT1 M_D NM2 M_SB VSS\n"
                             << "CIRCUIT_Mirror VSS M_SB NM1 M_GD NET1\n";
  ASSERT_EQ(w.run("to-spice --in " + q(w / "s.txt") + " --out " + q(w / "d")), 0);
  EXPECT_TRUE(fs::exists(w / "d" / "1.sp"));
  EXPECT_NE(Workspace::slurp(w / "d" / "failures.tsv").find("2\tTranslationFail"), std::string::npos);
  EXPECT_EQ(w.run("to-spice --strict true --in " + q(w / "s.txt") + " --out " + q(w / "d")), 1);
}
