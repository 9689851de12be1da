#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"

using namespace topobi;
using namespace topobi::role;

namespace {

const Vocabulary& vocab() {
  static const Vocabulary v = Vocabulary::build();
  return v;
}

// Vocabulary with room for long chains and many devices of one family.
const Vocabulary& wide_vocab() {
  static const Vocabulary v = [] {
    VocabularyConfig c;
    for (auto& [name, limit] : c.device_limits)
      if (name == "R" || name == "NM") limit = 400;
    c.internal_nets = 400;
    return Vocabulary::build(c);
  }();
  return v;
}

Corpus single_entry_corpus(const CircuitGraph& g, CircuitType type) {
  Corpus c;
  CorpusEntry e;
  e.source_path = "one.sp";
  e.graph = g;
  e.graph.circuit_type = type;
  e.circuit_type = type;
  e.key = canonical_key(g);
  c.entries.push_back(e);
  assign_splits(c, 1.0, 0);
  return c;
}

}  // namespace

TEST(Traversals, MirrorFiveWalksAllRoundTrip) {
  const auto g = oracle::mirror();
  const auto set = augment_traversals(vocab(), g, 5, 1, CircuitType::Mirror);
  ASSERT_GE(set.traversals.size(), 1u);
  EXPECT_LE(set.traversals.size(), 5u);
  std::set<std::vector<TokenId>> distinct;
  for (auto const& t : set.traversals) {
    EXPECT_TRUE(is_isomorphic(parse_sequence(vocab(), t.sequence), g));
    EXPECT_TRUE(sequence_erc(vocab(), t.sequence).ok);
    distinct.insert(t.sequence.tokens);
  }
  EXPECT_EQ(distinct.size(), set.traversals.size());
}

TEST(Traversals, ZeroAttemptsGiveNothing) {
  const auto set = augment_traversals(vocab(), oracle::mirror(), 0, 1);
  EXPECT_TRUE(set.traversals.empty());
  EXPECT_TRUE(set.diagnostics.empty());
}

TEST(Traversals, OverflowIsReportedNotReturned) {
  CircuitGraph g;
  for (int i = 1; i <= 300; ++i) {
    g.connect({DeviceFamily::R, i}, kTerminal, i == 1 ? NetId::vss() : NetId::internal(i - 1));
    g.connect({DeviceFamily::R, i}, kTerminal, i == 300 ? NetId::vss() : NetId::internal(i));
  }
  const auto set = augment_traversals(wide_vocab(), g, 5, 0);
  EXPECT_TRUE(set.traversals.empty());
  ASSERT_FALSE(set.diagnostics.empty());
  EXPECT_NE(set.diagnostics[0].find("SequenceOverflow"), std::string::npos);
}

TEST(Traversals, ChildSeedsAreRecorded) {
  const auto set = augment_traversals(vocab(), oracle::driven_mirror(), 4, 77);
  for (auto const& t : set.traversals)
    EXPECT_EQ(serialize_closed_walk(vocab(), oracle::driven_mirror(), t.seed), t.sequence);
}

TEST(Rename, ExplicitMapPreservesStructure) {
  const auto s = serialize_closed_walk(vocab(), oracle::driven_mirror(), 0);
  Renaming r;
  r[static_cast<std::size_t>(DeviceFamily::PM)][1] = 7;
  const auto renamed = apply_renaming(vocab(), s, r);
  EXPECT_EQ(renamed.tokens.size(), s.tokens.size());
  const auto text = to_text(vocab(), renamed);
  EXPECT_NE(text.find("PM7"), std::string::npos);
  EXPECT_EQ(text.find("PM1 "), std::string::npos);
  EXPECT_TRUE(is_isomorphic(parse_sequence(vocab(), renamed), oracle::driven_mirror()));
}

TEST(Rename, RandomRenamingIsInjectiveAndWithinLimits) {
  const auto corpus = oracle::test_corpus(vocab());
  for (auto const& e : corpus.entries) {
    const auto s = serialize_closed_walk(vocab(), e.graph, 0, e.circuit_type);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = sample_renaming(vocab(), s, seed);
      for (DeviceFamily f : kAllFamilies) {
        std::set<int> images;
        for (auto [from, to] : r[static_cast<std::size_t>(f)]) {
          EXPECT_GE(to, 1);
          EXPECT_LE(to, vocab().device_limit(f));
          EXPECT_TRUE(images.insert(to).second);
        }
      }
      const auto renamed = apply_renaming(vocab(), s, r);
      EXPECT_TRUE(is_isomorphic(parse_sequence(vocab(), renamed), e.graph)) << e.source_path;
      EXPECT_EQ(replay(vocab(), renamed), std::nullopt) << e.source_path;
    }
  }
}

TEST(Rename, TooManyDevicesForCapIsCapacityError) {
  CircuitGraph g;
  for (int i = 1; i <= 36; ++i) g.connect({DeviceFamily::NM, i}, kGate | kDrain | kSource | kBody, NetId::vss());
  const auto s = serialize_closed_walk(wide_vocab(), g, 0);
  std::array<int, kFamilyCount> caps;
  caps.fill(400);
  caps[static_cast<std::size_t>(DeviceFamily::NM)] = 35;
  try {
    sample_renaming(wide_vocab(), s, 0, &caps);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Capacity);
  }
  caps[static_cast<std::size_t>(DeviceFamily::NM)] = 36;
  EXPECT_NO_THROW(sample_renaming(wide_vocab(), s, 0, &caps));
}

// A single device's new index should be uniform over 1..limit.
TEST(Rename, SingleDeviceImageIsUniform) {
  const auto s = oracle::seq(vocab(), "CIRCUIT_General VSS M_GDSB NM1 M_GDSB VSS");
  const int limit = vocab().device_limit(DeviceFamily::NM);
  std::vector<int> hist(static_cast<std::size_t>(limit) + 1, 0);
  const int draws = 1000 * limit;
  for (int seed = 0; seed < draws; ++seed)
    ++hist[static_cast<std::size_t>(sample_renaming(vocab(), s, static_cast<std::uint64_t>(seed))[0].at(1))];
  EXPECT_EQ(hist[0], 0);
  for (int i = 1; i <= limit; ++i) {
    EXPECT_GT(hist[static_cast<std::size_t>(i)], 850) << i;
    EXPECT_LT(hist[static_cast<std::size_t>(i)], 1150) << i;
  }
}

TEST(Expand, OneCircuitThreeTraversalsTwoRenamesAtMostSix) {
  const auto corpus = single_entry_corpus(oracle::driven_mirror(), CircuitType::Mirror);
  AugmentConfig cfg;
  cfg.traversals = 3;
  cfg.renames = 2;
  const auto data = expand_corpus(vocab(), corpus, cfg);
  EXPECT_GE(data.rows.size(), 1u);
  EXPECT_LE(data.rows.size(), 6u);
  const auto key = canonical_key(oracle::driven_mirror());
  for (auto const& row : data.rows) {
    EXPECT_EQ(canonical_key(parse_sequence(vocab(), row.sequence)), key);
    EXPECT_TRUE(row.rename_seed.has_value());
  }
  EXPECT_EQ(data.circuits[static_cast<std::size_t>(CircuitType::Mirror)], 1u);
  EXPECT_EQ(data.sequences[static_cast<std::size_t>(CircuitType::Mirror)], data.rows.size());
}

TEST(Expand, ZeroRenamesKeepsOriginalIndices) {
  const auto corpus = single_entry_corpus(oracle::mirror(), CircuitType::Mirror);
  AugmentConfig cfg;
  cfg.traversals = 4;
  cfg.renames = 0;
  const auto data = expand_corpus(vocab(), corpus, cfg);
  for (auto const& row : data.rows) {
    EXPECT_FALSE(row.rename_seed);
    for (TokenId t : row.sequence.tokens)
      if (vocab().category(t) == TokenCategory::Device) {
        EXPECT_LE(vocab()[t].device.index, 2);
      }
  }
}

TEST(Expand, OnlyTrainSplitContributes) {
  const auto corpus = oracle::test_corpus(vocab(), 0.5, 2);
  AugmentConfig cfg;
  cfg.traversals = 2;
  const auto data = expand_corpus(vocab(), corpus, cfg);
  std::set<std::string> train_paths;
  for (auto const& e : corpus.entries)
    if (e.split == Split::Train) train_paths.insert(e.source_path);
  for (auto const& row : data.rows) EXPECT_TRUE(train_paths.count(row.source_path)) << row.source_path;
  for (auto c : data.circuits) EXPECT_EQ(c, 2u);
}

TEST(Expand, SameOutputForAnyJobCount) {
  const auto corpus = oracle::test_corpus(vocab());
  AugmentConfig cfg;
  cfg.traversals = 3;
  cfg.renames = 2;
  cfg.seed = 5;
  const auto serial = expand_corpus(vocab(), corpus, cfg);
  cfg.jobs = 4;
  const auto parallel = expand_corpus(vocab(), corpus, cfg);
  EXPECT_EQ(sequences_of(serial), sequences_of(parallel));
  EXPECT_EQ(serial.sequences, parallel.sequences);
}

TEST(Expand, PerTypeOverrides) {
  const auto corpus = oracle::test_corpus(vocab());
  AugmentConfig cfg;
  cfg.traversals = 1;
  cfg.renames = 0;
  cfg.per_type[CircuitType::OpAmp] = {6, 3};
  const auto data = expand_corpus(vocab(), corpus, cfg);
  EXPECT_LE(data.sequences[static_cast<std::size_t>(CircuitType::Mirror)], 4u);
  EXPECT_GT(data.sequences[static_cast<std::size_t>(CircuitType::OpAmp)], 4u);
}

TEST(Provenance, OneLinePerRow) {
  const auto corpus = single_entry_corpus(oracle::mirror(), CircuitType::Mirror);
  AugmentConfig cfg;
  cfg.traversals = 2;
  cfg.renames = 0;
  const auto data = expand_corpus(vocab(), corpus, cfg);
  std::ostringstream out;
  write_provenance(out, data);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(line.rfind(std::to_string(n) + "\tone.sp\tMirror\t", 0), 0u) << line;
    EXPECT_EQ(line.back(), '-');
  }
  EXPECT_EQ(n, data.rows.size());
}

TEST(Provenance, TypeTableTotals) {
  std::array<std::size_t, kCircuitTypeCount> c{}, s{};
  c[0] = 2;
  s[0] = 10;
  c[14] = 1;
  s[14] = 3;
  std::ostringstream out;
  write_type_table(out, c, s);
  const auto text = out.str();
  EXPECT_EQ(text.rfind("type\tcircuits\tsequences\nOpAmp\t2\t10\n", 0), 0u);
  EXPECT_NE(text.find("General\t1\t3\nTotal\t3\t13\n"), std::string::npos);
}
