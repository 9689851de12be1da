#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"

using namespace topobi;

namespace {

const Vocabulary& vocab() {
  static const Vocabulary v = Vocabulary::build();
  return v;
}

TokenId id(const char* text) { return vocab().id_of(text); }

GrammarDecoder decode(const std::string& type, std::initializer_list<const char*> tokens) {
  GrammarDecoder d = init_decode(vocab(), type);
  for (const char* t : tokens) d.apply(id(t));
  return d;
}

std::set<std::string> admitted(const GrammarDecoder& d) {
  std::set<std::string> out;
  for (TokenId t : mask_ids(d.mask())) out.insert(vocab()[t].text);
  return out;
}

// Random policy that favors closing the circuit: TRUNCATE first, then
// devices and nets already in play. Enough to terminate often.
class ClosingPolicy {
 public:
  explicit ClosingPolicy(std::uint64_t seed) : rng_(seed) {}

  TokenId pick(const GrammarDecoder& d) {
    const auto ids = mask_ids(d.mask());
    const auto& b = d.buffers();
    if (std::find(ids.begin(), ids.end(), vocab().truncate_id()) != ids.end() && rng_.unit() < 0.8)
      return vocab().truncate_id();
    std::vector<TokenId> preferred;
    for (TokenId t : ids) {
      const auto& tok = vocab()[t];
      if ((tok.category == TokenCategory::Device && b.devices[t].referenced) ||
          (tok.category == TokenCategory::Net && b.visited_nets[t]))
        preferred.push_back(t);
    }
    const auto& pool = (!preferred.empty() && rng_.unit() < 0.85) ? preferred : ids;
    return pool[rng_.below(pool.size())];
  }

 private:
  Rng rng_;
};

}  // namespace

TEST(InitDecode, OpAmp) {
  const auto d = init_decode(vocab(), "OpAmp");
  EXPECT_EQ(d.state(), DecodeState::CircuitTypeVss);
  EXPECT_EQ(d.buffers().history[0], id("CIRCUIT_OpAmp"));
  EXPECT_EQ(d.buffers().history[1], id("VSS"));
}

TEST(InitDecode, General) {
  const auto d = init_decode(vocab(), "General");
  EXPECT_EQ(d.state(), DecodeState::CircuitTypeVss);
  EXPECT_EQ(d.buffers().history[0], id("CIRCUIT_General"));
}

TEST(InitDecode, UnknownTypeRejected) { EXPECT_THROW(init_decode(vocab(), "Adder"), Error); }

TEST(Mask, AfterTypeAndVssOnlyPinsAreAdmissible) {
  const auto d = init_decode(vocab(), "Mirror");
  const auto ids = mask_ids(d.mask());
  EXPECT_EQ(ids.size(), 27u);
  for (TokenId t : ids) EXPECT_EQ(vocab().category(t), TokenCategory::Pin);
}

TEST(Mask, CircuitTypeTokensStayMasked) {
  const auto d = decode("Mirror", {"M_SB", "NM1", "M_GD", "NET1"});
  for (CircuitType t : kAllCircuitTypes) EXPECT_FALSE(d.admits(vocab().circuit_type_id(t)));
}

// After arriving at NM1 over its S/B edge, fresh bindings may only use G and
// D; the arrival pin itself stays admissible as a revisit back to VSS.
TEST(Mask, DeviceJustEmittedAdmitsUnusedRolesOrTheArrivalEdge) {
  const auto d = decode("Mirror", {"M_SB", "NM1"});
  EXPECT_EQ(d.state(), DecodeState::EdgeDevice);
  EXPECT_EQ(admitted(d), (std::set<std::string>{"M_G", "M_D", "M_GD", "M_SB"}));
  auto back = d;
  back.apply(id("M_SB"));
  EXPECT_EQ(admitted(back), std::set<std::string>{"VSS"});
}

TEST(Mask, SaturatedDeviceOffersOnlyItsExistingEdge) {
  const auto d = decode("General", {"M_GDSB", "NM1"});
  EXPECT_EQ(admitted(d), std::set<std::string>{"M_GDSB"});
  // From VSS, NM1 cannot be reached over any other pin set.
  auto at_vss = d;
  at_vss.apply(id("M_GDSB"));
  at_vss.apply(id("VSS"));
  at_vss.apply(id("M_G"));
  EXPECT_FALSE(at_vss.admits(id("NM1")));
  EXPECT_TRUE(at_vss.admits(id("NM2")));
}

TEST(Mask, NetStepOffersVisitedSuppliesPortsAndNextInternal) {
  const auto d = decode("Mirror", {"M_SB", "NM1", "M_GD", "NET1", "M_G", "NM2", "M_D"});
  const auto a = admitted(d);
  EXPECT_TRUE(a.count("NET1") == 0);  // NM2 already has G there; D would rebind
  EXPECT_TRUE(a.count("NET2"));
  EXPECT_FALSE(a.count("NET3"));
  EXPECT_TRUE(a.count("VDD"));
  EXPECT_TRUE(a.count("VOUT4"));
  EXPECT_TRUE(a.count("VSS"));
}

TEST(Mask, MaskedTokensAreNeverAdmissible) {
  const auto d = decode("Mirror", {"M_SB", "NM1"});
  const auto m = d.mask();
  for (TokenId t = 0; t < vocab().size(); ++t) EXPECT_EQ(m[t], d.admits(t));
}

TEST(Apply, PinThenDeviceThenPinProgression) {
  auto d = decode("OpAmp", {"M_SB"});
  EXPECT_EQ(d.state(), DecodeState::NetEdge);
  d.apply(id("NM1"));
  EXPECT_EQ(d.state(), DecodeState::EdgeDevice);
  EXPECT_EQ(d.buffers().last_device, id("NM1"));
  d.apply(id("M_G"));
  EXPECT_EQ(d.state(), DecodeState::DeviceEdge);
}

TEST(Apply, VssAfterPinEntersEdgeVss) {
  auto d = decode("OpAmp", {"M_SB", "NM1", "M_G", "NET1", "M_G", "NM2", "M_SB", "VSS"});
  EXPECT_EQ(d.state(), DecodeState::EdgeVss);
  d = decode("OpAmp", {"M_SB", "NM1", "M_G", "NET1"});
  EXPECT_EQ(d.state(), DecodeState::EdgeNet);
}

TEST(Apply, CircuitTypeMidSequenceIsGrammarViolation) {
  auto d = decode("OpAmp", {"M_SB", "NM1", "M_GD", "NET1"});
  try {
    d.apply(id("CIRCUIT_OpAmp"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GrammarViolation);
  }
}

TEST(Apply, RecordsTriplesAndVisitedNets) {
  const auto d = decode("Mirror", {"M_SB", "NM1", "M_GD", "NET1"});
  auto const& b = d.buffers();
  EXPECT_TRUE(b.associations.count({id("NM1"), id("M_SB"), id("VSS")}));
  EXPECT_TRUE(b.associations.count({id("NM1"), id("M_GD"), id("NET1")}));
  EXPECT_TRUE(b.visited_nets[id("NET1")]);
  EXPECT_FALSE(b.visited_nets[id("NET2")]);
}

TEST(MayTerminate, CompletedMirrorAtVss) {
  const auto d = decode("Mirror", {"M_SB", "NM1", "M_GD", "NET1", "M_G", "NM2", "M_D", "VOUT1", "M_D", "NM2",
                                   "M_SB", "VSS"});
  EXPECT_TRUE(d.may_terminate());
  EXPECT_TRUE(d.admits(vocab().truncate_id()));
}

TEST(MayTerminate, IncompleteDevice) {
  const auto d = decode("Mirror", {"M_SB", "NM1", "M_GD", "NET1", "M_G", "NM2", "M_SB", "VSS"});
  EXPECT_FALSE(d.may_terminate());
  EXPECT_FALSE(d.admits(vocab().truncate_id()));
}

TEST(MayTerminate, CompleteButAwayFromVss) {
  const auto d = decode("Mirror", {"M_SB", "NM1", "M_GD", "NET1", "M_G", "NM2", "M_SB", "VSS", "M_SB", "NM2",
                                   "M_D", "VOUT1"});
  EXPECT_FALSE(d.may_terminate());
}

TEST(MayTerminate, FloatingInternalNetBlocks) {
  const auto d = decode("General", {"M_SB", "NM1", "M_GD", "NET1", "M_GD", "NM1", "M_SB", "VSS"});
  EXPECT_FALSE(d.may_terminate());
}

TEST(Replay, EveryCorpusWalkIsAdmissibleStepByStep) {
  const auto corpus = oracle::test_corpus(vocab());
  for (auto const& e : corpus.entries)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = serialize_closed_walk(vocab(), e.graph, seed, e.circuit_type);
      ASSERT_EQ(replay(vocab(), s), std::nullopt) << e.source_path << " seed " << seed;
    }
}

TEST(Soundness, EveryTerminatedRandomDecodeParsesAndPassesErc) {
  int terminated = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    ClosingPolicy policy(seed);
    GrammarDecoder d(vocab(), kAllCircuitTypes[seed % kCircuitTypeCount]);
    CircuitSequence s;
    s.tokens = {d.buffers().history[0], d.buffers().history[1]};
    while (!d.terminated() && s.tokens.size() < 400) {
      const TokenId t = policy.pick(d);
      ASSERT_TRUE(d.admits(t));
      d.apply(t);
      if (t != vocab().truncate_id()) s.tokens.push_back(t);
    }
    if (!d.terminated()) continue;
    ++terminated;
    ASSERT_NO_THROW(parse_sequence(vocab(), s)) << to_text(vocab(), s);
    ASSERT_TRUE(sequence_erc(vocab(), s).ok) << to_text(vocab(), s);
  }
  EXPECT_GT(terminated, 200);
}

TEST(Buffers, RolesAreSingleAssignedAndMatchAssociations) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    ClosingPolicy policy(seed + 10000);
    GrammarDecoder d(vocab(), CircuitType::OpAmp);
    for (int step = 0; step < 200 && !d.terminated(); ++step) d.apply(policy.pick(d));
    auto const& b = d.buffers();
    std::map<TokenId, PinSet> projected;
    std::map<std::pair<TokenId, PinSet>, TokenId> role_net;
    for (auto [dev, pin, net] : b.associations) {
      const PinSet pins = vocab()[pin].pins;
      projected[dev] |= pins;
      if (is_passive(vocab()[pin].pin_class)) continue;
      for (PinSet bit = 1; bit <= 8; bit <<= 1) {
        if (!(pins & bit)) continue;
        auto [it, fresh] = role_net.emplace(std::pair{dev, bit}, net);
        ASSERT_TRUE(fresh || it->second == net);
      }
    }
    for (auto [dev, used] : projected) EXPECT_EQ(b.devices[dev].used, used);
  }
}

// The next state depends only on (state, category of the token, token == VSS).
TEST(Transitions, StateIsAFunctionOfStateAndTokenClass) {
  std::map<std::tuple<int, int, bool>, DecodeState> seen;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    ClosingPolicy policy(seed + 20000);
    GrammarDecoder d(vocab(), CircuitType::Filter);
    for (int step = 0; step < 200 && !d.terminated(); ++step) {
      const TokenId t = policy.pick(d);
      const auto key = std::tuple{static_cast<int>(d.state()), static_cast<int>(vocab().category(t)),
                                  t == vocab().vss_id()};
      d.apply(t);
      if (d.terminated()) break;
      auto [it, fresh] = seen.emplace(key, d.state());
      ASSERT_TRUE(fresh || it->second == d.state());
    }
  }
  EXPECT_GE(seen.size(), 6u);
}
