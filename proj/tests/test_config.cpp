#include <gtest/gtest.h>

#include <sstream>

#include "topobi/config.hpp"
#include "topobi/topobi.hpp"

using namespace topobi;

namespace {

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(KeyValue, TrimsSkipsCommentsAndLaterKeysWin) {
  const auto c = parse("# settings\n\n  seed = 7 \nname=a b\nseed=9\n");
  EXPECT_EQ(c.get("seed"), "9");
  EXPECT_EQ(c.get("name"), "a b");
  EXPECT_FALSE(c.has("missing"));
}

TEST(KeyValue, MalformedLineCarriesLineNumber) {
  try {
    parse("a=1\nnot a pair\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_EQ(kind_of([] { parse("=value\n"); }), ErrorKind::Config);
}

TEST(KeyValue, TypedAccessors) {
  const auto c = parse("x=0.25\nn=12\nbad=1.5volts\nneg=-3\n");
  EXPECT_DOUBLE_EQ(c.number("x", 0), 0.25);
  EXPECT_DOUBLE_EQ(c.number("absent", 4.5), 4.5);
  EXPECT_EQ(c.integer("n", 0), 12u);
  EXPECT_EQ(kind_of([&] { c.number("bad", 0); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { c.integer("neg", 0); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { c.integer("x", 0); }), ErrorKind::Config);
}

TEST(KeyValue, HashIgnoresOrderAndFormatting) {
  const auto a = parse("a=1\nb=2\n");
  const auto b = parse("# c\nb = 2\n a=1\n");
  EXPECT_EQ(a.text(), "a=1\nb=2\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), parse("a=1\nb=3\n").hash());
  EXPECT_EQ(a.hash().size(), 64u);
}

TEST(KeyValue, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { KeyValueConfig::load("/nonexistent/topobi.cfg"); }), ErrorKind::Io);
}

TEST(VocabularySettings, LimitsAndPorts) {
  const auto v = Vocabulary::build(vocabulary_config(parse("limit.NM=10\nvin_ports=2\n")));
  EXPECT_EQ(v.device_limit(DeviceFamily::NM), 10);
  EXPECT_EQ(v.vin_ports(), 2);
  EXPECT_EQ(v.size(), 287u - 25 - 2);
}

TEST(VocabularySettings, DefaultsMatchBuiltIn) {
  EXPECT_EQ(Vocabulary::build(vocabulary_config(parse(""))).size(), 287u);
}

TEST(VocabularySettings, UnknownFamilyRejected) {
  EXPECT_EQ(kind_of([] { vocabulary_config(parse("limit.JFET=3\n")); }), ErrorKind::Config);
}

TEST(SizingSettings, OverridesAndValidation) {
  const auto r = sizing_rules(parse("load_f=2e-12\nvolts_per_hop=1.2\n"));
  EXPECT_DOUBLE_EQ(r.load_f, 2e-12);
  EXPECT_DOUBLE_EQ(r.volts_per_hop, 1.2);
  EXPECT_DOUBLE_EQ(r.nmos_width_um, 2.0);
  EXPECT_EQ(kind_of([] { sizing_rules(parse("max_width_um=0\n")); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { sizing_rules(parse("max_refine_iterations=0\n")); }), ErrorKind::Config);
}

TEST(SizingSettings, DefaultsFollowThe180nmProcess) {
  const SizingRules r;
  EXPECT_DOUBLE_EQ(r.nmos_width_um, 2.0);
  EXPECT_DOUBLE_EQ(r.nmos_length_um, 0.18);
  EXPECT_DOUBLE_EQ(r.pmos_width_um, 4.0);
  EXPECT_DOUBLE_EQ(r.pmos_length_um, 0.18);
  EXPECT_DOUBLE_EQ(r.resistance_ohm, 10e3);
  EXPECT_DOUBLE_EQ(r.capacitance_f, 1e-12);
  EXPECT_DOUBLE_EQ(r.inductance_h, 1e-9);
  EXPECT_DOUBLE_EQ(r.load_f, 100e-12);
  EXPECT_DOUBLE_EQ(r.volts_per_hop, 0.9);
  EXPECT_DOUBLE_EQ(r.supply_floor_v, 1.8);
  EXPECT_DOUBLE_EQ(r.max_width_um, 500.0);
  EXPECT_EQ(r.max_refine_iterations, 64);
}
