#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "topobi/error.hpp"
#include "topobi/graph.hpp"
#include "topobi/ingest.hpp"
#include "topobi/sequence.hpp"

namespace topobi {

struct SizingRules {
  double nmos_width_um = 2.0;
  double nmos_length_um = 0.18;
  double pmos_width_um = 4.0;
  double pmos_length_um = 0.18;
  double resistance_ohm = 10e3;
  double capacitance_f = 1e-12;
  double inductance_h = 1e-9;
  double load_f = 100e-12;
  double volts_per_hop = 0.9;
  double supply_floor_v = 1.8;
  double max_width_um = 500.0;
  int max_refine_iterations = 64;

  void validate() const {
    for (double v : {nmos_width_um, nmos_length_um, pmos_width_um, pmos_length_um, resistance_ohm,
                     capacitance_f, inductance_h, load_f, volts_per_hop, supply_floor_v, max_width_um})
      if (!(v > 0)) throw Error(ErrorKind::Config, "sizing rules must be positive");
    if (max_refine_iterations < 1) throw Error(ErrorKind::Config, "refine iteration cap must be >= 1");
  }
};

namespace detail {

// Roles that carry current between two nets.
inline bool conducting(PinClass cls, PinSet pins) {
  switch (cls) {
    case PinClass::Mos: return (pins & (role::kDrain | role::kSource)) != 0;
    case PinClass::Bjt: return (pins & (role::kCollector | role::kEmitter)) != 0;
    default: return pins != 0;
  }
}

// Net-to-net hop distances from `start`. A hop crosses one device from a
// conducting edge to another conducting edge; when `free_first_hop` is set,
// the edge leaving `start` may use any role (a gate-driven port still sits
// one device away from the rail that device conducts to).
inline std::vector<int> net_distances(const CircuitGraph& g, std::size_t start, bool free_first_hop) {
  constexpr int inf = std::numeric_limits<int>::max();
  std::vector<int> dist(g.nets().size(), inf);
  std::queue<std::size_t> todo;
  dist[start] = 0;
  todo.push(start);
  while (!todo.empty()) {
    const std::size_t n = todo.front();
    todo.pop();
    for (std::size_t e : g.net_edges(n)) {
      const PinEdge& in = g.edges()[e];
      const PinClass cls = pin_class(g.devices()[in.device].family);
      if (!conducting(cls, in.pins) && !(free_first_hop && n == start)) continue;
      for (std::size_t f : g.device_edges(in.device)) {
        const PinEdge& out = g.edges()[f];
        if (f == e || !conducting(cls, out.pins) || dist[out.net] != inf) continue;
        dist[out.net] = dist[n] + 1;
        todo.push(out.net);
      }
    }
  }
  return dist;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Engineering notation with SPICE suffixes (10k, 1p, 100p, 1n).
inline std::string spice_value(double v) {
  static const std::pair<double, const char*> scales[] = {
      {1e12, "T"}, {1e9, "G"}, {1e6, "Meg"}, {1e3, "k"}, {1, ""},
      {1e-3, "m"}, {1e-6, "u"}, {1e-9, "n"},  {1e-12, "p"}, {1e-15, "f"}};
  if (v == 0) return "0";
  for (auto [scale, suffix] : scales)
    if (std::fabs(v) >= scale * (1 - 1e-12)) return format_number(v / scale) + suffix;
  return format_number(v);
}

}  // namespace detail

// Fewest devices on a conducting path between VDD and VSS.
inline int infer_supply_hops(const CircuitGraph& g) {
  const auto vss = g.find_net(NetId::vss());
  const auto vdd = g.find_net(NetId::vdd());
  if (!vss || !vdd) throw Error(ErrorKind::NoSupplyPath, "circuit lacks VDD or VSS");
  const auto dist = detail::net_distances(g, *vdd, false);
  if (dist[*vss] == std::numeric_limits<int>::max())
    throw Error(ErrorKind::NoSupplyPath, "no conducting path between VDD and VSS");
  return dist[*vss];
}

struct PortBias {
  NetId port;
  double volts = 0;
};

struct BiasResult {
  std::vector<PortBias> biases;  // VIN ports in net order
  std::vector<std::string> warnings;
};

// Input ports sit at a fraction of the supply given by their hop distance to
// the rail selected by adjacent device polarity: n-type neighbors reference
// VSS, p-type neighbors reference VDD, mixed or passive-only neighbors take
// mid-rail. `supply_hops` normalizes the distance.
inline BiasResult assign_port_bias(const CircuitGraph& g, double vdd_volts, int supply_hops) {
  constexpr int inf = std::numeric_limits<int>::max();
  BiasResult out;
  const double span = static_cast<double>(std::max(supply_hops, 1) + 1);
  const auto vss = g.find_net(NetId::vss());
  const auto vdd = g.find_net(NetId::vdd());
  for (std::size_t n = 0; n < g.nets().size(); ++n) {
    const NetId id = g.nets()[n];
    if (id.kind != NetKind::VIN) continue;
    bool n_type = false, p_type = false;
    for (std::size_t e : g.net_edges(n)) {
      const DeviceFamily f = g.devices()[g.edges()[e].device].family;
      n_type |= f == DeviceFamily::NM || f == DeviceFamily::NPN;
      p_type |= f == DeviceFamily::PM;
    }
    const auto dist = detail::net_distances(g, n, true);
    double volts = vdd_volts / 2;
    if (n_type != p_type) {
      const auto rail = n_type ? vss : vdd;
      const int d = rail ? dist[*rail] : inf;
      if (d == inf) {
        out.warnings.push_back(id.text() + " has no path to " + (n_type ? "VSS" : "VDD") +
                               "; biased at mid-rail");
      } else {
        const double ratio = std::min(1.0, static_cast<double>(d) / span);
        volts = n_type ? vdd_volts * ratio : vdd_volts * (1 - ratio);
      }
    } else if (!n_type) {
      const bool isolated = (!vss || dist[*vss] == inf) && (!vdd || dist[*vdd] == inf);
      if (isolated) out.warnings.push_back(id.text() + " is isolated from both rails; biased at mid-rail");
    }
    out.biases.push_back({id, volts});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deck

struct SpiceCard {
  DeviceId device;
  std::vector<NetId> nodes;  // D G S B / C B E / P N / A B
  double width_um = 0;       // MOSFETs only
  double length_um = 0;
  double value = 0;          // passives, SI units
};

struct SpiceNetlist {
  std::optional<CircuitType> circuit_type;
  std::vector<SpiceCard> devices;
  double vdd_volts = 0;
  bool has_vdd = false;
  std::vector<PortBias> biases;
  std::vector<NetId> loads;  // VOUT ports
  double load_f = 100e-12;
  std::vector<std::string> warnings;

  std::string render() const {
    std::ostringstream out;
    out << "* topobi deck";
    if (circuit_type) out << " CIRCUIT_" << circuit_type_name(*circuit_type);
    out << '\n';
    bool used[kFamilyCount] = {};
    for (auto const& c : devices) used[static_cast<std::size_t>(c.device.family)] = true;
    auto fam = [&](DeviceFamily f) { return used[static_cast<std::size_t>(f)]; };
    if (fam(DeviceFamily::NM))
      out << ".model NMOS_L1 NMOS (LEVEL=1 VTO=0.45 KP=270u GAMMA=0.45 PHI=0.8 LAMBDA=0.08 TOX=4n)\n";
    if (fam(DeviceFamily::PM))
      out << ".model PMOS_L1 PMOS (LEVEL=1 VTO=-0.45 KP=70u GAMMA=0.4 PHI=0.8 LAMBDA=0.1 TOX=4n)\n";
    if (fam(DeviceFamily::NPN)) out << ".model NPN_DEF NPN (IS=1e-16 BF=100 VAF=50)\n";
    if (fam(DeviceFamily::DIO)) out << ".model DMOD D (IS=1e-14 N=1)\n";
    for (auto const& c : devices) {
      out << device_card_name(c.device);
      for (auto const& n : c.nodes) out << ' ' << net_card_name(n);
      switch (c.device.family) {
        case DeviceFamily::NM:
        case DeviceFamily::PM:
          out << (c.device.family == DeviceFamily::NM ? " NMOS_L1" : " PMOS_L1")
              << " W=" << detail::format_number(c.width_um) << "u L=" << detail::format_number(c.length_um)
              << 'u';
          break;
        case DeviceFamily::NPN: out << " NPN_DEF"; break;
        case DeviceFamily::DIO: out << " DMOD"; break;
        default: out << ' ' << detail::spice_value(c.value); break;
      }
      out << '\n';
    }
    if (has_vdd) out << "VSUPPLY VDD 0 DC " << detail::format_number(vdd_volts) << '\n';
    for (auto const& b : biases)
      out << 'V' << b.port.text() << ' ' << b.port.text() << " 0 DC " << detail::format_number(b.volts) << '\n';
    for (auto const& p : loads)
      out << "CLOAD_" << p.text() << ' ' << p.text() << " 0 " << detail::spice_value(load_f) << '\n';
    out << ".op\n.end\n";
    return out.str();
  }
};

struct RefineResult {
  int iterations = 0;
  bool converged = false;
};

// Sweeps MOSFETs in card order: a device's width becomes the sum of widths of
// other same-family MOSFETs whose source sits on its drain net, clamped to the
// maximum. With no such devices the width is kept. Widths never shrink.
inline RefineResult refine_widths(SpiceNetlist& deck, double max_width_um = 500.0, int max_iterations = 64) {
  RefineResult result;
  auto is_mos = [](const SpiceCard& c) {
    return c.device.family == DeviceFamily::NM || c.device.family == DeviceFamily::PM;
  };
  for (result.iterations = 1; result.iterations <= max_iterations; ++result.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < deck.devices.size(); ++i) {
      SpiceCard& c = deck.devices[i];
      if (!is_mos(c)) continue;
      const NetId drain = c.nodes[0];
      double sum = 0;
      bool any = false;
      for (std::size_t j = 0; j < deck.devices.size(); ++j) {
        const SpiceCard& o = deck.devices[j];
        if (j == i || !is_mos(o) || o.device.family != c.device.family || o.nodes[2] != drain) continue;
        sum += o.width_um;
        any = true;
      }
      if (!any) continue;
      const double w = std::max(c.width_um, std::min(max_width_um, sum));
      if (w != c.width_um) {
        c.width_um = w;
        changed = true;
      }
    }
    if (!changed) {
      result.converged = true;
      return result;
    }
  }
  result.iterations = max_iterations;
  return result;
}

// ERC gate, terminal assignment, supply and bias inference, card emission,
// then width refinement.
inline SpiceNetlist translate_to_spice(const CircuitGraph& g, const SizingRules& rules = {}) {
  rules.validate();
  const ErcReport erc = erc_check(g);
  if (!erc.ok) {
    std::string why;
    for (auto const& v : erc.violations) why += (why.empty() ? "" : "; ") + v.message;
    throw Error(ErrorKind::TranslationFail, why);
  }
  SpiceNetlist deck;
  deck.circuit_type = g.circuit_type;
  deck.load_f = rules.load_f;
  deck.warnings = erc.warnings;

  for (std::size_t d = 0; d < g.devices().size(); ++d) {
    SpiceCard card;
    card.device = g.devices()[d];
    const PinClass cls = pin_class(card.device.family);
    auto net_for = [&](PinSet r) {
      for (std::size_t e : g.device_edges(d))
        if (g.edges()[e].pins & r) return g.nets()[g.edges()[e].net];
      throw Error(ErrorKind::TranslationFail, card.device.text() + " has an unassigned terminal");
    };
    switch (cls) {
      case PinClass::Mos:
        card.nodes = {net_for(role::kDrain), net_for(role::kGate), net_for(role::kSource), net_for(role::kBody)};
        if (card.device.family == DeviceFamily::NM) {
          card.width_um = rules.nmos_width_um;
          card.length_um = rules.nmos_length_um;
        } else {
          card.width_um = rules.pmos_width_um;
          card.length_um = rules.pmos_length_um;
        }
        break;
      case PinClass::Bjt:
        card.nodes = {net_for(role::kCollector), net_for(role::kBase), net_for(role::kEmitter)};
        break;
      case PinClass::Diode:
        card.nodes = {net_for(role::kAnode), net_for(role::kCathode)};
        break;
      default:
        for (std::size_t e : g.device_edges(d)) card.nodes.push_back(g.nets()[g.edges()[e].net]);
        card.value = cls == PinClass::Resistor    ? rules.resistance_ohm
                     : cls == PinClass::Capacitor ? rules.capacitance_f
                                                  : rules.inductance_h;
        break;
    }
    deck.devices.push_back(std::move(card));
  }

  int hops = 0;
  deck.has_vdd = g.find_net(NetId::vdd()).has_value();
  try {
    hops = infer_supply_hops(g);
    deck.vdd_volts = std::max(rules.supply_floor_v, hops * rules.volts_per_hop);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoSupplyPath) throw;
    deck.vdd_volts = rules.supply_floor_v;
    deck.warnings.push_back(e.message() + "; using the supply floor");
  }
  auto bias = assign_port_bias(g, deck.vdd_volts, hops);
  deck.biases = std::move(bias.biases);
  for (auto& w : bias.warnings) deck.warnings.push_back(std::move(w));
  for (auto const& n : g.nets())
    if (n.kind == NetKind::VOUT) deck.loads.push_back(n);

  const auto refined = refine_widths(deck, rules.max_width_um, rules.max_refine_iterations);
  if (!refined.converged) deck.warnings.push_back("width refinement hit the iteration cap");
  return deck;
}

inline SpiceNetlist translate_to_spice(const Vocabulary& vocab, const CircuitSequence& seq,
                                       const SizingRules& rules = {}) {
  CircuitGraph g;
  try {
    g = parse_sequence(vocab, seq);
  } catch (const Error& e) {
    throw Error(ErrorKind::TranslationFail, e.message(), e.position());
  }
  return translate_to_spice(g, rules);
}

}  // namespace topobi
