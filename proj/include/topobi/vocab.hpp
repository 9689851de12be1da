#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "topobi/error.hpp"

namespace topobi {

using TokenId = std::uint32_t;

enum class TokenCategory : std::uint8_t { CircuitType, Device, Net, Pin, Truncate };

inline const char* category_name(TokenCategory c) {
  switch (c) {
    case TokenCategory::CircuitType: return "CircuitType";
    case TokenCategory::Device: return "Device";
    case TokenCategory::Net: return "Net";
    case TokenCategory::Pin: return "Pin";
    case TokenCategory::Truncate: return "Truncate";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Circuit types

enum class CircuitType : std::uint8_t {
  OpAmp,
  Mirror,
  Comparator,
  Mixer,
  LDO,
  Oscillator,
  Filter,
  BGR,
  PowerAmp,
  VoltageRegulator,
  PowerConverter,
  PLL,
  SwitchedCap,
  DataConverter,
  General,
};

inline constexpr std::size_t kCircuitTypeCount = 15;

inline constexpr std::array<CircuitType, kCircuitTypeCount> kAllCircuitTypes = {
    CircuitType::OpAmp,          CircuitType::Mirror,     CircuitType::Comparator,
    CircuitType::Mixer,          CircuitType::LDO,        CircuitType::Oscillator,
    CircuitType::Filter,         CircuitType::BGR,        CircuitType::PowerAmp,
    CircuitType::VoltageRegulator, CircuitType::PowerConverter, CircuitType::PLL,
    CircuitType::SwitchedCap,    CircuitType::DataConverter, CircuitType::General,
};

inline const char* circuit_type_name(CircuitType t) {
  static constexpr std::array<const char*, kCircuitTypeCount> names = {
      "OpAmp", "Mirror", "Comparator", "Mixer",  "LDO",
      "Oscillator", "Filter", "BGR", "PowerAmp", "VoltageRegulator",
      "PowerConverter", "PLL", "SwitchedCap", "DataConverter", "General"};
  return names[static_cast<std::size_t>(t)];
}

inline std::optional<CircuitType> parse_circuit_type(std::string_view name) {
  if (name.starts_with("CIRCUIT_")) name.remove_prefix(8);
  for (CircuitType t : kAllCircuitTypes)
    if (name == circuit_type_name(t)) return t;
  return std::nullopt;
}

inline CircuitType require_circuit_type(std::string_view name) {
  if (auto t = parse_circuit_type(name)) return *t;
  throw Error(ErrorKind::Config, "unknown circuit type '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Devices and terminal roles

enum class DeviceFamily : std::uint8_t { NM, PM, NPN, R, C, L, DIO };

inline constexpr std::size_t kFamilyCount = 7;

inline constexpr std::array<DeviceFamily, kFamilyCount> kAllFamilies = {
    DeviceFamily::NM, DeviceFamily::PM, DeviceFamily::NPN, DeviceFamily::R,
    DeviceFamily::C,  DeviceFamily::L,  DeviceFamily::DIO};

inline const char* family_name(DeviceFamily f) {
  static constexpr std::array<const char*, kFamilyCount> names = {"NM", "PM", "NPN", "R",
                                                                   "C",  "L",  "DIO"};
  return names[static_cast<std::size_t>(f)];
}

inline std::optional<DeviceFamily> parse_family(std::string_view name) {
  for (DeviceFamily f : kAllFamilies)
    if (name == family_name(f)) return f;
  return std::nullopt;
}

// Families sharing one pin-token alphabet.
enum class PinClass : std::uint8_t { Mos, Bjt, Resistor, Capacitor, Inductor, Diode };

inline PinClass pin_class(DeviceFamily f) {
  switch (f) {
    case DeviceFamily::NM:
    case DeviceFamily::PM: return PinClass::Mos;
    case DeviceFamily::NPN: return PinClass::Bjt;
    case DeviceFamily::R: return PinClass::Resistor;
    case DeviceFamily::C: return PinClass::Capacitor;
    case DeviceFamily::L: return PinClass::Inductor;
    case DeviceFamily::DIO: return PinClass::Diode;
  }
  return PinClass::Mos;
}

inline bool is_passive(PinClass c) {
  return c == PinClass::Resistor || c == PinClass::Capacitor || c == PinClass::Inductor;
}

// Bit set of terminal roles. Bit meaning depends on the pin class.
using PinSet = std::uint8_t;

namespace role {
inline constexpr PinSet kGate = 1, kDrain = 2, kSource = 4, kBody = 8;        // MOSFET
inline constexpr PinSet kCollector = 1, kBase = 2, kEmitter = 4;              // BJT
inline constexpr PinSet kAnode = 1, kCathode = 2;                            // diode
inline constexpr PinSet kTerminal = 1;                                        // R/C/L
}  // namespace role

// Roles a device must have assigned to pass ERC. Two-terminal passives carry
// one symmetric terminal token per edge and need two distinct edges.
inline PinSet full_roles(PinClass c) {
  switch (c) {
    case PinClass::Mos: return 0x0F;
    case PinClass::Bjt: return 0x07;
    case PinClass::Diode: return 0x03;
    default: return role::kTerminal;
  }
}

inline constexpr int kPassiveTerminals = 2;

inline bool valid_pin_set(PinClass c, PinSet pins) {
  if (pins == 0) return false;
  switch (c) {
    case PinClass::Mos:
    case PinClass::Bjt: return (pins & ~full_roles(c)) == 0;
    case PinClass::Diode: return pins == role::kAnode || pins == role::kCathode;
    default: return pins == role::kTerminal;
  }
}

inline std::string pin_letters(PinClass c, PinSet pins) {
  static constexpr std::array<char, 4> mos = {'G', 'D', 'S', 'B'};
  static constexpr std::array<char, 3> bjt = {'C', 'B', 'E'};
  static constexpr std::array<char, 2> dio = {'P', 'N'};
  std::string out;
  auto emit = [&](auto const& letters) {
    for (std::size_t i = 0; i < letters.size(); ++i)
      if (pins & (1u << i)) out += letters[i];
  };
  switch (c) {
    case PinClass::Mos: emit(mos); break;
    case PinClass::Bjt: emit(bjt); break;
    case PinClass::Diode: emit(dio); break;
    default: out = "C"; break;
  }
  return out;
}

inline const char* pin_prefix(PinClass c) {
  switch (c) {
    case PinClass::Mos: return "M_";
    case PinClass::Bjt: return "B_";
    case PinClass::Resistor: return "R_";
    case PinClass::Capacitor: return "C_";
    case PinClass::Inductor: return "L_";
    case PinClass::Diode: return "D_";
  }
  return "?_";
}

inline std::string pin_token_text(PinClass c, PinSet pins) {
  return pin_prefix(c) + pin_letters(c, pins);
}

// Pin masks of a class in vocabulary order.
inline std::vector<PinSet> pin_masks(PinClass c) {
  std::vector<PinSet> out;
  const PinSet full = c == PinClass::Diode ? PinSet{0x03} : full_roles(c);
  for (unsigned m = 1; m <= full; ++m)
    if (valid_pin_set(c, static_cast<PinSet>(m))) out.push_back(static_cast<PinSet>(m));
  return out;
}

inline std::vector<std::string> pin_token_set(DeviceFamily family) {
  std::vector<std::string> out;
  for (PinSet m : pin_masks(pin_class(family))) out.push_back(pin_token_text(pin_class(family), m));
  return out;
}

struct DeviceId {
  DeviceFamily family = DeviceFamily::NM;
  int index = 1;

  friend auto operator<=>(const DeviceId&, const DeviceId&) = default;
  std::string text() const { return family_name(family) + std::to_string(index); }
};

// ---------------------------------------------------------------------------
// Nets

enum class NetKind : std::uint8_t { VSS, VDD, VIN, VOUT, Internal };

struct NetId {
  NetKind kind = NetKind::VSS;
  int index = 0;  // 0 for VSS/VDD, >= 1 otherwise

  friend auto operator<=>(const NetId&, const NetId&) = default;

  static NetId vss() { return {NetKind::VSS, 0}; }
  static NetId vdd() { return {NetKind::VDD, 0}; }
  static NetId vin(int i) { return {NetKind::VIN, i}; }
  static NetId vout(int i) { return {NetKind::VOUT, i}; }
  static NetId internal(int i) { return {NetKind::Internal, i}; }

  bool is_port() const { return kind == NetKind::VIN || kind == NetKind::VOUT; }
  bool is_supply() const { return kind == NetKind::VSS || kind == NetKind::VDD; }

  std::string text() const {
    switch (kind) {
      case NetKind::VSS: return "VSS";
      case NetKind::VDD: return "VDD";
      case NetKind::VIN: return "VIN" + std::to_string(index);
      case NetKind::VOUT: return "VOUT" + std::to_string(index);
      case NetKind::Internal: return "NET" + std::to_string(index);
    }
    return "?";
  }
};

// ---------------------------------------------------------------------------
// Vocabulary

struct TokenInfo {
  std::string text;
  TokenCategory category = TokenCategory::Truncate;
  TokenId id = 0;
  // Payload; only the member matching `category` is meaningful.
  CircuitType circuit_type = CircuitType::General;
  DeviceId device;
  NetId net;
  PinClass pin_class = PinClass::Mos;
  PinSet pins = 0;
};

struct VocabularyConfig {
  // Ordered (family name, max instance index) pairs.
  std::vector<std::pair<std::string, int>> device_limits = {
      {"NM", 35}, {"PM", 35}, {"NPN", 20}, {"R", 20}, {"C", 20}, {"L", 20}, {"DIO", 20}};
  int vin_ports = 4;
  int vout_ports = 4;
  int internal_nets = 64;
};

class Vocabulary {
 public:
  static Vocabulary build(const VocabularyConfig& config = {}) {
    Vocabulary v;
    v.limits_.fill(-1);
    for (auto const& [name, limit] : config.device_limits) {
      auto family = parse_family(name);
      if (!family) throw Error(ErrorKind::Config, "unknown device family '" + name + "'");
      auto& slot = v.limits_[static_cast<std::size_t>(*family)];
      if (slot != -1) throw Error(ErrorKind::Config, "duplicate device family '" + name + "'");
      if (limit < 1) throw Error(ErrorKind::Config, "limit for '" + name + "' must be >= 1");
      slot = limit;
    }
    for (DeviceFamily f : kAllFamilies)
      if (v.limits_[static_cast<std::size_t>(f)] == -1)
        throw Error(ErrorKind::Config, std::string("missing limit for family ") + family_name(f));
    if (config.vin_ports < 0 || config.vout_ports < 0 || config.internal_nets < 1)
      throw Error(ErrorKind::Config, "net counts must be non-negative (internal >= 1)");
    v.vin_ports_ = config.vin_ports;
    v.vout_ports_ = config.vout_ports;
    v.internal_nets_ = config.internal_nets;

    for (CircuitType t : kAllCircuitTypes) {
      TokenInfo info;
      info.text = std::string("CIRCUIT_") + circuit_type_name(t);
      info.category = TokenCategory::CircuitType;
      info.circuit_type = t;
      v.add(std::move(info));
    }
    for (DeviceFamily f : kAllFamilies) {
      v.device_base_[static_cast<std::size_t>(f)] = static_cast<TokenId>(v.tokens_.size());
      for (int i = 1; i <= v.device_limit(f); ++i) {
        TokenInfo info;
        info.device = {f, i};
        info.text = info.device.text();
        info.category = TokenCategory::Device;
        v.add(std::move(info));
      }
    }
    auto add_net = [&v](NetId net) {
      TokenInfo info;
      info.net = net;
      info.text = net.text();
      info.category = TokenCategory::Net;
      v.add(std::move(info));
    };
    v.net_base_ = static_cast<TokenId>(v.tokens_.size());
    add_net(NetId::vss());
    add_net(NetId::vdd());
    for (int i = 1; i <= v.vin_ports_; ++i) add_net(NetId::vin(i));
    for (int i = 1; i <= v.vout_ports_; ++i) add_net(NetId::vout(i));
    for (int i = 1; i <= v.internal_nets_; ++i) add_net(NetId::internal(i));
    for (PinClass c : {PinClass::Mos, PinClass::Bjt, PinClass::Resistor, PinClass::Capacitor,
                       PinClass::Inductor, PinClass::Diode}) {
      for (PinSet m : pin_masks(c)) {
        TokenInfo info;
        info.text = pin_token_text(c, m);
        info.category = TokenCategory::Pin;
        info.pin_class = c;
        info.pins = m;
        v.pin_ids_[static_cast<std::size_t>(c)][m] = static_cast<TokenId>(v.tokens_.size());
        v.add(std::move(info));
      }
    }
    TokenInfo trunc;
    trunc.text = "TRUNCATE";
    trunc.category = TokenCategory::Truncate;
    v.truncate_ = static_cast<TokenId>(v.tokens_.size());
    v.add(std::move(trunc));
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  const TokenInfo& operator[](TokenId id) const { return tokens_.at(id); }
  std::span<const TokenInfo> tokens() const { return tokens_; }

  std::optional<TokenId> find(std::string_view text) const {
    auto it = by_text_.find(std::string(text));
    if (it == by_text_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id_of(std::string_view text) const {
    if (auto id = find(text)) return *id;
    throw Error(ErrorKind::NotInVocabulary, "'" + std::string(text) + "'");
  }

  std::optional<TokenCategory> classify(std::string_view text) const {
    if (auto id = find(text)) return tokens_[*id].category;
    return std::nullopt;
  }

  TokenCategory category(TokenId id) const { return tokens_.at(id).category; }

  int device_limit(DeviceFamily f) const { return limits_[static_cast<std::size_t>(f)]; }
  int vin_ports() const { return vin_ports_; }
  int vout_ports() const { return vout_ports_; }
  int internal_nets() const { return internal_nets_; }

  TokenId circuit_type_id(CircuitType t) const { return static_cast<TokenId>(t); }
  TokenId truncate_id() const { return truncate_; }
  TokenId vss_id() const { return net_base_; }

  bool contains(DeviceId d) const { return d.index >= 1 && d.index <= device_limit(d.family); }

  TokenId device_id(DeviceId d) const {
    if (!contains(d)) throw Error(ErrorKind::NotInVocabulary, d.text());
    return device_base_[static_cast<std::size_t>(d.family)] + static_cast<TokenId>(d.index - 1);
  }

  bool contains(NetId n) const {
    switch (n.kind) {
      case NetKind::VSS:
      case NetKind::VDD: return n.index == 0;
      case NetKind::VIN: return n.index >= 1 && n.index <= vin_ports_;
      case NetKind::VOUT: return n.index >= 1 && n.index <= vout_ports_;
      case NetKind::Internal: return n.index >= 1 && n.index <= internal_nets_;
    }
    return false;
  }

  TokenId net_id(NetId n) const {
    if (!contains(n)) throw Error(ErrorKind::NotInVocabulary, n.text());
    switch (n.kind) {
      case NetKind::VSS: return net_base_;
      case NetKind::VDD: return net_base_ + 1;
      case NetKind::VIN: return net_base_ + 1 + static_cast<TokenId>(n.index);
      case NetKind::VOUT:
        return net_base_ + 1 + static_cast<TokenId>(vin_ports_ + n.index);
      case NetKind::Internal:
        return net_base_ + 1 + static_cast<TokenId>(vin_ports_ + vout_ports_ + n.index);
    }
    return net_base_;
  }

  TokenId pin_id(PinClass c, PinSet pins) const {
    auto const& row = pin_ids_[static_cast<std::size_t>(c)];
    if (!valid_pin_set(c, pins)) throw Error(ErrorKind::BadPinSet, pin_token_text(c, pins));
    return row[pins];
  }

  // "<id>\t<text>\t<category>" per line.
  void dump(std::ostream& out) const {
    for (auto const& t : tokens_) out << t.id << '\t' << t.text << '\t' << category_name(t.category) << '\n';
  }

 private:
  void add(TokenInfo info) {
    info.id = static_cast<TokenId>(tokens_.size());
    by_text_.emplace(info.text, info.id);
    tokens_.push_back(std::move(info));
  }

  std::vector<TokenInfo> tokens_;
  std::unordered_map<std::string, TokenId> by_text_;
  std::array<int, kFamilyCount> limits_{};
  std::array<TokenId, kFamilyCount> device_base_{};
  std::array<std::array<TokenId, 16>, 6> pin_ids_{};
  TokenId net_base_ = 0;
  TokenId truncate_ = 0;
  int vin_ports_ = 0;
  int vout_ports_ = 0;
  int internal_nets_ = 0;
};

}  // namespace topobi
