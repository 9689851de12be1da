#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "topobi/canonical.hpp"
#include "topobi/error.hpp"
#include "topobi/spice.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

// Flat key=value settings. '#' starts a comment line; surrounding blanks are
// trimmed; later keys override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "config") {
    KeyValueConfig c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos || eq == 0)
        throw Error(ErrorKind::Config, origin + ": expected key=value", line_no);
      c.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return c;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  double number(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "'" + key + "' is not a number: " + *v);
    }
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
      throw Error(ErrorKind::Config, "'" + key + "' is not a non-negative integer: " + *v);
    return out;
  }

  // Canonical text: sorted key=value lines.
  std::string text() const {
    std::string out;
    for (auto const& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const { return sha256_key(text()).hex(); }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

// Vocabulary settings: limit.<FAMILY>, vin_ports, vout_ports, internal_nets.
inline VocabularyConfig vocabulary_config(const KeyValueConfig& c) {
  VocabularyConfig v;
  for (auto& [family, limit] : v.device_limits)
    limit = static_cast<int>(c.integer("limit." + family, static_cast<std::uint64_t>(limit)));
  v.vin_ports = static_cast<int>(c.integer("vin_ports", static_cast<std::uint64_t>(v.vin_ports)));
  v.vout_ports = static_cast<int>(c.integer("vout_ports", static_cast<std::uint64_t>(v.vout_ports)));
  v.internal_nets = static_cast<int>(c.integer("internal_nets", static_cast<std::uint64_t>(v.internal_nets)));
  for (auto const& [key, value] : c.values())
    if (key.rfind("limit.", 0) == 0 && !parse_family(key.substr(6)))
      throw Error(ErrorKind::Config, "unknown device family in '" + key + "'");
  return v;
}

inline SizingRules sizing_rules(const KeyValueConfig& c) {
  SizingRules r;
  r.nmos_width_um = c.number("nmos_width_um", r.nmos_width_um);
  r.nmos_length_um = c.number("nmos_length_um", r.nmos_length_um);
  r.pmos_width_um = c.number("pmos_width_um", r.pmos_width_um);
  r.pmos_length_um = c.number("pmos_length_um", r.pmos_length_um);
  r.resistance_ohm = c.number("resistance_ohm", r.resistance_ohm);
  r.capacitance_f = c.number("capacitance_f", r.capacitance_f);
  r.inductance_h = c.number("inductance_h", r.inductance_h);
  r.load_f = c.number("load_f", r.load_f);
  r.volts_per_hop = c.number("volts_per_hop", r.volts_per_hop);
  r.supply_floor_v = c.number("supply_floor_v", r.supply_floor_v);
  r.max_width_um = c.number("max_width_um", r.max_width_um);
  r.max_refine_iterations = static_cast<int>(c.integer("max_refine_iterations", 64));
  r.validate();
  return r;
}

}  // namespace topobi
