#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "topobi/canonical.hpp"
#include "topobi/error.hpp"
#include "topobi/graph.hpp"
#include "topobi/rng.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

namespace detail {

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

struct LogicalLine {
  std::size_t line_no = 0;
  std::vector<std::string> fields;
};

// Joins '+' continuations, drops comments, and splits on whitespace.
// Parameter assignments ("W = 2u") are glued into single "W=2u" fields.
inline std::vector<LogicalLine> logical_lines(const std::string& text) {
  std::vector<LogicalLine> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (auto semi = raw.find(';'); semi != std::string::npos) raw.erase(semi);
    std::size_t first = raw.find_first_not_of(" \t");
    if (first == std::string::npos || raw[first] == '*') continue;
    bool continuation = raw[first] == '+';
    std::string body = continuation ? raw.substr(first + 1) : raw;
    for (char& c : body)
      if (c == '(' || c == ')' || c == ',') c = ' ';
    std::istringstream words(body);
    std::vector<std::string> fields;
    std::string w;
    while (words >> w) {
      if (!fields.empty() && (w == "=" || w.front() == '=' || fields.back().back() == '='))
        fields.back() += w;
      else
        fields.push_back(w);
    }
    if (continuation) {
      if (out.empty()) throw Error(ErrorKind::Parse, "continuation without a preceding card", line_no);
      auto& prev = out.back().fields;
      for (auto& f : fields) {
        if (!prev.empty() && (f.front() == '=' || prev.back().back() == '='))
          prev.back() += f;
        else
          prev.push_back(std::move(f));
      }
      continue;
    }
    if (!fields.empty()) out.push_back({line_no, std::move(fields)});
  }
  return out;
}

// Maps source node names to net ids. Numbered ports keep their number;
// bare or otherwise-suffixed port names take the lowest free number.
class NetNamer {
 public:
  NetNamer(const Vocabulary& vocab, const std::vector<LogicalLine>& cards) : vocab_(vocab) {
    for (auto const& card : cards)
      for (auto const& f : card.fields) {
        const std::string u = upper(f);
        for (auto [prefix, kind] : {std::pair{"VIN", NetKind::VIN}, std::pair{"VOUT", NetKind::VOUT}})
          if (u.rfind(prefix, 0) == 0 && all_digits(std::string_view(u).substr(std::string(prefix).size())))
            taken_[kind].insert(std::stoi(u.substr(std::string(prefix).size())));
      }
  }

  NetId operator()(const std::string& name, std::size_t line_no) {
    const std::string u = upper(name);
    if (auto it = names_.find(u); it != names_.end()) return it->second;
    NetId id;
    if (u == "0" || u == "GND" || u == "VSS" || u == "GND!" || u == "VSS!") {
      id = NetId::vss();
    } else if (u == "VDD" || u == "VCC" || u == "VDD!") {
      id = NetId::vdd();
    } else if (u.rfind("VOUT", 0) == 0) {
      id = port(NetKind::VOUT, u.substr(4), vocab_.vout_ports(), name, line_no);
    } else if (u.rfind("VIN", 0) == 0) {
      id = port(NetKind::VIN, u.substr(3), vocab_.vin_ports(), name, line_no);
    } else {
      if (++internal_ > vocab_.internal_nets())
        throw Error(ErrorKind::Capacity,
                    "more than " + std::to_string(vocab_.internal_nets()) + " internal nets", line_no);
      id = NetId::internal(internal_);
    }
    names_.emplace(u, id);
    return id;
  }

 private:
  NetId port(NetKind kind, const std::string& suffix, int cap, const std::string& name,
             std::size_t line_no) {
    int index = 0;
    if (all_digits(suffix)) {
      index = std::stoi(suffix);
    } else {
      auto& used = taken_[kind];
      for (index = 1; used.count(index); ++index) {
      }
      used.insert(index);
    }
    if (index < 1 || index > cap)
      throw Error(ErrorKind::Capacity, "port " + name + " exceeds the " + std::to_string(cap) +
                                           " available " + (kind == NetKind::VIN ? "VIN" : "VOUT") +
                                           " ports",
                  line_no);
    return {kind, index};
  }

  const Vocabulary& vocab_;
  std::map<std::string, NetId> names_;
  std::map<NetKind, std::set<int>> taken_;
  int internal_ = 0;
};

}  // namespace detail

// Parses a flat SPICE deck into a circuit graph. Independent sources and
// cards named CLOAD* (test-bench loads) are skipped; every other element
// either becomes a device or is rejected.
inline CircuitGraph parse_spice_netlist(const std::string& text, const Vocabulary& vocab) {
  const auto cards = detail::logical_lines(text);
  detail::NetNamer nets(vocab, cards);
  CircuitGraph g;
  std::array<int, kFamilyCount> next{};
  std::map<std::string, bool> names;

  auto new_device = [&](DeviceFamily f, const std::string& name, std::size_t line_no) {
    if (!names.emplace(detail::upper(name), true).second)
      throw Error(ErrorKind::Parse, "duplicate element name " + name, line_no);
    int& n = next[static_cast<std::size_t>(f)];
    if (++n > vocab.device_limit(f))
      throw Error(ErrorKind::Capacity,
                  std::string("more than ") + std::to_string(vocab.device_limit(f)) + " " +
                      family_name(f) + " devices",
                  line_no);
    return DeviceId{f, n};
  };
  // Positional node fields, stopping at the first parameter assignment.
  auto positional = [](const std::vector<std::string>& f) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i < f.size() && f[i].find('=') == std::string::npos; ++i) out.push_back(f[i]);
    return out;
  };
  auto bind = [&](DeviceId d, PinSet pins, const std::string& node, std::size_t line_no) {
    try {
      g.connect(d, pins, nets(node, line_no));
    } catch (const Error& e) {
      throw Error(e.kind(), e.message(), line_no);
    }
  };

  bool any_element = false;
  for (auto const& card : cards) {
    const std::string& name = card.fields.front();
    const std::string head = detail::upper(name);
    const std::size_t ln = card.line_no;
    if (head[0] == '.') {
      if (head == ".END") break;
      if (head == ".SUBCKT" || head == ".ENDS" || head == ".INCLUDE" || head == ".INC" ||
          head == ".LIB")
        throw Error(ErrorKind::Parse, head + " is not supported (flatten the deck first)", ln);
      continue;  // .model, .op, .param, analyses
    }
    const auto nodes = positional(card.fields);
    switch (head[0]) {
      case 'M': {
        if (nodes.size() < 5) throw Error(ErrorKind::Parse, "MOSFET card needs D G S B and a model", ln);
        const bool p = detail::upper(nodes[4]).find('P') != std::string::npos;
        const DeviceId d = new_device(p ? DeviceFamily::PM : DeviceFamily::NM, name, ln);
        bind(d, role::kDrain, nodes[0], ln);
        bind(d, role::kGate, nodes[1], ln);
        bind(d, role::kSource, nodes[2], ln);
        bind(d, role::kBody, nodes[3], ln);
        break;
      }
      case 'Q': {
        if (nodes.size() != 4) throw Error(ErrorKind::Parse, "BJT card needs C B E and a model", ln);
        if (detail::upper(nodes[3]).find("PNP") != std::string::npos)
          throw Error(ErrorKind::Parse, "PNP devices are not in the vocabulary", ln);
        const DeviceId d = new_device(DeviceFamily::NPN, name, ln);
        bind(d, role::kCollector, nodes[0], ln);
        bind(d, role::kBase, nodes[1], ln);
        bind(d, role::kEmitter, nodes[2], ln);
        break;
      }
      case 'D': {
        if (nodes.size() < 2) throw Error(ErrorKind::Parse, "diode card needs two nodes", ln);
        const DeviceId d = new_device(DeviceFamily::DIO, name, ln);
        bind(d, role::kAnode, nodes[0], ln);
        bind(d, role::kCathode, nodes[1], ln);
        break;
      }
      case 'R':
      case 'C':
      case 'L': {
        if (head.rfind("CLOAD", 0) == 0) continue;
        if (nodes.size() < 2) throw Error(ErrorKind::Parse, "two-terminal card needs two nodes", ln);
        if (detail::upper(nodes[0]) == detail::upper(nodes[1]) ||
            nets(nodes[0], ln) == nets(nodes[1], ln))
          throw Error(ErrorKind::Parse, name + " has both terminals on one net", ln);
        const DeviceFamily f = head[0] == 'R' ? DeviceFamily::R
                               : head[0] == 'C' ? DeviceFamily::C
                                                : DeviceFamily::L;
        const DeviceId d = new_device(f, name, ln);
        bind(d, role::kTerminal, nodes[0], ln);
        bind(d, role::kTerminal, nodes[1], ln);
        break;
      }
      case 'V':
      case 'I':
        continue;
      default:
        throw Error(ErrorKind::Parse, "unsupported element " + name, ln);
    }
    any_element = true;
  }
  if (!any_element) throw Error(ErrorKind::Parse, "netlist has no device elements");
  return g;
}

inline std::string net_card_name(NetId n) { return n.kind == NetKind::VSS ? "0" : n.text(); }

// Element names carry the SPICE letter in front: MNM1, QNPN1, DDIO1, RR1, CC1, LL1.
inline std::string device_card_name(DeviceId d) {
  switch (d.family) {
    case DeviceFamily::NM:
    case DeviceFamily::PM: return "M" + d.text();
    case DeviceFamily::NPN: return "Q" + d.text();
    case DeviceFamily::DIO: return "D" + d.text();
    case DeviceFamily::R: return "R" + d.text();
    case DeviceFamily::C: return "C" + d.text();
    case DeviceFamily::L: return "L" + d.text();
  }
  return d.text();
}

// Topology-only deck: one card per device, node order D G S B / C B E / P N.
inline void write_netlist(std::ostream& out, const CircuitGraph& g) {
  if (g.circuit_type) out << "* CIRCUIT_" << circuit_type_name(*g.circuit_type) << '\n';
  for (std::size_t d = 0; d < g.devices().size(); ++d) {
    const DeviceId id = g.devices()[d];
    const PinClass cls = pin_class(id.family);
    auto net_for = [&](PinSet role) {
      for (std::size_t e : g.device_edges(d))
        if (g.edges()[e].pins & role) return net_card_name(g.nets()[g.edges()[e].net]);
      throw Error(ErrorKind::InvalidGraph, id.text() + " has no " + pin_letters(cls, role));
    };
    out << device_card_name(id);
    switch (cls) {
      case PinClass::Mos:
        out << ' ' << net_for(role::kDrain) << ' ' << net_for(role::kGate) << ' '
            << net_for(role::kSource) << ' ' << net_for(role::kBody)
            << (id.family == DeviceFamily::PM ? " PMOS" : " NMOS");
        break;
      case PinClass::Bjt:
        out << ' ' << net_for(role::kCollector) << ' ' << net_for(role::kBase) << ' '
            << net_for(role::kEmitter) << " NPN";
        break;
      case PinClass::Diode:
        out << ' ' << net_for(role::kAnode) << ' ' << net_for(role::kCathode) << " DMOD";
        break;
      default: {
        auto const& inc = g.device_edges(d);
        if (inc.size() != 2) throw Error(ErrorKind::InvalidGraph, id.text() + " needs two terminals");
        out << ' ' << net_card_name(g.nets()[g.edges()[inc[0]].net]) << ' '
            << net_card_name(g.nets()[g.edges()[inc[1]].net]);
        break;
      }
    }
    out << '\n';
  }
  out << ".end\n";
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Corpus

enum class Split : std::uint8_t { Train, Validation };

inline const char* split_name(Split s) { return s == Split::Train ? "train" : "validation"; }

struct CorpusEntry {
  std::string source_path;  // as written in the manifest
  CircuitGraph graph;
  CircuitType circuit_type = CircuitType::General;
  Split split = Split::Train;
  CanonicalKey key;
};

struct TypeCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
};

struct Corpus {
  std::vector<CorpusEntry> entries;  // manifest order
  std::array<TypeCounts, kCircuitTypeCount> counts{};
  // One entry per isomorphism class of the train split -> first entry index.
  std::map<CanonicalKey, std::size_t> train_keys;
};

struct ManifestRow {
  std::string path;
  CircuitType type;
  std::size_t line_no;
};

inline std::vector<ManifestRow> read_manifest(std::istream& in) {
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
      continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorKind::Parse, "manifest line needs path<TAB>circuit_type", line_no);
    const std::string type_text = line.substr(tab + 1);
    auto type = parse_circuit_type(type_text);
    if (!type) throw Error(ErrorKind::Config, "unknown circuit type '" + type_text + "'", line_no);
    rows.push_back({line.substr(0, tab), *type, line_no});
  }
  return rows;
}

// Stratified split: within each type, entries are shuffled with a per-type
// seed and the first round(ratio * n) go to train.
inline void assign_splits(Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorKind::Config, "split ratio must lie in [0, 1]");
  corpus.counts = {};
  for (CircuitType t : kAllCircuitTypes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.entries.size(); ++i)
      if (corpus.entries[i].circuit_type == t) members.push_back(i);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    rng.shuffle(members);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k)
      corpus.entries[members[k]].split = k < n_train ? Split::Train : Split::Validation;
    corpus.counts[static_cast<std::size_t>(t)] = {n_train, members.size() - n_train};
  }
  corpus.train_keys.clear();
  for (std::size_t i = 0; i < corpus.entries.size(); ++i)
    if (corpus.entries[i].split == Split::Train) corpus.train_keys.emplace(corpus.entries[i].key, i);
}

// Loads every manifest row (paths relative to the manifest's directory).
// Files that fail to parse or fail ERC abort the load with the path attached.
inline Corpus load_corpus(const std::filesystem::path& manifest, const Vocabulary& vocab, double ratio,
                          std::uint64_t seed) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Io, "cannot read manifest " + manifest.string());
  const auto rows = read_manifest(in);
  const auto base = manifest.parent_path();
  Corpus corpus;
  for (auto const& row : rows) {
    const auto path = std::filesystem::path(row.path).is_absolute() ? std::filesystem::path(row.path)
                                                                    : base / row.path;
    CorpusEntry entry;
    entry.source_path = row.path;
    entry.circuit_type = row.type;
    try {
      entry.graph = parse_spice_netlist(read_file(path), vocab);
    } catch (const Error& e) {
      throw Error(e.kind(), row.path + ": " + e.message(), e.position());
    }
    entry.graph.circuit_type = row.type;
    const ErcReport erc = erc_check(entry.graph);
    if (!erc.ok) {
      std::string why;
      for (auto const& v : erc.violations) why += (why.empty() ? "" : "; ") + v.message;
      throw Error(ErrorKind::InvalidGraph, row.path + ": " + why);
    }
    entry.key = canonical_key(entry.graph);
    corpus.entries.push_back(std::move(entry));
  }
  assign_splits(corpus, ratio, seed);
  return corpus;
}

}  // namespace topobi
