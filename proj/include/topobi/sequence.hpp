#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "topobi/error.hpp"
#include "topobi/graph.hpp"
#include "topobi/rng.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

inline constexpr std::size_t kMaxSequenceLength = 1024;

// A serialized circuit: [CIRCUIT_<type>, VSS, (pin, node)*]. Only the
// unpadded body is stored; padded() restores the fixed-length form.
struct CircuitSequence {
  std::vector<TokenId> tokens;

  friend bool operator==(const CircuitSequence&, const CircuitSequence&) = default;

  std::vector<TokenId> padded(const Vocabulary& vocab,
                              std::size_t length = kMaxSequenceLength) const {
    std::vector<TokenId> out = tokens;
    if (out.size() < length) out.resize(length, vocab.truncate_id());
    return out;
  }

  // Accepts padded or unpadded input; everything after the first TRUNCATE
  // must be TRUNCATE.
  static CircuitSequence from_padded(const Vocabulary& vocab, const std::vector<TokenId>& padded) {
    CircuitSequence seq;
    auto first = std::find(padded.begin(), padded.end(), vocab.truncate_id());
    seq.tokens.assign(padded.begin(), first);
    for (auto it = first; it != padded.end(); ++it)
      if (*it != vocab.truncate_id())
        throw Error(ErrorKind::GrammarViolation, "token after TRUNCATE",
                    static_cast<std::size_t>(it - padded.begin()));
    return seq;
  }
};

inline std::string to_text(const Vocabulary& vocab, const CircuitSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocab[seq.tokens[i]].text;
  }
  return out;
}

inline CircuitSequence from_text(const Vocabulary& vocab, const std::string& line) {
  std::istringstream in(line);
  std::vector<TokenId> ids;
  std::string word;
  while (in >> word) ids.push_back(vocab.id_of(word));
  return CircuitSequence::from_padded(vocab, ids);
}

// Sequence files: one sequence per line, space separated, padding omitted.
inline void write_sequences(std::ostream& out, const Vocabulary& vocab,
                            const std::vector<CircuitSequence>& seqs) {
  for (auto const& s : seqs) out << to_text(vocab, s) << '\n';
}

inline std::vector<CircuitSequence> read_sequences(std::istream& in, const Vocabulary& vocab) {
  std::vector<CircuitSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      out.push_back(from_text(vocab, line));
    } catch (const Error& e) {
      throw Error(e.kind(), "sequence line " + std::to_string(line_no) + ": " + e.message(), line_no);
    }
  }
  return out;
}

namespace detail {

// Binds one (device, pins, net) triple read from a sequence. Re-traversing an
// existing edge with the same pin token is a no-op; any other rebinding is a
// conflict.
inline void bind_triple(CircuitGraph& g, DeviceId device, PinSet pins, NetId net,
                        std::size_t position) {
  const PinClass cls = pin_class(device.family);
  const std::size_t d = g.add_device(device);
  const std::size_t n = g.add_net(net);
  if (auto e = g.edge_between(d, n)) {
    if (g.edges()[*e].pins == pins) return;
    throw Error(ErrorKind::DuplicateTerminal,
                device.text() + " is already bound to " + net.text() + " as " +
                    pin_token_text(cls, g.edges()[*e].pins),
                position);
  }
  if (is_passive(cls)) {
    if (g.device_edges(d).size() >= kPassiveTerminals)
      throw Error(ErrorKind::DuplicateTerminal, device.text() + " has no free terminal", position);
  } else if (g.used_roles(d) & pins) {
    throw Error(ErrorKind::DuplicateTerminal,
                device.text() + " role " + pin_letters(cls, g.used_roles(d) & pins) +
                    " already bound to another net",
                position);
  }
  g.connect(device, pins, net);
}

}  // namespace detail

inline CircuitGraph parse_sequence(const Vocabulary& vocab, const CircuitSequence& seq) {
  auto const& t = seq.tokens;
  auto info = [&](std::size_t i) -> const TokenInfo& { return vocab[t[i]]; };
  if (t.empty() || info(0).category != TokenCategory::CircuitType)
    throw Error(ErrorKind::GrammarViolation, "sequence must start with a circuit-type token", 0);
  if (t.size() < 2 || t[1] != vocab.vss_id())
    throw Error(ErrorKind::GrammarViolation, "second token must be VSS", 1);

  CircuitGraph g;
  g.circuit_type = info(0).circuit_type;
  g.add_net(NetId::vss());
  NetId current = NetId::vss();
  DeviceId device;
  PinSet pending = 0;
  PinClass pending_class = PinClass::Mos;

  for (std::size_t i = 2; i < t.size(); ++i) {
    const TokenInfo& tok = info(i);
    switch ((i - 2) % 4) {
      case 0:  // net -> pin
      case 2:  // device -> pin
        if (tok.category != TokenCategory::Pin)
          throw Error(ErrorKind::GrammarViolation, "expected a pin token, got " + tok.text, i);
        if ((i - 2) % 4 == 2 && tok.pin_class != pin_class(device.family))
          throw Error(ErrorKind::GrammarViolation, tok.text + " does not fit " + device.text(), i);
        pending = tok.pins;
        pending_class = tok.pin_class;
        break;
      case 1:  // pin -> device
        if (tok.category != TokenCategory::Device)
          throw Error(ErrorKind::GrammarViolation, "expected a device token, got " + tok.text, i);
        if (pin_class(tok.device.family) != pending_class)
          throw Error(ErrorKind::GrammarViolation, tok.text + " does not fit the preceding pin", i);
        device = tok.device;
        detail::bind_triple(g, device, pending, current, i);
        break;
      case 3:  // pin -> net
        if (tok.category != TokenCategory::Net)
          throw Error(ErrorKind::GrammarViolation, "expected a net token, got " + tok.text, i);
        current = tok.net;
        detail::bind_triple(g, device, pending, current, i);
        break;
    }
  }
  if ((t.size() - 2) % 4 != 0)
    throw Error(ErrorKind::GrammarViolation, "sequence ends inside a device step", t.size());
  return g;
}

inline ErcReport sequence_erc(const Vocabulary& vocab, const CircuitSequence& seq) {
  return erc_check(parse_sequence(vocab, seq));
}

// Positional check of the [type, VSS, (pin, device, pin, net)*] alternation.
inline bool well_alternated(const Vocabulary& vocab, const CircuitSequence& seq) {
  auto const& t = seq.tokens;
  if (t.size() < 2 || vocab.category(t[0]) != TokenCategory::CircuitType || t[1] != vocab.vss_id())
    return false;
  if ((t.size() - 2) % 4 != 0) return false;
  static constexpr TokenCategory pattern[4] = {TokenCategory::Pin, TokenCategory::Device,
                                               TokenCategory::Pin, TokenCategory::Net};
  for (std::size_t i = 2; i < t.size(); ++i)
    if (vocab.category(t[i]) != pattern[(i - 2) % 4]) return false;
  return true;
}

// Closed walk from VSS covering every edge: take an unvisited incident edge,
// else an edge to an unvisited node, else the shortest path to a node with an
// unvisited edge; finally return to VSS. Ties follow a seeded shuffle of
// every node's incidence list. Internal nets are renumbered by first visit.
inline CircuitSequence serialize_closed_walk(const Vocabulary& vocab, const CircuitGraph& g,
                                             std::uint64_t seed,
                                             std::optional<CircuitType> type = std::nullopt) {
  const ErcReport erc = erc_check(g);
  if (!erc.ok) {
    std::string why;
    for (auto const& v : erc.violations) why += (why.empty() ? "" : "; ") + v.message;
    throw Error(ErrorKind::InvalidGraph, why);
  }
  const std::size_t nd = g.devices().size();
  const std::size_t n = g.node_count();
  const std::size_t vss = nd + *g.find_net(NetId::vss());

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t d = 0; d < nd; ++d) adj[d] = g.device_edges(d);
  for (std::size_t k = 0; k < g.nets().size(); ++k) adj[nd + k] = g.net_edges(k);
  for (auto& a : adj) rng.shuffle(a);

  auto other = [&](std::size_t v, std::size_t e) {
    return v < nd ? nd + g.edges()[e].net : g.edges()[e].device;
  };

  std::vector<char> edge_seen(g.edges().size(), 0);
  std::vector<char> node_seen(n, 0);
  std::size_t open_edges = g.edges().size();
  std::vector<std::pair<std::size_t, std::size_t>> steps;  // (edge, node reached)
  std::size_t v = vss;
  node_seen[v] = 1;

  auto move = [&](std::size_t e) {
    v = other(v, e);
    steps.emplace_back(e, v);
    if (!edge_seen[e]) {
      edge_seen[e] = 1;
      --open_edges;
    }
    node_seen[v] = 1;
  };
  auto node_open = [&](std::size_t u) {
    return std::any_of(adj[u].begin(), adj[u].end(), [&](std::size_t e) { return !edge_seen[e]; });
  };
  // BFS in shuffled incidence order; returns the edge path to the first node
  // accepted by `goal`.
  auto shortest_path = [&](auto goal) {
    std::vector<std::size_t> via(n, SIZE_MAX);
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> todo;
    seen[v] = 1;
    todo.push(v);
    std::size_t hit = SIZE_MAX;
    while (!todo.empty() && hit == SIZE_MAX) {
      const std::size_t x = todo.front();
      todo.pop();
      if (x != v && goal(x)) {
        hit = x;
        break;
      }
      for (std::size_t e : adj[x]) {
        const std::size_t u = other(x, e);
        if (seen[u]) continue;
        seen[u] = 1;
        via[u] = e;
        todo.push(u);
      }
    }
    std::vector<std::size_t> path;
    if (hit == SIZE_MAX) return path;
    for (std::size_t x = hit; x != v;) {
      const std::size_t e = via[x];
      path.push_back(e);
      x = other(x, e);
    }
    std::reverse(path.begin(), path.end());
    return path;
  };

  while (open_edges > 0) {
    auto const& inc = adj[v];
    auto unvisited = std::find_if(inc.begin(), inc.end(), [&](std::size_t e) { return !edge_seen[e]; });
    if (unvisited != inc.end()) {
      move(*unvisited);
      continue;
    }
    auto fresh = std::find_if(inc.begin(), inc.end(),
                              [&](std::size_t e) { return !node_seen[other(v, e)]; });
    if (fresh != inc.end()) {
      move(*fresh);
      continue;
    }
    auto path = shortest_path(node_open);
    if (path.empty()) break;  // unreachable open edges; caught by the coverage check
    for (std::size_t e : path) move(e);
  }
  if (v != vss)
    for (std::size_t e : shortest_path([&](std::size_t x) { return x == vss; })) move(e);

  if (open_edges != 0 || std::count(node_seen.begin(), node_seen.end(), 1) != static_cast<long>(n))
    throw Error(ErrorKind::InvalidGraph, "closed walk does not cover the graph");
  const std::size_t length = 2 + 2 * steps.size();
  if (length > kMaxSequenceLength)
    throw Error(ErrorKind::SequenceOverflow,
                "walk needs " + std::to_string(length) + " tokens (limit " +
                    std::to_string(kMaxSequenceLength) + ")");

  const CircuitType ct = type.value_or(g.circuit_type.value_or(CircuitType::General));
  CircuitSequence seq;
  seq.tokens.reserve(length);
  seq.tokens.push_back(vocab.circuit_type_id(ct));
  seq.tokens.push_back(vocab.vss_id());
  std::map<std::size_t, int> internal_order;
  for (auto [e, u] : steps) {
    const PinEdge& edge = g.edges()[e];
    const DeviceId dev = g.devices()[edge.device];
    seq.tokens.push_back(vocab.pin_id(pin_class(dev.family), edge.pins));
    if (u < nd) {
      seq.tokens.push_back(vocab.device_id(dev));
      continue;
    }
    NetId net = g.nets()[u - nd];
    if (net.kind == NetKind::Internal) {
      auto [it, inserted] =
          internal_order.emplace(u, static_cast<int>(internal_order.size()) + 1);
      net = NetId::internal(it->second);
      if (net.index > vocab.internal_nets())
        throw Error(ErrorKind::Capacity, "more internal nets than the vocabulary holds");
    }
    seq.tokens.push_back(vocab.net_id(net));
  }
  return seq;
}

}  // namespace topobi
