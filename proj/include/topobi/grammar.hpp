#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "topobi/error.hpp"
#include "topobi/sequence.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

// Named by the categories of the last two emitted tokens.
enum class DecodeState : std::uint8_t {
  CircuitTypeVss,  // [CIRCUIT_x, VSS]      -> pin
  NetEdge,         // [net, pin]            -> device
  EdgeDevice,      // [pin, device]         -> pin
  DeviceEdge,      // [device, pin]         -> net
  EdgeNet,         // [pin, net != VSS]     -> pin
  EdgeVss,         // [pin, VSS]            -> pin | TRUNCATE when complete
};

inline const char* decode_state_name(DecodeState s) {
  switch (s) {
    case DecodeState::CircuitTypeVss: return "CircuitTypeVss";
    case DecodeState::NetEdge: return "NetEdge";
    case DecodeState::EdgeDevice: return "EdgeDevice";
    case DecodeState::DeviceEdge: return "DeviceEdge";
    case DecodeState::EdgeNet: return "EdgeNet";
    case DecodeState::EdgeVss: return "EdgeVss";
  }
  return "?";
}

using TokenMask = std::vector<bool>;

inline std::vector<TokenId> mask_ids(const TokenMask& mask) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<TokenId>(i));
  return out;
}

struct DeviceSlot {
  bool referenced = false;
  PinSet used = 0;
  std::vector<std::pair<TokenId, PinSet>> edges;  // (net token, pins)
};

struct DecodeBuffers {
  std::array<TokenId, 2> history{};
  std::set<std::tuple<TokenId, TokenId, TokenId>> associations;  // (device, pin, net)
  std::vector<char> visited_nets;                                // by token id
  std::optional<TokenId> last_device;
  TokenId current_net = 0;
  TokenId pending_pin = 0;
  std::vector<DeviceSlot> devices;  // by token id
  std::vector<int> net_degree;      // distinct devices per net, by token id
  std::array<int, kFamilyCount> referenced_per_family{};
  int internal_nets_visited = 0;
  int incomplete_devices = 0;
  int floating_internal_nets = 0;
  std::size_t length = 0;
  bool terminated = false;
};

// Grammar automaton over the bipartite token language. One instance per
// decode.
class GrammarDecoder {
 public:
  GrammarDecoder(const Vocabulary& vocab, CircuitType type) : vocab_(&vocab) {
    const std::size_t n = vocab.size();
    b_.devices.resize(n);
    b_.visited_nets.assign(n, 0);
    b_.net_degree.assign(n, 0);
    b_.history = {vocab.circuit_type_id(type), vocab.vss_id()};
    b_.current_net = vocab.vss_id();
    b_.visited_nets[vocab.vss_id()] = 1;
    b_.length = 2;
    state_ = DecodeState::CircuitTypeVss;
  }

  DecodeState state() const { return state_; }
  const DecodeBuffers& buffers() const { return b_; }
  const Vocabulary& vocab() const { return *vocab_; }
  bool terminated() const { return b_.terminated; }

  bool may_terminate() const {
    return b_.current_net == vocab_->vss_id() && b_.length > 2 && b_.incomplete_devices == 0 &&
           b_.floating_internal_nets == 0 && state_ == DecodeState::EdgeVss;
  }

  bool admits(TokenId id) const {
    if (b_.terminated || id >= vocab_->size()) return false;
    const TokenInfo& tok = (*vocab_)[id];
    switch (state_) {
      case DecodeState::CircuitTypeVss:
      case DecodeState::EdgeNet:
      case DecodeState::EdgeVss:
        if (tok.category == TokenCategory::Truncate)
          return state_ == DecodeState::EdgeVss && may_terminate();
        return tok.category == TokenCategory::Pin && pin_reaches_device(tok);
      case DecodeState::NetEdge: {
        if (tok.category != TokenCategory::Device) return false;
        const TokenInfo& pin = (*vocab_)[b_.pending_pin];
        return pin_class(tok.device.family) == pin.pin_class &&
               triple_ok(id, pin.pins, b_.current_net);
      }
      case DecodeState::EdgeDevice: {
        if (tok.category != TokenCategory::Pin) return false;
        const TokenInfo& dev = (*vocab_)[*b_.last_device];
        if (tok.pin_class != pin_class(dev.device.family)) return false;
        return any_net_for(*b_.last_device, tok.pins);
      }
      case DecodeState::DeviceEdge: {
        if (tok.category != TokenCategory::Net || !net_allowed(id)) return false;
        return triple_ok(*b_.last_device, (*vocab_)[b_.pending_pin].pins, id);
      }
    }
    return false;
  }

  TokenMask mask() const {
    TokenMask m(vocab_->size(), false);
    for (TokenId id = 0; id < vocab_->size(); ++id) m[id] = admits(id);
    return m;
  }

  void apply(TokenId id) {
    if (!admits(id))
      throw Error(ErrorKind::GrammarViolation,
                  (id < vocab_->size() ? (*vocab_)[id].text : std::to_string(id)) +
                      " is not admissible in state " + decode_state_name(state_),
                  b_.length);
    const TokenInfo& tok = (*vocab_)[id];
    b_.history = {b_.history[1], id};
    ++b_.length;
    switch (state_) {
      case DecodeState::CircuitTypeVss:
      case DecodeState::EdgeNet:
      case DecodeState::EdgeVss:
        if (tok.category == TokenCategory::Truncate) {
          b_.terminated = true;
          return;
        }
        b_.pending_pin = id;
        state_ = DecodeState::NetEdge;
        return;
      case DecodeState::NetEdge:
        record(id, (*vocab_)[b_.pending_pin].pins, b_.current_net);
        b_.last_device = id;
        state_ = DecodeState::EdgeDevice;
        return;
      case DecodeState::EdgeDevice:
        b_.pending_pin = id;
        state_ = DecodeState::DeviceEdge;
        return;
      case DecodeState::DeviceEdge:
        if (!b_.visited_nets[id]) {
          b_.visited_nets[id] = 1;
          if (tok.net.kind == NetKind::Internal) {
            ++b_.internal_nets_visited;
            ++b_.floating_internal_nets;
          }
        }
        record(*b_.last_device, (*vocab_)[b_.pending_pin].pins, id);
        b_.current_net = id;
        state_ = id == vocab_->vss_id() ? DecodeState::EdgeVss : DecodeState::EdgeNet;
        return;
    }
  }

 private:
  // Fresh binding: the roles are free and the device has no edge on `net`.
  // Revisit: the device already has exactly this pin set on `net`.
  bool triple_ok(TokenId device, PinSet pins, TokenId net) const {
    const DeviceSlot& slot = b_.devices[device];
    const PinClass cls = pin_class((*vocab_)[device].device.family);
    for (auto [n, p] : slot.edges)
      if (n == net) return p == pins;
    if (is_passive(cls)) return slot.edges.size() < kPassiveTerminals;
    return (slot.used & pins) == 0;
  }

  // Visited nets, supplies, ports, and the next unused internal net.
  bool net_allowed(TokenId net) const {
    const NetId n = (*vocab_)[net].net;
    if (b_.visited_nets[net] || n.kind != NetKind::Internal) return true;
    return n.index == b_.internal_nets_visited + 1;
  }

  bool any_net_for(TokenId device, PinSet pins) const {
    const DeviceSlot& slot = b_.devices[device];
    for (auto [n, p] : slot.edges)
      if (p == pins) return true;
    const PinClass cls = pin_class((*vocab_)[device].device.family);
    const bool roles_free =
        is_passive(cls) ? slot.edges.size() < kPassiveTerminals : (slot.used & pins) == 0;
    if (!roles_free) return false;
    // Any admissible net the device is not yet attached to.
    for (TokenId id = vocab_->vss_id(); id < vocab_->size(); ++id) {
      if ((*vocab_)[id].category != TokenCategory::Net) break;
      if (net_allowed(id) && triple_ok(device, pins, id)) return true;
    }
    return false;
  }

  bool pin_reaches_device(const TokenInfo& pin) const {
    for (DeviceFamily f : kAllFamilies) {
      if (pin_class(f) != pin.pin_class) continue;
      const int limit = vocab_->device_limit(f);
      if (b_.referenced_per_family[static_cast<std::size_t>(f)] < limit) return true;
      for (int i = 1; i <= limit; ++i)
        if (triple_ok(vocab_->device_id({f, i}), pin.pins, b_.current_net)) return true;
    }
    return false;
  }

  void record(TokenId device, PinSet pins, TokenId net) {
    const TokenId pin_token = vocab_->pin_id(pin_class((*vocab_)[device].device.family), pins);
    b_.associations.emplace(device, pin_token, net);
    DeviceSlot& slot = b_.devices[device];
    const DeviceFamily family = (*vocab_)[device].device.family;
    const PinClass cls = pin_class(family);
    if (!slot.referenced) {
      slot.referenced = true;
      ++b_.referenced_per_family[static_cast<std::size_t>(family)];
      ++b_.incomplete_devices;
    }
    for (auto [n, p] : slot.edges)
      if (n == net) return;  // revisit
    const bool was_complete = complete(slot, cls);
    slot.edges.emplace_back(net, pins);
    slot.used |= pins;
    if (!was_complete && complete(slot, cls)) --b_.incomplete_devices;
    if ((*vocab_)[net].net.kind == NetKind::Internal && ++b_.net_degree[net] == 2)
      --b_.floating_internal_nets;
    else if ((*vocab_)[net].net.kind != NetKind::Internal)
      ++b_.net_degree[net];
  }

  static bool complete(const DeviceSlot& slot, PinClass cls) {
    if (is_passive(cls)) return slot.edges.size() == kPassiveTerminals;
    return slot.used == full_roles(cls);
  }

  const Vocabulary* vocab_;
  DecodeState state_;
  DecodeBuffers b_;
};

inline GrammarDecoder init_decode(const Vocabulary& vocab, std::string_view circuit_type) {
  return GrammarDecoder(vocab, require_circuit_type(circuit_type));
}

// Replays a sequence through the automaton; returns the first inadmissible
// position, if any.
inline std::optional<std::size_t> replay(const Vocabulary& vocab, const CircuitSequence& seq,
                                         bool expect_termination = true) {
  if (seq.tokens.size() < 2 || vocab.category(seq.tokens[0]) != TokenCategory::CircuitType ||
      seq.tokens[1] != vocab.vss_id())
    return 0;
  GrammarDecoder dec(vocab, vocab[seq.tokens[0]].circuit_type);
  for (std::size_t i = 2; i < seq.tokens.size(); ++i) {
    if (!dec.admits(seq.tokens[i])) return i;
    dec.apply(seq.tokens[i]);
  }
  if (expect_termination && !dec.admits(vocab.truncate_id())) return seq.tokens.size();
  return std::nullopt;
}

}  // namespace topobi
