#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "topobi/error.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

// Device-to-net edge. `pins` holds every role of the device bound to that net,
// so a device has at most one edge per net (passives excepted: their two
// symmetric terminals must land on distinct nets).
struct PinEdge {
  std::size_t device = 0;
  std::size_t net = 0;
  PinSet pins = 0;

  friend bool operator==(const PinEdge&, const PinEdge&) = default;
};

// Bipartite device/net graph. Node and edge indices are insertion-ordered and
// stable; nothing is ever removed.
class CircuitGraph {
 public:
  std::optional<CircuitType> circuit_type;

  const std::vector<DeviceId>& devices() const { return devices_; }
  const std::vector<NetId>& nets() const { return nets_; }
  const std::vector<PinEdge>& edges() const { return edges_; }
  const std::vector<std::size_t>& device_edges(std::size_t d) const { return device_edges_.at(d); }
  const std::vector<std::size_t>& net_edges(std::size_t n) const { return net_edges_.at(n); }

  bool empty() const { return devices_.empty() && nets_.empty(); }
  std::size_t node_count() const { return devices_.size() + nets_.size(); }

  std::optional<std::size_t> find_device(DeviceId id) const {
    auto it = device_index_.find(id);
    if (it == device_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find_net(NetId id) const {
    auto it = net_index_.find(id);
    if (it == net_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t add_device(DeviceId id) {
    if (auto d = find_device(id)) return *d;
    if (id.index < 1) throw Error(ErrorKind::Config, "device index must be >= 1: " + id.text());
    devices_.push_back(id);
    device_edges_.emplace_back();
    device_index_.emplace(id, devices_.size() - 1);
    return devices_.size() - 1;
  }

  std::size_t add_net(NetId id) {
    if (auto n = find_net(id)) return *n;
    if ((id.is_supply() && id.index != 0) || (!id.is_supply() && id.index < 1))
      throw Error(ErrorKind::Config, "bad net index: " + id.text());
    nets_.push_back(id);
    net_edges_.emplace_back();
    net_index_.emplace(id, nets_.size() - 1);
    return nets_.size() - 1;
  }

  std::optional<std::size_t> edge_between(std::size_t device, std::size_t net) const {
    for (std::size_t e : device_edges_.at(device))
      if (edges_[e].net == net) return e;
    return std::nullopt;
  }

  // Union of roles bound on a device (for passives: kTerminal once any edge exists).
  PinSet used_roles(std::size_t device) const {
    PinSet used = 0;
    for (std::size_t e : device_edges_.at(device)) used |= edges_[e].pins;
    return used;
  }

  // Binds `pins` of `device` to `net`, creating nodes on first reference.
  // Returns the index of the edge that now carries the roles.
  std::size_t connect(DeviceId device, PinSet pins, NetId net) {
    const PinClass cls = pin_class(device.family);
    if (!valid_pin_set(cls, pins))
      throw Error(ErrorKind::BadPinSet,
                  pin_token_text(cls, pins) + " is not a pin set of " + device.text());
    const std::size_t d = add_device(device);
    const std::size_t n = add_net(net);
    const auto existing = edge_between(d, n);
    if (is_passive(cls)) {
      if (existing)
        throw Error(ErrorKind::DuplicateTerminal,
                    device.text() + " already has a terminal on " + net.text());
      if (device_edges_[d].size() >= kPassiveTerminals)
        throw Error(ErrorKind::DuplicateTerminal, device.text() + " has no free terminal");
      return push_edge(d, n, pins);
    }
    if (used_roles(d) & pins)
      throw Error(ErrorKind::DuplicateTerminal,
                  device.text() + " role " + pin_letters(cls, used_roles(d) & pins) +
                      " already assigned");
    if (existing) {
      const PinSet merged = edges_[*existing].pins | pins;
      if (!valid_pin_set(cls, merged))
        throw Error(ErrorKind::BadPinSet, device.text() + " cannot bind " +
                                              pin_token_text(cls, merged) + " to one net");
      edges_[*existing].pins = merged;
      return *existing;
    }
    return push_edge(d, n, pins);
  }

  bool device_complete(std::size_t d) const {
    const PinClass cls = pin_class(devices_[d].family);
    if (is_passive(cls)) return device_edges_[d].size() == kPassiveTerminals;
    return used_roles(d) == full_roles(cls);
  }

 private:
  std::size_t push_edge(std::size_t d, std::size_t n, PinSet pins) {
    edges_.push_back({d, n, pins});
    device_edges_[d].push_back(edges_.size() - 1);
    net_edges_[n].push_back(edges_.size() - 1);
    return edges_.size() - 1;
  }

  std::vector<DeviceId> devices_;
  std::vector<NetId> nets_;
  std::vector<PinEdge> edges_;
  std::vector<std::vector<std::size_t>> device_edges_;
  std::vector<std::vector<std::size_t>> net_edges_;
  std::map<DeviceId, std::size_t> device_index_;
  std::map<NetId, std::size_t> net_index_;
};

// ---------------------------------------------------------------------------
// Electrical rule check

struct ErcViolation {
  enum class Kind { Empty, MissingRoles, FloatingNet, Disconnected };
  Kind kind = Kind::Empty;
  std::string subject;
  PinSet missing = 0;  // MissingRoles only
  std::string message;
};

struct ErcReport {
  bool ok = false;
  std::vector<ErcViolation> violations;
  std::vector<std::string> warnings;

  bool has(ErcViolation::Kind kind, const std::string& subject = {}) const {
    return std::any_of(violations.begin(), violations.end(), [&](const ErcViolation& v) {
      return v.kind == kind && (subject.empty() || v.subject == subject);
    });
  }
};

inline ErcReport erc_check(const CircuitGraph& g) {
  ErcReport report;
  if (g.devices().empty()) {
    report.violations.push_back({ErcViolation::Kind::Empty, "", 0, "circuit has no devices"});
    return report;
  }
  for (std::size_t d = 0; d < g.devices().size(); ++d) {
    const DeviceId id = g.devices()[d];
    const PinClass cls = pin_class(id.family);
    if (is_passive(cls)) {
      const auto n = g.device_edges(d).size();
      if (n < kPassiveTerminals)
        report.violations.push_back({ErcViolation::Kind::MissingRoles, id.text(), role::kTerminal,
                                     id.text() + " has " + std::to_string(n) + " of 2 terminals"});
      continue;
    }
    const PinSet missing = full_roles(cls) & ~g.used_roles(d);
    if (missing)
      report.violations.push_back({ErcViolation::Kind::MissingRoles, id.text(), missing,
                                   id.text() + " missing " + pin_letters(cls, missing)});
    else if (g.device_edges(d).size() == 1)
      report.warnings.push_back(id.text() + " has every terminal on one net (short)");
  }
  for (std::size_t n = 0; n < g.nets().size(); ++n) {
    if (g.nets()[n].kind == NetKind::Internal && g.net_edges(n).size() < 2)
      report.violations.push_back({ErcViolation::Kind::FloatingNet, g.nets()[n].text(), 0,
                                   g.nets()[n].text() + " is floating"});
  }

  // Reachability from VSS over device/net adjacency.
  const std::size_t nd = g.devices().size();
  std::vector<char> seen(g.node_count(), 0);
  std::size_t reached = 0;
  if (auto vss = g.find_net(NetId::vss())) {
    std::queue<std::size_t> todo;  // node ids: devices [0, nd), nets [nd, ...)
    seen[nd + *vss] = 1;
    todo.push(nd + *vss);
    while (!todo.empty()) {
      const std::size_t v = todo.front();
      todo.pop();
      ++reached;
      auto const& inc = v < nd ? g.device_edges(v) : g.net_edges(v - nd);
      for (std::size_t e : inc) {
        const std::size_t u = v < nd ? nd + g.edges()[e].net : g.edges()[e].device;
        if (!seen[u]) {
          seen[u] = 1;
          todo.push(u);
        }
      }
    }
  }
  if (reached != g.node_count()) {
    report.violations.push_back(
        {ErcViolation::Kind::Disconnected, "", 0,
         std::to_string(g.node_count() - reached) + " node(s) unreachable from VSS"});
  }
  report.ok = report.violations.empty();
  return report;
}

}  // namespace topobi
