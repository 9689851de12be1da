#pragma once

// Canonical labeling of circuit graphs: color refinement seeded with node
// labels, then individualization/refinement search for the lexicographically
// smallest adjacency encoding. Twin vertices and automorphisms discovered at
// the leaves prune the search tree.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "topobi/graph.hpp"

namespace topobi {

namespace detail {

struct LabeledGraph {
  std::size_t device_count = 0;
  std::vector<std::uint64_t> labels;  // per node
  // adjacency[v] = sorted (edge label, neighbor)
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adjacency;
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> edges;  // (device, net, pins)
};

inline std::uint64_t node_label(const DeviceId& d) {
  return (0ull << 40) | static_cast<std::uint64_t>(d.family);
}

// Supply and port nets keep their index; internal nets are interchangeable.
inline std::uint64_t node_label(const NetId& n) {
  const std::uint64_t index = n.kind == NetKind::Internal ? 0 : static_cast<std::uint64_t>(n.index);
  return (1ull << 40) | (static_cast<std::uint64_t>(n.kind) << 20) | index;
}

inline LabeledGraph label_graph(const CircuitGraph& g) {
  LabeledGraph lg;
  lg.device_count = g.devices().size();
  const std::size_t n = g.node_count();
  lg.labels.reserve(n);
  for (auto const& d : g.devices()) lg.labels.push_back(node_label(d));
  for (auto const& net : g.nets()) lg.labels.push_back(node_label(net));
  lg.adjacency.resize(n);
  for (auto const& e : g.edges()) {
    const auto dv = static_cast<std::uint32_t>(e.device);
    const auto nv = static_cast<std::uint32_t>(lg.device_count + e.net);
    lg.adjacency[dv].emplace_back(e.pins, nv);
    lg.adjacency[nv].emplace_back(e.pins, dv);
    lg.edges.emplace_back(dv, nv, e.pins);
  }
  for (auto& adj : lg.adjacency) std::sort(adj.begin(), adj.end());
  return lg;
}

using Coloring = std::vector<std::uint32_t>;

inline std::size_t distinct_count(const Coloring& c) {
  if (c.empty()) return 0;
  return *std::max_element(c.begin(), c.end()) + 1;
}

// Ranks nodes by (key) so that colors are dense and independent of node order.
template <typename Key>
Coloring rank_by(const std::vector<Key>& keys) {
  std::vector<std::uint32_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return keys[a] < keys[b]; });
  Coloring out(keys.size());
  std::uint32_t color = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && keys[order[i - 1]] < keys[order[i]]) ++color;
    out[order[i]] = color;
  }
  return out;
}

inline Coloring refine(const LabeledGraph& lg, Coloring colors) {
  using Signature = std::pair<std::uint32_t, std::vector<std::pair<std::uint32_t, std::uint32_t>>>;
  std::size_t count = distinct_count(colors);
  std::vector<Signature> sig(colors.size());
  while (true) {
    for (std::size_t v = 0; v < colors.size(); ++v) {
      sig[v].first = colors[v];
      auto& neigh = sig[v].second;
      neigh.clear();
      for (auto [label, u] : lg.adjacency[v]) neigh.emplace_back(label, colors[u]);
      std::sort(neigh.begin(), neigh.end());
    }
    Coloring next = rank_by(sig);
    const std::size_t next_count = distinct_count(next);
    colors = std::move(next);
    if (next_count == count) return colors;
    count = next_count;
  }
}

using Encoding = std::vector<std::uint64_t>;

inline Encoding encode_leaf(const LabeledGraph& lg, const Coloring& position) {
  const std::size_t n = lg.labels.size();
  Encoding enc;
  enc.reserve(2 + n + 3 * lg.edges.size());
  enc.push_back(n);
  enc.push_back(lg.device_count);
  std::vector<std::uint64_t> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[position[v]] = lg.labels[v];
  enc.insert(enc.end(), labels.begin(), labels.end());
  std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> edges;
  edges.reserve(lg.edges.size());
  for (auto [d, net, pins] : lg.edges) edges.emplace_back(position[d], position[net], pins);
  std::sort(edges.begin(), edges.end());
  for (auto [a, b, p] : edges) {
    enc.push_back(a);
    enc.push_back(b);
    enc.push_back(p);
  }
  return enc;
}

class CanonicalSearch {
 public:
  explicit CanonicalSearch(const LabeledGraph& lg) : lg_(lg) {}

  Encoding run() {
    if (lg_.labels.empty()) return {0, 0};
    Coloring initial = rank_by(lg_.labels);
    std::vector<std::uint32_t> prefix;
    descend(initial, prefix);
    return best_;
  }

 private:
  void descend(Coloring colors, std::vector<std::uint32_t>& prefix) {
    colors = refine(lg_, std::move(colors));
    const std::size_t n = colors.size();
    if (distinct_count(colors) == n) {
      leaf(colors);
      return;
    }
    // Target cell: smallest non-singleton, lowest color on ties.
    std::vector<std::uint32_t> size(n, 0);
    for (auto c : colors) ++size[c];
    std::uint32_t target = 0;
    std::uint32_t best_size = UINT32_MAX;
    for (std::uint32_t c = 0; c < n; ++c)
      if (size[c] > 1 && size[c] < best_size) {
        best_size = size[c];
        target = c;
      }
    std::vector<std::uint32_t> cell;
    for (std::uint32_t v = 0; v < n; ++v)
      if (colors[v] == target) cell.push_back(v);

    std::vector<std::uint32_t> explored;
    for (std::uint32_t v : cell) {
      // Twins (identical labeled neighborhoods) yield identical subtrees.
      bool twin = std::any_of(explored.begin(), explored.end(),
                              [&](std::uint32_t w) { return lg_.adjacency[w] == lg_.adjacency[v]; });
      if (twin || in_explored_orbit(v, explored, prefix)) continue;
      explored.push_back(v);
      Coloring child(n);
      for (std::uint32_t u = 0; u < n; ++u) child[u] = 2 * colors[u] + 1;
      child[v] = 2 * colors[v];
      prefix.push_back(v);
      descend(rank_by(child), prefix);
      prefix.pop_back();
    }
  }

  // Orbits of the explored candidates under the stored automorphisms that fix
  // the current prefix pointwise.
  bool in_explored_orbit(std::uint32_t v, const std::vector<std::uint32_t>& explored,
                         const std::vector<std::uint32_t>& prefix) const {
    if (explored.empty() || automorphisms_.empty()) return false;
    const std::size_t n = lg_.labels.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (auto const& sigma : automorphisms_) {
      bool fixes = std::all_of(prefix.begin(), prefix.end(),
                               [&](std::uint32_t p) { return sigma[p] == p; });
      if (!fixes) continue;
      for (std::uint32_t x = 0; x < n; ++x) parent[find(x)] = find(sigma[x]);
    }
    const std::uint32_t root = find(v);
    return std::any_of(explored.begin(), explored.end(),
                       [&](std::uint32_t w) { return find(w) == root; });
  }

  void leaf(const Coloring& position) {
    Encoding enc = encode_leaf(lg_, position);
    if (!have_best_ || enc < best_) {
      best_ = std::move(enc);
      best_position_ = position;
      have_best_ = true;
      return;
    }
    if (enc == best_) {
      // position maps v -> slot; best_position_^-1 maps slot -> vertex.
      const std::size_t n = position.size();
      std::vector<std::uint32_t> at_slot(n);
      for (std::uint32_t v = 0; v < n; ++v) at_slot[best_position_[v]] = v;
      std::vector<std::uint32_t> sigma(n);
      for (std::uint32_t v = 0; v < n; ++v) sigma[v] = at_slot[position[v]];
      automorphisms_.push_back(std::move(sigma));
    }
  }

  const LabeledGraph& lg_;
  Encoding best_;
  Coloring best_position_;
  bool have_best_ = false;
  std::vector<std::vector<std::uint32_t>> automorphisms_;
};

}  // namespace detail

// Canonical adjacency encoding: equal for exactly the graphs in one
// label-preserving isomorphism class.
inline detail::Encoding canonical_form(const CircuitGraph& g) {
  const auto lg = detail::label_graph(g);
  return detail::CanonicalSearch(lg).run();
}

struct CanonicalKey {
  std::array<std::uint8_t, 32> digest{};

  friend auto operator<=>(const CanonicalKey&, const CanonicalKey&) = default;

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : digest) {
      out += digits[b >> 4];
      out += digits[b & 0x0f];
    }
    return out;
  }

  static std::optional<CanonicalKey> from_hex(std::string_view text) {
    if (text.size() != 64) return std::nullopt;
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      return -1;
    };
    CanonicalKey key;
    for (std::size_t i = 0; i < 32; ++i) {
      const int hi = nibble(text[2 * i]);
      const int lo = nibble(text[2 * i + 1]);
      if (hi < 0 || lo < 0) return std::nullopt;
      key.digest[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return key;
  }
};

inline CanonicalKey sha256_key(const std::string& bytes) {
  CanonicalKey key;
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), key.digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != key.digest.size())
    throw Error(ErrorKind::Config, "SHA-256 digest failed");
  return key;
}

inline CanonicalKey canonical_key(const CircuitGraph& g) {
  const auto form = canonical_form(g);
  std::string bytes = "topobi-canon-v1";
  bytes.reserve(bytes.size() + form.size() * 8);
  for (std::uint64_t w : form)
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((w >> (8 * i)) & 0xff));
  return sha256_key(bytes);
}

inline bool is_isomorphic(const CircuitGraph& a, const CircuitGraph& b) {
  if (a.devices().size() != b.devices().size() || a.nets().size() != b.nets().size() ||
      a.edges().size() != b.edges().size())
    return false;
  return canonical_form(a) == canonical_form(b);
}

}  // namespace topobi

template <>
struct std::hash<topobi::CanonicalKey> {
  std::size_t operator()(const topobi::CanonicalKey& k) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | k.digest[i];
    return h;
  }
};
