#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "topobi/error.hpp"
#include "topobi/ingest.hpp"
#include "topobi/parallel.hpp"
#include "topobi/rng.hpp"
#include "topobi/sequence.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

struct Traversal {
  CircuitSequence sequence;
  std::uint64_t seed = 0;
};

struct TraversalSet {
  std::vector<Traversal> traversals;
  std::vector<std::string> diagnostics;  // discarded attempts and why
};

// K closed-walk attempts with child seeds mix_seed(seed, k). Attempts that
// overflow, fail coverage, or fail ERC are discarded; exact duplicates are
// dropped, so fewer than K sequences may come back.
inline TraversalSet augment_traversals(const Vocabulary& vocab, const CircuitGraph& g, std::size_t k,
                                       std::uint64_t seed,
                                       std::optional<CircuitType> type = std::nullopt) {
  TraversalSet out;
  std::set<std::vector<TokenId>> seen;
  for (std::size_t attempt = 0; attempt < k; ++attempt) {
    const std::uint64_t child = mix_seed(seed, attempt);
    try {
      CircuitSequence s = serialize_closed_walk(vocab, g, child, type);
      const ErcReport erc = sequence_erc(vocab, s);
      if (!erc.ok) {
        out.diagnostics.push_back("attempt " + std::to_string(attempt) + ": ERC failed");
        continue;
      }
      if (!seen.insert(s.tokens).second) continue;
      out.traversals.push_back({std::move(s), child});
    } catch (const Error& e) {
      out.diagnostics.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
      // Overflow and invalid graphs fail identically for every seed.
      if (e.kind() == ErrorKind::SequenceOverflow || e.kind() == ErrorKind::InvalidGraph ||
          e.kind() == ErrorKind::Capacity)
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Device renaming

// Per family, old instance index -> new instance index.
using Renaming = std::array<std::map<int, int>, kFamilyCount>;

// Devices referenced by a sequence, per family, ascending.
inline std::array<std::vector<int>, kFamilyCount> used_devices(const Vocabulary& vocab,
                                                              const CircuitSequence& seq) {
  std::array<std::set<int>, kFamilyCount> used;
  for (TokenId t : seq.tokens)
    if (vocab.category(t) == TokenCategory::Device) {
      const DeviceId d = vocab[t].device;
      used[static_cast<std::size_t>(d.family)].insert(d.index);
    }
  std::array<std::vector<int>, kFamilyCount> out;
  for (std::size_t f = 0; f < kFamilyCount; ++f) out[f].assign(used[f].begin(), used[f].end());
  return out;
}

// Uniform injection of the used indices into 1..cap per family (a random
// permutation of 1..cap restricted to the used indices). `caps` may tighten
// the vocabulary limits.
inline Renaming sample_renaming(const Vocabulary& vocab, const CircuitSequence& seq, std::uint64_t seed,
                                const std::array<int, kFamilyCount>* caps = nullptr) {
  const auto used = used_devices(vocab, seq);
  Renaming r;
  for (DeviceFamily f : kAllFamilies) {
    const auto fi = static_cast<std::size_t>(f);
    const int cap = caps ? std::min((*caps)[fi], vocab.device_limit(f)) : vocab.device_limit(f);
    if (static_cast<int>(used[fi].size()) > cap)
      throw Error(ErrorKind::Capacity, std::to_string(used[fi].size()) + " " + family_name(f) +
                                           " devices exceed the cap of " + std::to_string(cap));
    if (used[fi].empty()) continue;
    std::vector<int> perm(static_cast<std::size_t>(cap));
    for (int i = 0; i < cap; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
    Rng rng(mix_seed(seed, fi));
    rng.shuffle(perm);
    for (std::size_t i = 0; i < used[fi].size(); ++i) r[fi][used[fi][i]] = perm[i];
  }
  return r;
}

inline CircuitSequence apply_renaming(const Vocabulary& vocab, const CircuitSequence& seq,
                                      const Renaming& r) {
  CircuitSequence out = seq;
  for (TokenId& t : out.tokens) {
    if (vocab.category(t) != TokenCategory::Device) continue;
    const DeviceId d = vocab[t].device;
    auto const& m = r[static_cast<std::size_t>(d.family)];
    if (auto it = m.find(d.index); it != m.end()) t = vocab.device_id({d.family, it->second});
  }
  return out;
}

inline CircuitSequence rename_devices(const Vocabulary& vocab, const CircuitSequence& seq,
                                      std::uint64_t seed,
                                      const std::array<int, kFamilyCount>* caps = nullptr) {
  return apply_renaming(vocab, seq, sample_renaming(vocab, seq, seed, caps));
}

// ---------------------------------------------------------------------------
// Corpus expansion

struct AugmentConfig {
  std::size_t traversals = 5;
  std::size_t renames = 1;  // 0 keeps the traversals as they are
  std::uint64_t seed = 0;
  // Per-type (traversals, renames) overrides.
  std::map<CircuitType, std::pair<std::size_t, std::size_t>> per_type;
  unsigned jobs = 1;
};

struct AugmentedRow {
  CircuitSequence sequence;
  std::string source_path;
  CircuitType circuit_type = CircuitType::General;
  std::uint64_t traversal_seed = 0;
  std::optional<std::uint64_t> rename_seed;
};

struct AugmentedDataset {
  std::vector<AugmentedRow> rows;
  std::array<std::size_t, kCircuitTypeCount> circuits{};   // source circuits per type
  std::array<std::size_t, kCircuitTypeCount> sequences{};  // rows per type
  std::vector<std::string> diagnostics;
};

// Expands the train split. Output order follows the corpus order, then
// traversal, then rename, whatever the job count.
inline AugmentedDataset expand_corpus(const Vocabulary& vocab, const Corpus& corpus,
                                      const AugmentConfig& config) {
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i)
    if (corpus.entries[i].split == Split::Train) train.push_back(i);

  struct Chunk {
    std::vector<AugmentedRow> rows;
    std::vector<std::string> diagnostics;
  };
  std::vector<Chunk> chunks(train.size());
  parallel_for(train.size(), config.jobs, [&](std::size_t k) {
    const CorpusEntry& entry = corpus.entries[train[k]];
    std::size_t traversals = config.traversals, renames = config.renames;
    if (auto it = config.per_type.find(entry.circuit_type); it != config.per_type.end())
      std::tie(traversals, renames) = it->second;
    const std::uint64_t circuit_seed = mix_seed(config.seed, train[k]);
    auto set = augment_traversals(vocab, entry.graph, traversals, circuit_seed, entry.circuit_type);
    Chunk& chunk = chunks[k];
    for (auto& d : set.diagnostics) chunk.diagnostics.push_back(entry.source_path + ": " + d);
    std::set<std::vector<TokenId>> seen;
    for (auto const& t : set.traversals) {
      if (renames == 0) {
        if (seen.insert(t.sequence.tokens).second)
          chunk.rows.push_back({t.sequence, entry.source_path, entry.circuit_type, t.seed, std::nullopt});
        continue;
      }
      for (std::size_t r = 0; r < renames; ++r) {
        const std::uint64_t rename_seed = mix_seed(t.seed, r + 1);
        CircuitSequence s = rename_devices(vocab, t.sequence, rename_seed);
        if (seen.insert(s.tokens).second)
          chunk.rows.push_back({std::move(s), entry.source_path, entry.circuit_type, t.seed, rename_seed});
      }
    }
  });

  AugmentedDataset out;
  for (std::size_t k = 0; k < train.size(); ++k) {
    const auto type = static_cast<std::size_t>(corpus.entries[train[k]].circuit_type);
    ++out.circuits[type];
    out.sequences[type] += chunks[k].rows.size();
    for (auto& row : chunks[k].rows) out.rows.push_back(std::move(row));
    for (auto& d : chunks[k].diagnostics) out.diagnostics.push_back(std::move(d));
  }
  return out;
}

inline std::vector<CircuitSequence> sequences_of(const AugmentedDataset& data) {
  std::vector<CircuitSequence> out;
  out.reserve(data.rows.size());
  for (auto const& r : data.rows) out.push_back(r.sequence);
  return out;
}

// line_no<TAB>source_path<TAB>circuit_type<TAB>traversal_seed<TAB>rename_seed
inline void write_provenance(std::ostream& out, const AugmentedDataset& data) {
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    auto const& r = data.rows[i];
    out << i + 1 << '\t' << r.source_path << '\t' << circuit_type_name(r.circuit_type) << '\t'
        << r.traversal_seed << '\t';
    if (r.rename_seed)
      out << *r.rename_seed;
    else
      out << '-';
    out << '\n';
  }
}

// Per-type table: type, source circuits, augmented sequences; then a total.
inline void write_type_table(std::ostream& out, const std::array<std::size_t, kCircuitTypeCount>& circuits,
                             const std::array<std::size_t, kCircuitTypeCount>& sequences) {
  out << "type\tcircuits\tsequences\n";
  std::size_t tc = 0, ts = 0;
  for (CircuitType t : kAllCircuitTypes) {
    const auto i = static_cast<std::size_t>(t);
    out << circuit_type_name(t) << '\t' << circuits[i] << '\t' << sequences[i] << '\n';
    tc += circuits[i];
    ts += sequences[i];
  }
  out << "Total\t" << tc << '\t' << ts << '\n';
}

}  // namespace topobi
