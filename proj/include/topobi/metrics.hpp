#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "topobi/canonical.hpp"
#include "topobi/error.hpp"
#include "topobi/lm.hpp"
#include "topobi/parallel.hpp"
#include "topobi/sequence.hpp"
#include "topobi/spice.hpp"

namespace topobi {

struct GeneratedSample {
  std::string id;
  CircuitType circuit_type = CircuitType::General;
  SampleOutcome outcome = SampleOutcome::Terminated;
  CircuitSequence sequence;
};

struct SampleVerdict {
  bool valid = false;
  std::optional<CanonicalKey> key;  // valid samples only
  std::string failure;              // why invalid
};

// Valid means Terminated and translatable to SPICE.
inline SampleVerdict judge_sample(const Vocabulary& vocab, const GeneratedSample& s,
                                  const SizingRules& rules = {}) {
  SampleVerdict v;
  if (s.outcome != SampleOutcome::Terminated) {
    v.failure = outcome_name(s.outcome);
    return v;
  }
  try {
    const CircuitGraph g = parse_sequence(vocab, s.sequence);
    translate_to_spice(g, rules);
    v.valid = true;
    v.key = canonical_key(g);
  } catch (const Error& e) {
    v.failure = e.what();
  }
  return v;
}

inline std::vector<SampleVerdict> judge_samples(const Vocabulary& vocab,
                                                const std::vector<GeneratedSample>& samples,
                                                unsigned jobs = 1, const SizingRules& rules = {}) {
  std::vector<SampleVerdict> out(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) { out[i] = judge_sample(vocab, samples[i], rules); });
  return out;
}

inline double validity_rate(const std::vector<SampleVerdict>& verdicts) {
  if (verdicts.empty()) throw Error(ErrorKind::Config, "no samples to score");
  const auto valid = std::count_if(verdicts.begin(), verdicts.end(), [](auto const& v) { return v.valid; });
  return static_cast<double>(valid) / static_cast<double>(verdicts.size());
}

// Over valid samples only; an empty valid set yields 0.
inline double novelty_rate(const std::vector<SampleVerdict>& verdicts,
                           const std::set<CanonicalKey>& train_keys) {
  std::size_t valid = 0, novel = 0;
  for (auto const& v : verdicts) {
    if (!v.valid) continue;
    ++valid;
    novel += !train_keys.count(*v.key);
  }
  return valid ? static_cast<double>(novel) / static_cast<double>(valid) : 0.0;
}

// Over all samples.
inline double valid_and_novel_rate(const std::vector<SampleVerdict>& verdicts,
                                   const std::set<CanonicalKey>& train_keys) {
  if (verdicts.empty()) throw Error(ErrorKind::Config, "no samples to score");
  const auto n = std::count_if(verdicts.begin(), verdicts.end(),
                               [&](auto const& v) { return v.valid && !train_keys.count(*v.key); });
  return static_cast<double>(n) / static_cast<double>(verdicts.size());
}

// ---------------------------------------------------------------------------
// n-gram memorization

enum class WindowMode : std::uint8_t {
  Boundary,  // training side: leading and trailing windows only
  Anywhere,  // training side: every window
};

struct NgramMatch {
  double rate = 0;
  std::size_t matched = 0;
  std::size_t considered = 0;
  std::size_t too_short = 0;  // samples shorter than n, excluded
};

// A sample matches when its leading or trailing n-token window (unpadded,
// leading window starting at the circuit-type token) occurs among the
// training windows.
inline NgramMatch ngram_match_rate(const std::vector<CircuitSequence>& samples,
                                   const std::vector<CircuitSequence>& train, std::size_t n = 10,
                                   WindowMode mode = WindowMode::Boundary) {
  if (n < 1) throw Error(ErrorKind::Config, "window length must be >= 1");
  std::set<std::vector<TokenId>> windows;
  for (auto const& s : train) {
    auto const& t = s.tokens;
    if (t.size() < n) continue;
    if (mode == WindowMode::Anywhere) {
      for (std::size_t i = 0; i + n <= t.size(); ++i) windows.emplace(t.begin() + i, t.begin() + i + n);
    } else {
      windows.emplace(t.begin(), t.begin() + n);
      windows.emplace(t.end() - n, t.end());
    }
  }
  NgramMatch m;
  for (auto const& s : samples) {
    auto const& t = s.tokens;
    if (t.size() < n) {
      ++m.too_short;
      continue;
    }
    ++m.considered;
    if (windows.count({t.begin(), t.begin() + n}) || windows.count({t.end() - n, t.end()})) ++m.matched;
  }
  m.rate = m.considered ? static_cast<double>(m.matched) / static_cast<double>(m.considered) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Type accuracy against externally predicted labels

// sample_id<TAB>predicted_type
inline std::map<std::string, CircuitType> read_labels(std::istream& in) {
  std::map<std::string, CircuitType> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::Parse, "labels line needs id<TAB>type", line_no);
    auto type = parse_circuit_type(line.substr(tab + 1));
    if (!type) throw Error(ErrorKind::Parse, "unknown circuit type '" + line.substr(tab + 1) + "'", line_no);
    out[line.substr(0, tab)] = *type;
  }
  return out;
}

struct TypeAccuracy {
  double rate = 0;
  std::size_t correct = 0;
  std::size_t considered = 0;  // General-conditioned samples excluded
};

inline TypeAccuracy type_accuracy(const std::vector<GeneratedSample>& samples,
                                  const std::map<std::string, CircuitType>& labels) {
  std::vector<std::string> missing;
  TypeAccuracy acc;
  for (auto const& s : samples) {
    if (s.circuit_type == CircuitType::General) continue;
    auto it = labels.find(s.id);
    if (it == labels.end()) {
      missing.push_back(s.id);
      continue;
    }
    ++acc.considered;
    acc.correct += it->second == s.circuit_type;
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) ids += ", ...";
    throw Error(ErrorKind::Config, std::to_string(missing.size()) + " sample(s) lack a label: " + ids);
  }
  acc.rate = acc.considered ? static_cast<double>(acc.correct) / static_cast<double>(acc.considered) : 0.0;
  return acc;
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string label;  // type name or "Aggregate"
  std::size_t samples = 0;
  double validity = 0;
  double novelty = 0;
  double valid_and_novel = 0;
  std::optional<double> type_accuracy;
  std::optional<double> ngram_match_rate;
  double dead_end_rate = 0;
  double length_cap_rate = 0;
};

struct GenerationReport {
  std::vector<ReportRow> rows;  // per present type, then aggregate
  std::size_t ngram_too_short = 0;

  const ReportRow& aggregate() const { return rows.back(); }

  void write_tsv(std::ostream& out) const {
    out << "type\tsamples\tvalidity\tnovelty\tvalid_and_novel\ttype_accuracy\tngram_match_rate\t"
           "dead_end_rate\tlength_cap_rate\n";
    auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", v);
      return std::string(buf);
    };
    auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("-"); };
    for (auto const& r : rows)
      out << r.label << '\t' << r.samples << '\t' << num(r.validity) << '\t' << num(r.novelty) << '\t'
          << num(r.valid_and_novel) << '\t' << opt(r.type_accuracy) << '\t' << opt(r.ngram_match_rate)
          << '\t' << num(r.dead_end_rate) << '\t' << num(r.length_cap_rate) << '\n';
  }

  void write_summary(std::ostream& out) const {
    auto const& a = aggregate();
    char buf[64];
    auto put = [&](const char* key, double v) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << key << '=' << buf << '\n';
    };
    out << "samples=" << a.samples << '\n';
    put("validity", a.validity);
    put("novelty", a.novelty);
    put("valid_and_novel", a.valid_and_novel);
    if (a.type_accuracy) put("type_accuracy", *a.type_accuracy);
    if (a.ngram_match_rate) put("ngram_match_rate", *a.ngram_match_rate);
    out << "ngram_too_short=" << ngram_too_short << '\n';
    put("dead_end_rate", a.dead_end_rate);
    put("length_cap_rate", a.length_cap_rate);
  }
};

struct ReportInputs {
  const std::set<CanonicalKey>* train_keys = nullptr;
  const std::vector<CircuitSequence>* train_sequences = nullptr;  // enables n-gram matching
  const std::map<std::string, CircuitType>* labels = nullptr;     // enables type accuracy
  std::size_t ngram_n = 10;
  WindowMode window_mode = WindowMode::Boundary;
};

inline GenerationReport build_report(const std::vector<GeneratedSample>& samples,
                                     const std::vector<SampleVerdict>& verdicts, const ReportInputs& in) {
  if (samples.empty()) throw Error(ErrorKind::Config, "no samples to score");
  static const std::set<CanonicalKey> no_keys;
  const auto& keys = in.train_keys ? *in.train_keys : no_keys;
  if (in.labels) type_accuracy(samples, *in.labels);  // reports every missing label up front

  auto row_for = [&](const std::string& label, const std::vector<std::size_t>& idx) {
    ReportRow r;
    r.label = label;
    r.samples = idx.size();
    std::vector<SampleVerdict> v;
    std::vector<GeneratedSample> s;
    std::vector<CircuitSequence> seqs;
    std::size_t dead = 0, capped = 0;
    for (std::size_t i : idx) {
      v.push_back(verdicts[i]);
      s.push_back(samples[i]);
      seqs.push_back(samples[i].sequence);
      dead += samples[i].outcome == SampleOutcome::DeadEnd;
      capped += samples[i].outcome == SampleOutcome::LengthCapped;
    }
    const double n = static_cast<double>(idx.size());
    r.validity = validity_rate(v);
    r.novelty = novelty_rate(v, keys);
    r.valid_and_novel = valid_and_novel_rate(v, keys);
    r.dead_end_rate = static_cast<double>(dead) / n;
    r.length_cap_rate = static_cast<double>(capped) / n;
    if (in.labels) {
      auto acc = type_accuracy(s, *in.labels);
      if (acc.considered) r.type_accuracy = acc.rate;
    }
    std::size_t short_count = 0;
    if (in.train_sequences) {
      auto m = ngram_match_rate(seqs, *in.train_sequences, in.ngram_n, in.window_mode);
      if (m.considered) r.ngram_match_rate = m.rate;
      short_count = m.too_short;
    }
    return std::pair{r, short_count};
  };

  GenerationReport report;
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) all[i] = i;
  for (CircuitType t : kAllCircuitTypes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].circuit_type == t) idx.push_back(i);
    if (!idx.empty()) report.rows.push_back(row_for(circuit_type_name(t), idx).first);
  }
  auto [agg, too_short] = row_for("Aggregate", all);
  report.rows.push_back(agg);
  report.ngram_too_short = too_short;
  return report;
}

}  // namespace topobi
