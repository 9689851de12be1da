#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "topobi/error.hpp"
#include "topobi/grammar.hpp"
#include "topobi/rng.hpp"
#include "topobi/sequence.hpp"
#include "topobi/subprocess.hpp"
#include "topobi/vocab.hpp"

namespace topobi {

// Autoregressive score source. scores() returns one log-score (logit) per
// vocabulary id; only the admissible ids are read by the sampler.
class TokenSource {
 public:
  virtual ~TokenSource() = default;
  virtual std::vector<double> scores(std::span<const TokenId> history,
                                     std::span<const TokenId> admissible) = 0;
};

// ---------------------------------------------------------------------------
// Add-k smoothed n-gram with backoff to the longest context seen in training.

class NGramModel final : public TokenSource {
 public:
  struct Table {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> counts;
  };

  // Each training sequence contributes its unpadded tokens followed by one
  // TRUNCATE, so termination is learnable. Targets start after the leading
  // circuit-type token.
  static NGramModel train(const Vocabulary& vocab, std::span<const CircuitSequence> data, int order,
                          double k) {
    if (order < 1) throw Error(ErrorKind::Config, "n-gram order must be >= 1");
    if (!(k > 0)) throw Error(ErrorKind::Config, "smoothing constant must be > 0");
    if (data.empty()) throw Error(ErrorKind::Config, "empty training dataset");
    NGramModel m;
    m.order_ = order;
    m.k_ = k;
    m.vocab_size_ = vocab.size();
    for (auto const& seq : data) {
      std::vector<TokenId> s = seq.tokens;
      s.push_back(vocab.truncate_id());
      for (std::size_t i = 1; i < s.size(); ++i) {
        const std::size_t max_ctx = std::min<std::size_t>(static_cast<std::size_t>(order - 1), i);
        for (std::size_t len = 0; len <= max_ctx; ++len) {
          Table& t = m.tables_[key(std::span(s).subspan(i - len, len))];
          ++t.total;
          ++t.counts[s[i]];
        }
      }
    }
    return m;
  }

  int order() const { return order_; }
  double k() const { return k_; }
  std::size_t vocab_size() const { return vocab_size_; }
  const Table* table(std::span<const TokenId> context) const {
    auto it = tables_.find(key(context));
    return it == tables_.end() ? nullptr : &it->second;
  }

  // Longest suffix of `history` (at most order-1 tokens) seen as a context.
  std::size_t context_length(std::span<const TokenId> history) const {
    std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(order_ - 1), history.size());
    for (;; --len) {
      if (auto t = table(history.subspan(history.size() - len)); t && t->total > 0) return len;
      if (len == 0) return 0;
    }
  }

  std::vector<double> next_distribution(std::span<const TokenId> history) const {
    const std::size_t len = context_length(history);
    const Table* t = table(history.subspan(history.size() - len));
    const double denom = static_cast<double>(t ? t->total : 0) + k_ * static_cast<double>(vocab_size_);
    std::vector<double> p(vocab_size_, k_ / denom);
    if (t)
      for (auto [tok, c] : t->counts) p[tok] = (static_cast<double>(c) + k_) / denom;
    return p;
  }

  std::vector<double> scores(std::span<const TokenId> history, std::span<const TokenId>) override {
    auto p = next_distribution(history);
    for (double& x : p) x = std::log(x);
    return p;
  }

  void save(std::ostream& out) const {
    out << "topobi-ngram 1\n"
        << "order " << order_ << '\n'
        << "k " << std::setprecision(17) << k_ << '\n'
        << "vocab " << vocab_size_ << '\n';
    std::vector<const std::pair<const std::u32string, Table>*> rows;
    for (auto const& row : tables_) rows.push_back(&row);
    std::sort(rows.begin(), rows.end(), [](auto a, auto b) {
      if (a->first.size() != b->first.size()) return a->first.size() < b->first.size();
      return a->first < b->first;
    });
    for (auto const* row : rows) {
      out << "ctx " << row->first.size();
      for (char32_t c : row->first) out << ' ' << static_cast<std::uint32_t>(c);
      std::vector<std::pair<TokenId, std::uint64_t>> counts(row->second.counts.begin(),
                                                            row->second.counts.end());
      std::sort(counts.begin(), counts.end());
      out << " |";
      for (auto [tok, c] : counts) out << ' ' << tok << ':' << c;
      out << '\n';
    }
  }

  static NGramModel load(std::istream& in, const Vocabulary& vocab) {
    NGramModel m;
    std::string line, word;
    auto fail = [](const std::string& why) { return Error(ErrorKind::Parse, "n-gram model: " + why); };
    if (!std::getline(in, line) || line != "topobi-ngram 1") throw fail("bad header");
    std::size_t vocab_size = 0;
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(in, line)) throw fail("truncated header");
      std::istringstream ls(line);
      ls >> word;
      if (word == "order") ls >> m.order_;
      else if (word == "k") ls >> m.k_;
      else if (word == "vocab") ls >> vocab_size;
      else throw fail("unexpected header field '" + word + "'");
    }
    if (vocab_size != vocab.size()) throw fail("vocabulary size mismatch");
    m.vocab_size_ = vocab_size;
    std::size_t line_no = 4;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::size_t len = 0;
      if (!(ls >> word) || word != "ctx" || !(ls >> len)) throw fail("bad row at line " + std::to_string(line_no));
      std::u32string ctx;
      for (std::size_t i = 0; i < len; ++i) {
        std::uint32_t id = 0;
        if (!(ls >> id)) throw fail("bad context at line " + std::to_string(line_no));
        ctx.push_back(static_cast<char32_t>(id));
      }
      if (!(ls >> word) || word != "|") throw fail("missing '|' at line " + std::to_string(line_no));
      Table& t = m.tables_[ctx];
      while (ls >> word) {
        const auto colon = word.find(':');
        if (colon == std::string::npos) throw fail("bad count at line " + std::to_string(line_no));
        const auto tok = static_cast<TokenId>(std::stoul(word.substr(0, colon)));
        const auto c = std::stoull(word.substr(colon + 1));
        if (tok >= vocab_size) throw fail("token id out of range at line " + std::to_string(line_no));
        t.counts[tok] += c;
        t.total += c;
      }
    }
    if (m.order_ < 1 || !(m.k_ > 0)) throw fail("bad order or k");
    return m;
  }

 private:
  static std::u32string key(std::span<const TokenId> ctx) {
    return std::u32string(ctx.begin(), ctx.end());
  }

  int order_ = 1;
  double k_ = 0.1;
  std::size_t vocab_size_ = 0;
  std::unordered_map<std::u32string, Table> tables_;
};

// ---------------------------------------------------------------------------
// Replays stored sequences: probability one on the stored continuation of the
// current history (first stored sequence wins on shared prefixes).

class MemorizingModel final : public TokenSource {
 public:
  MemorizingModel(const Vocabulary& vocab, std::span<const CircuitSequence> data)
      : vocab_size_(vocab.size()) {
    for (auto const& seq : data) {
      std::vector<TokenId> s = seq.tokens;
      s.push_back(vocab.truncate_id());
      std::u32string prefix;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        prefix.push_back(static_cast<char32_t>(s[i]));
        next_.emplace(prefix, s[i + 1]);
      }
    }
  }

  std::vector<double> scores(std::span<const TokenId> history, std::span<const TokenId>) override {
    std::vector<double> out(vocab_size_, -std::numeric_limits<double>::infinity());
    auto it = next_.find(std::u32string(history.begin(), history.end()));
    if (it != next_.end()) out[it->second] = 0.0;
    return out;
  }

 private:
  std::size_t vocab_size_;
  std::unordered_map<std::u32string, TokenId> next_;
};

// ---------------------------------------------------------------------------
// Out-of-process model over a line protocol:
//   peer  -> HELLO topobi-lm 1
//   us    -> CTX <k> <id_1> ... <id_k>
//   us    -> MASK <m> <id_1> ... <id_m>
//   peer  -> LOGITS <id:value> ...      (must cover every masked-in id)

class ExternalModel final : public TokenSource {
 public:
  ExternalModel(const Vocabulary& vocab, const std::string& command, int timeout_ms = 30000)
      : vocab_size_(vocab.size()), process_(command, timeout_ms) {
    auto hello = receive();
    if (hello != "HELLO topobi-lm 1") throw session_error("expected handshake 'HELLO topobi-lm 1'");
  }

  std::vector<double> scores(std::span<const TokenId> history,
                             std::span<const TokenId> admissible) override {
    std::ostringstream ctx, mask;
    ctx << "CTX " << history.size();
    for (TokenId t : history) ctx << ' ' << t;
    mask << "MASK " << admissible.size();
    for (TokenId t : admissible) mask << ' ' << t;
    send(ctx.str());
    send(mask.str());
    const std::string reply = receive();

    std::istringstream in(reply);
    std::string word;
    if (!(in >> word) || word != "LOGITS") throw session_error("expected LOGITS reply");
    std::vector<double> out(vocab_size_, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> given(vocab_size_, 0);
    while (in >> word) {
      const auto colon = word.find(':');
      if (colon == std::string::npos || colon == 0) throw session_error("malformed entry '" + word + "'");
      char* end = nullptr;
      const std::string id_text = word.substr(0, colon);
      const unsigned long id = std::strtoul(id_text.c_str(), &end, 10);
      if (*end != '\0') throw session_error("malformed id in '" + word + "'");
      const std::string value_text = word.substr(colon + 1);
      const double value = std::strtod(value_text.c_str(), &end);
      if (value_text.empty() || *end != '\0') throw session_error("malformed value in '" + word + "'");
      if (id >= vocab_size_) continue;  // outside the vocabulary; cannot be sampled
      out[id] = value;
      given[id] = 1;
    }
    for (TokenId t : admissible)
      if (!given[t])
        throw Error(ErrorKind::Protocol, "peer omitted admissible id " + std::to_string(t) + transcript());
    return out;
  }

 private:
  void send(const std::string& line) {
    remember("> " + line);
    process_.write_line(line);
  }

  std::string receive() {
    auto line = process_.read_line();
    if (!line) throw session_error("peer closed its output");
    remember("< " + *line);
    return *line;
  }

  void remember(std::string line) {
    if (line.size() > 200) line = line.substr(0, 200) + "...";
    transcript_.push_back(std::move(line));
    if (transcript_.size() > 6) transcript_.pop_front();
  }

  std::string transcript() const {
    std::string out = "\ntranscript tail:";
    for (auto const& l : transcript_) out += "\n  " + l;
    return out;
  }

  Error session_error(const std::string& why) const { return Error(ErrorKind::Session, why + transcript()); }

  std::size_t vocab_size_;
  Subprocess process_;
  std::deque<std::string> transcript_;
};

// ---------------------------------------------------------------------------
// Grammar-constrained sampling

struct SamplerConfig {
  double temperature = 0.7;
  std::size_t max_length = kMaxSequenceLength;
  std::uint64_t seed = 0;
};

enum class SampleOutcome : std::uint8_t { Terminated, DeadEnd, LengthCapped };

inline const char* outcome_name(SampleOutcome o) {
  switch (o) {
    case SampleOutcome::Terminated: return "Terminated";
    case SampleOutcome::DeadEnd: return "DeadEnd";
    case SampleOutcome::LengthCapped: return "LengthCapped";
  }
  return "?";
}

inline std::optional<SampleOutcome> parse_outcome(std::string_view s) {
  for (auto o : {SampleOutcome::Terminated, SampleOutcome::DeadEnd, SampleOutcome::LengthCapped})
    if (s == outcome_name(o)) return o;
  return std::nullopt;
}

struct SampleResult {
  CircuitSequence sequence;  // without the terminating TRUNCATE
  SampleOutcome outcome = SampleOutcome::DeadEnd;
};

// Draws one id from admissible scores after temperature scaling. Returns
// nullopt when every admissible id has zero probability.
inline std::optional<TokenId> draw_token(std::span<const double> scores,
                                         std::span<const TokenId> admissible, double temperature,
                                         Rng& rng) {
  std::vector<double> z;
  z.reserve(admissible.size());
  double top = -std::numeric_limits<double>::infinity();
  for (TokenId id : admissible) {
    double s = scores[id];
    if (std::isnan(s)) s = -std::numeric_limits<double>::infinity();
    z.push_back(s / temperature);
    top = std::max(top, z.back());
  }
  if (!std::isfinite(top)) return std::nullopt;
  double total = 0;
  for (double& x : z) {
    x = std::exp(x - top);
    total += x;
  }
  double u = rng.unit() * total;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] == 0) continue;
    if (u < z[i]) return admissible[i];
    u -= z[i];
  }
  for (std::size_t i = z.size(); i-- > 0;)  // rounding fallthrough
    if (z[i] > 0) return admissible[i];
  return std::nullopt;
}

inline SampleResult sample_sequence(TokenSource& source, const Vocabulary& vocab, CircuitType type,
                                    const SamplerConfig& config) {
  if (!(config.temperature > 0)) throw Error(ErrorKind::Config, "temperature must be > 0");
  GrammarDecoder decoder(vocab, type);
  Rng rng(config.seed);
  SampleResult result;
  auto& tokens = result.sequence.tokens;
  tokens = {vocab.circuit_type_id(type), vocab.vss_id()};
  while (tokens.size() < config.max_length) {
    const auto admissible = mask_ids(decoder.mask());
    if (admissible.empty()) {
      result.outcome = SampleOutcome::DeadEnd;
      return result;
    }
    const auto scores = source.scores(tokens, admissible);
    const auto pick = draw_token(scores, admissible, config.temperature, rng);
    if (!pick) {
      result.outcome = SampleOutcome::DeadEnd;
      return result;
    }
    decoder.apply(*pick);
    if (*pick == vocab.truncate_id()) {
      result.outcome = SampleOutcome::Terminated;
      return result;
    }
    tokens.push_back(*pick);
  }
  result.outcome = SampleOutcome::LengthCapped;
  return result;
}

}  // namespace topobi
