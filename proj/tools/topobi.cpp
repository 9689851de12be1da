// topobi command-line front end.
//
//   topobi vocab    --dump FILE
//   topobi ingest   --manifest F --out DIR [--split 0.9] [--seed S]
//   topobi augment  --corpus DIR --out FILE [--traversals K] [--renames R] [--seed S]
//   topobi train    --data FILE --out MODEL [--order 4] [--k 0.1]
//   topobi generate (--model MODEL | --exec CMD) --type T (--count N | --count-total N) --out FILE
//   topobi to-spice --in FILE --out DIR [--rules CFG]
//   topobi score    --generated FILE --train DIR --report FILE [--labels F] [--train-data FILE]
//
// Exit status: 0 success, 1 domain failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "topobi/config.hpp"
#include "topobi/topobi.hpp"

namespace fs = std::filesystem;
using namespace topobi;

namespace {

constexpr const char* kVersion = "topobi 0.1.0";

// Settings resolved from the config file, then overridden by explicit flags.
struct Run {
  std::string command;
  KeyValueConfig settings;
  std::vector<std::pair<std::string, std::string>> inputs;  // (role, path)

  // Path-valued settings are recorded by file name only, so identical runs in
  // different directories produce identical provenance.
  std::string provenance() const {
    static const std::set<std::string> path_keys = {"out", "in", "manifest", "corpus", "data", "model",
                                                    "generated", "train", "report", "labels",
                                                    "train_data", "rules", "dump"};
    KeyValueConfig portable;
    for (auto const& [k, v] : settings.values())
      portable.set(k, path_keys.count(k) ? fs::path(v).filename().string() : v);
    std::ostringstream out;
    out << "tool=" << kVersion << '\n' << "command=" << command << '\n';
    for (auto const& [k, v] : portable.values()) out << "setting." << k << '=' << v << '\n';
    out << "config_hash=" << portable.hash() << '\n';
    for (auto const& [role, path] : inputs) {
      std::string digest = "-";
      if (fs::is_regular_file(path)) digest = sha256_key(read_file(path)).hex();
      out << "input." << role << '=' << fs::path(path).filename().string() << ' ' << digest << '\n';
    }
    return out.str();
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// Flags registered as strings; explicitly given ones land in the settings.
class Flags {
 public:
  explicit Flags(CLI::App* app) : app_(app) {}

  CLI::Option* add(const std::string& name, const std::string& key, const std::string& help) {
    auto& slot = values_.emplace_back(key, std::string());
    auto* opt = app_->add_option(name, slot.second, help);
    options_.push_back(opt);
    return opt;
  }

  void apply(KeyValueConfig& settings) const {
    for (std::size_t i = 0; i < options_.size(); ++i)
      if (options_[i]->count()) settings.set(values_[i].first, values_[i].second);
  }

 private:
  CLI::App* app_;
  std::deque<std::pair<std::string, std::string>> values_;
  std::vector<CLI::Option*> options_;
};

std::string require(const KeyValueConfig& s, const std::string& key) {
  auto v = s.get(key);
  if (!v || v->empty()) throw Error(ErrorKind::Config, "missing required setting '" + key + "'");
  return *v;
}

Vocabulary make_vocab(const KeyValueConfig& s) { return Vocabulary::build(vocabulary_config(s)); }

// ---------------------------------------------------------------------------
// Corpus directory: corpus.tsv, graphs/*.sp, counts.tsv, train_keys.txt

void write_corpus_dir(const fs::path& dir, const Corpus& corpus) {
  fs::create_directories(dir / "graphs");
  std::ostringstream index;
  index << "# id\tsplit\tcircuit_type\tsource_path\tcanonical_key\n";
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    auto const& e = corpus.entries[i];
    char id[16];
    std::snprintf(id, sizeof id, "%05zu", i + 1);
    std::ostringstream deck;
    write_netlist(deck, e.graph);
    write_text(dir / "graphs" / (std::string(id) + ".sp"), deck.str());
    index << id << '\t' << split_name(e.split) << '\t' << circuit_type_name(e.circuit_type) << '\t'
          << e.source_path << '\t' << e.key.hex() << '\n';
  }
  write_text(dir / "corpus.tsv", index.str());

  std::ostringstream counts;
  counts << "type\ttrain\tvalidation\n";
  for (CircuitType t : kAllCircuitTypes) {
    auto const& c = corpus.counts[static_cast<std::size_t>(t)];
    counts << circuit_type_name(t) << '\t' << c.train << '\t' << c.validation << '\n';
  }
  write_text(dir / "counts.tsv", counts.str());

  std::ostringstream keys;
  for (auto const& [key, first] : corpus.train_keys) keys << key.hex() << '\n';
  write_text(dir / "train_keys.txt", keys.str());
}

Corpus read_corpus_dir(const fs::path& dir, const Vocabulary& vocab) {
  std::ifstream in(dir / "corpus.tsv");
  if (!in) throw Error(ErrorKind::Io, "cannot read " + (dir / "corpus.tsv").string());
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string id, split, type, source, key;
    if (!std::getline(row, id, '\t') || !std::getline(row, split, '\t') || !std::getline(row, type, '\t') ||
        !std::getline(row, source, '\t') || !std::getline(row, key, '\t'))
      throw Error(ErrorKind::Parse, "corpus.tsv: expected 5 columns", line_no);
    CorpusEntry e;
    e.source_path = source;
    e.circuit_type = require_circuit_type(type);
    if (split != "train" && split != "validation")
      throw Error(ErrorKind::Parse, "corpus.tsv: bad split '" + split + "'", line_no);
    e.split = split == "train" ? Split::Train : Split::Validation;
    e.graph = parse_spice_netlist(read_file(dir / "graphs" / (id + ".sp")), vocab);
    e.graph.circuit_type = e.circuit_type;
    auto parsed = CanonicalKey::from_hex(key);
    if (!parsed) throw Error(ErrorKind::Parse, "corpus.tsv: bad canonical key", line_no);
    e.key = *parsed;
    auto& c = corpus.counts[static_cast<std::size_t>(e.circuit_type)];
    ++(e.split == Split::Train ? c.train : c.validation);
    if (e.split == Split::Train) corpus.train_keys.emplace(e.key, corpus.entries.size());
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

std::set<CanonicalKey> read_train_keys(const fs::path& dir) {
  std::ifstream in(dir / "train_keys.txt");
  if (!in) throw Error(ErrorKind::Io, "cannot read " + (dir / "train_keys.txt").string());
  std::set<CanonicalKey> keys;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto k = CanonicalKey::from_hex(line);
    if (!k) throw Error(ErrorKind::Parse, "train_keys.txt: bad key '" + line + "'");
    keys.insert(*k);
  }
  return keys;
}

std::vector<CircuitSequence> load_sequences(const fs::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return read_sequences(in, vocab);
}

// Generated samples: the sequence file plus its FILE.samples.tsv sidecar when present.
std::vector<GeneratedSample> load_generated(const fs::path& path, const Vocabulary& vocab) {
  const auto seqs = load_sequences(path, vocab);
  std::vector<GeneratedSample> out(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out[i].sequence = seqs[i];
    out[i].id = std::to_string(i + 1);
    if (!seqs[i].tokens.empty() && vocab.category(seqs[i].tokens[0]) == TokenCategory::CircuitType)
      out[i].circuit_type = vocab[seqs[i].tokens[0]].circuit_type;
  }
  std::ifstream side(path.string() + ".samples.tsv");
  if (!side) return out;
  std::string line;
  std::size_t row = 0, line_no = 0;
  while (std::getline(side, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream cols(line);
    std::string id, type, outcome;
    if (!std::getline(cols, id, '\t') || !std::getline(cols, type, '\t') || !std::getline(cols, outcome, '\t'))
      throw Error(ErrorKind::Parse, path.string() + ".samples.tsv: expected id, type, outcome", line_no);
    if (row >= out.size()) throw Error(ErrorKind::Parse, path.string() + ".samples.tsv has more rows than sequences");
    auto o = parse_outcome(outcome);
    if (!o) throw Error(ErrorKind::Parse, "unknown outcome '" + outcome + "'", line_no);
    out[row].id = id;
    out[row].circuit_type = require_circuit_type(type);
    out[row].outcome = *o;
    ++row;
  }
  if (row != out.size()) throw Error(ErrorKind::Parse, path.string() + ".samples.tsv has fewer rows than sequences");
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

int run_vocab(Run& run) {
  const auto vocab = make_vocab(run.settings);
  std::ostringstream out;
  vocab.dump(out);
  const std::string dest = require(run.settings, "dump");
  if (dest == "-") {
    std::cout << out.str();
  } else {
    write_text(dest, out.str());
    write_text(dest + ".prov", run.provenance());
  }
  return 0;
}

int run_ingest(Run& run) {
  const auto vocab = make_vocab(run.settings);
  const std::string manifest = require(run.settings, "manifest");
  const fs::path out = require(run.settings, "out");
  run.inputs.emplace_back("manifest", manifest);
  const Corpus corpus = load_corpus(manifest, vocab, run.settings.number("split", 0.9),
                                    run.settings.integer("seed", 0));
  write_corpus_dir(out, corpus);
  write_text(out / "provenance.txt", run.provenance());
  std::size_t train = 0;
  for (auto const& c : corpus.counts) train += c.train;
  std::cerr << "ingested " << corpus.entries.size() << " circuits (" << train << " train, "
            << corpus.train_keys.size() << " distinct train topologies)\n";
  return 0;
}

int run_augment(Run& run) {
  const auto vocab = make_vocab(run.settings);
  const fs::path dir = require(run.settings, "corpus");
  const std::string out = require(run.settings, "out");
  run.inputs.emplace_back("corpus", (dir / "corpus.tsv").string());
  const Corpus corpus = read_corpus_dir(dir, vocab);
  AugmentConfig cfg;
  cfg.traversals = run.settings.integer("traversals", cfg.traversals);
  cfg.renames = run.settings.integer("renames", cfg.renames);
  cfg.seed = run.settings.integer("seed", 0);
  cfg.jobs = static_cast<unsigned>(run.settings.integer("jobs", 1));
  for (CircuitType t : kAllCircuitTypes) {
    const std::string name = circuit_type_name(t);
    if (run.settings.has("traversals." + name) || run.settings.has("renames." + name))
      cfg.per_type[t] = {run.settings.integer("traversals." + name, cfg.traversals),
                         run.settings.integer("renames." + name, cfg.renames)};
  }
  const auto data = expand_corpus(vocab, corpus, cfg);
  std::ostringstream seqs, prov, table;
  write_sequences(seqs, vocab, sequences_of(data));
  write_provenance(prov, data);
  write_type_table(table, data.circuits, data.sequences);
  write_text(out, seqs.str());
  write_text(out + ".tsv", prov.str());
  write_text(out + ".counts.tsv", table.str());
  write_text(out + ".prov", run.provenance());
  for (auto const& d : data.diagnostics) std::cerr << "note: " << d << '\n';
  std::cerr << "wrote " << data.rows.size() << " sequences\n";
  return 0;
}

int run_train(Run& run) {
  const auto vocab = make_vocab(run.settings);
  const std::string data = require(run.settings, "data");
  const std::string out = require(run.settings, "out");
  run.inputs.emplace_back("data", data);
  const auto seqs = load_sequences(data, vocab);
  const auto model = NGramModel::train(vocab, seqs, static_cast<int>(run.settings.integer("order", 4)),
                                       run.settings.number("k", 0.1));
  std::ostringstream text;
  model.save(text);
  write_text(out, text.str());
  write_text(out + ".prov", run.provenance());
  return 0;
}

std::vector<CircuitType> selected_types(const std::string& spec) {
  std::vector<CircuitType> out;
  if (spec == "all") return {kAllCircuitTypes.begin(), kAllCircuitTypes.end()};
  std::istringstream in(spec);
  std::string name;
  while (std::getline(in, name, ',')) out.push_back(require_circuit_type(name));
  if (out.empty()) throw Error(ErrorKind::Config, "no circuit type selected");
  return out;
}

int run_generate(Run& run) {
  const auto vocab = make_vocab(run.settings);
  const std::string out = require(run.settings, "out");
  const auto types = selected_types(require(run.settings, "type"));
  const bool have_model = run.settings.has("model"), have_exec = run.settings.has("exec");
  if (have_model == have_exec) throw Error(ErrorKind::Config, "give exactly one of --model or --exec");

  std::vector<std::size_t> per_type(types.size(), 0);
  if (run.settings.has("count_total")) {
    const auto total = run.settings.integer("count_total", 0);
    for (std::size_t i = 0; i < types.size(); ++i)
      per_type[i] = total / types.size() + (i < total % types.size() ? 1 : 0);
  } else {
    for (auto& n : per_type) n = run.settings.integer("count", 1);
  }

  SamplerConfig base;
  base.temperature = run.settings.number("temperature", base.temperature);
  base.max_length = run.settings.integer("max_length", base.max_length);
  const std::uint64_t seed = run.settings.integer("seed", 0);
  const auto jobs = static_cast<unsigned>(run.settings.integer("jobs", 1));

  struct Job {
    std::string id;
    CircuitType type;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (std::size_t t = 0; t < types.size(); ++t)
    for (std::size_t k = 0; k < per_type[t]; ++k) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05zu", circuit_type_name(types[t]), k + 1);
      work.push_back({id, types[t], mix_seed(seed, static_cast<std::uint64_t>(types[t]), k)});
    }
  std::vector<SampleResult> results(work.size());

  if (have_model) {
    run.inputs.emplace_back("model", *run.settings.get("model"));
    std::ifstream in(*run.settings.get("model"));
    if (!in) throw Error(ErrorKind::Io, "cannot read model " + *run.settings.get("model"));
    NGramModel model = NGramModel::load(in, vocab);
    parallel_for(work.size(), jobs, [&](std::size_t i) {
      SamplerConfig c = base;
      c.seed = work[i].seed;
      results[i] = sample_sequence(model, vocab, work[i].type, c);
    });
  } else {
    // One peer session per contiguous chunk of samples.
    const std::string cmd = *run.settings.get("exec");
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(jobs, work.size()));
    const auto timeout = static_cast<int>(run.settings.integer("peer_timeout_ms", 30000));
    parallel_for(chunks, jobs, [&](std::size_t c) {
      const std::size_t lo = work.size() * c / chunks, hi = work.size() * (c + 1) / chunks;
      if (lo == hi) return;
      ExternalModel peer(vocab, cmd, timeout);
      for (std::size_t i = lo; i < hi; ++i) {
        SamplerConfig sc = base;
        sc.seed = work[i].seed;
        results[i] = sample_sequence(peer, vocab, work[i].type, sc);
      }
    });
  }

  std::ostringstream seqs, side;
  std::array<std::size_t, 3> tally{};
  for (std::size_t i = 0; i < work.size(); ++i) {
    seqs << to_text(vocab, results[i].sequence) << '\n';
    side << work[i].id << '\t' << circuit_type_name(work[i].type) << '\t' << outcome_name(results[i].outcome)
         << '\t' << work[i].seed << '\n';
    ++tally[static_cast<std::size_t>(results[i].outcome)];
  }
  write_text(out, seqs.str());
  write_text(out + ".samples.tsv", side.str());
  write_text(out + ".prov", run.provenance());
  std::cerr << "generated " << work.size() << " samples: " << tally[0] << " terminated, " << tally[1]
            << " dead ends, " << tally[2] << " length-capped\n";
  return 0;
}

int run_to_spice(Run& run) {
  const auto vocab = make_vocab(run.settings);
  const std::string in = require(run.settings, "in");
  const fs::path out = require(run.settings, "out");
  run.inputs.emplace_back("in", in);
  KeyValueConfig rules_cfg;
  if (auto rules = run.settings.get("rules")) {
    run.inputs.emplace_back("rules", *rules);
    rules_cfg = KeyValueConfig::load(*rules);
  }
  const SizingRules rules = sizing_rules(rules_cfg);
  const auto samples = load_generated(in, vocab);
  fs::create_directories(out);
  std::ostringstream failures;
  std::size_t ok = 0;
  for (auto const& s : samples) {
    if (s.outcome != SampleOutcome::Terminated) {
      failures << s.id << '\t' << outcome_name(s.outcome) << '\n';
      continue;
    }
    try {
      const auto deck = translate_to_spice(vocab, s.sequence, rules);
      write_text(out / (s.id + ".sp"), deck.render());
      ++ok;
    } catch (const Error& e) {
      failures << s.id << '\t' << e.what() << '\n';
    }
  }
  write_text(out / "failures.tsv", failures.str());
  write_text(out / "provenance.txt", run.provenance());
  std::cerr << "translated " << ok << " of " << samples.size() << " samples\n";
  const bool strict = run.settings.get("strict").value_or("false") == "true";
  return strict && ok != samples.size() ? 1 : 0;
}

int run_score(Run& run) {
  const auto vocab = make_vocab(run.settings);
  const std::string gen = require(run.settings, "generated");
  const fs::path train_dir = require(run.settings, "train");
  const std::string report_path = require(run.settings, "report");
  run.inputs.emplace_back("generated", gen);
  run.inputs.emplace_back("train_keys", (train_dir / "train_keys.txt").string());

  const auto samples = load_generated(gen, vocab);
  const auto keys = read_train_keys(train_dir);
  ReportInputs inputs;
  inputs.train_keys = &keys;
  std::vector<CircuitSequence> train_seqs;
  if (auto f = run.settings.get("train_data")) {
    run.inputs.emplace_back("train_data", *f);
    train_seqs = load_sequences(*f, vocab);
    inputs.train_sequences = &train_seqs;
  }
  std::map<std::string, CircuitType> labels;
  if (auto f = run.settings.get("labels")) {
    run.inputs.emplace_back("labels", *f);
    std::ifstream in(*f);
    if (!in) throw Error(ErrorKind::Io, "cannot read labels " + *f);
    labels = read_labels(in);
    inputs.labels = &labels;
  }
  inputs.ngram_n = run.settings.integer("ngram_n", 10);
  const std::string window = run.settings.get("window").value_or("boundary");
  if (window != "boundary" && window != "anywhere")
    throw Error(ErrorKind::Config, "window must be 'boundary' or 'anywhere'");
  inputs.window_mode = window == "anywhere" ? WindowMode::Anywhere : WindowMode::Boundary;

  KeyValueConfig rules_cfg;
  if (auto rules = run.settings.get("rules")) rules_cfg = KeyValueConfig::load(*rules);
  const auto verdicts =
      judge_samples(vocab, samples, static_cast<unsigned>(run.settings.integer("jobs", 1)), sizing_rules(rules_cfg));
  const auto report = build_report(samples, verdicts, inputs);
  std::ostringstream tsv, summary;
  report.write_tsv(tsv);
  report.write_summary(summary);
  write_text(report_path, tsv.str());
  write_text(report_path + ".summary", summary.str());
  write_text(report_path + ".prov", run.provenance());
  std::cout << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Circuit topology toolkit: ingest, augment, train, generate, translate, score"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key=value settings file (default: $TOPOBI_CONFIG)");
  Flags global(&app);
  global.add("--seed", "seed", "random seed");
  global.add("--jobs", "jobs", "worker threads");

  struct Sub {
    CLI::App* app;
    Flags flags;
    int (*run)(Run&);
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto sub = [&](const char* name, const char* help, int (*fn)(Run&)) -> Flags& {
    auto* a = app.add_subcommand(name, help);
    subs.push_back(std::make_unique<Sub>(Sub{a, Flags(a), fn}));
    return subs.back()->flags;
  };

  sub("vocab", "dump the token vocabulary", run_vocab).add("--dump", "dump", "output file or '-'")->required();

  auto& ingest = sub("ingest", "parse a labeled netlist manifest into a corpus directory", run_ingest);
  ingest.add("--manifest", "manifest", "TSV of path<TAB>circuit_type")->required();
  ingest.add("--out", "out", "corpus directory")->required();
  ingest.add("--split", "split", "train fraction per type (default 0.9)");

  auto& augment = sub("augment", "expand a corpus into a sequence dataset", run_augment);
  augment.add("--corpus", "corpus", "corpus directory")->required();
  augment.add("--out", "out", "sequence file")->required();
  augment.add("--traversals", "traversals", "closed walks per circuit (default 5)");
  augment.add("--renames", "renames", "renamed copies per walk, 0 keeps walks as is (default 1)");

  auto& train = sub("train", "fit the n-gram baseline", run_train);
  train.add("--data", "data", "sequence file")->required();
  train.add("--out", "out", "model file")->required();
  train.add("--order", "order", "n-gram order (default 4)");
  train.add("--k", "k", "add-k smoothing constant (default 0.1)");

  auto& generate = sub("generate", "grammar-constrained sampling", run_generate);
  generate.add("--model", "model", "n-gram model file");
  generate.add("--exec", "exec", "external model command (line protocol)");
  generate.add("--type", "type", "circuit type, comma list, or 'all'")->required();
  generate.add("--count", "count", "samples per type (default 1)");
  generate.add("--count-total", "count_total", "total samples split evenly across types");
  generate.add("--temperature", "temperature", "sampling temperature (default 0.7)");
  generate.add("--max-length", "max_length", "token cap (default 1024)");
  generate.add("--out", "out", "sequence file")->required();

  auto& to_spice = sub("to-spice", "translate sequences into SPICE decks", run_to_spice);
  to_spice.add("--in", "in", "sequence file")->required();
  to_spice.add("--out", "out", "deck directory")->required();
  to_spice.add("--rules", "rules", "sizing rules (key=value)");
  to_spice.add("--strict", "strict", "'true' exits 1 when any sample fails");

  auto& score = sub("score", "validity, novelty, memorization and type accuracy", run_score);
  score.add("--generated", "generated", "generated sequence file")->required();
  score.add("--train", "train", "corpus directory")->required();
  score.add("--report", "report", "report TSV")->required();
  score.add("--labels", "labels", "TSV of sample_id<TAB>predicted_type");
  score.add("--train-data", "train_data", "training sequence file for n-gram matching");
  score.add("--ngram-n", "ngram_n", "window length (default 10)");
  score.add("--window", "window", "'boundary' (default) or 'anywhere'");
  score.add("--rules", "rules", "sizing rules (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Run run;
    if (config_path.empty())
      if (const char* env = std::getenv("TOPOBI_CONFIG")) config_path = env;
    if (!config_path.empty()) run.settings = KeyValueConfig::load(config_path);
    global.apply(run.settings);
    for (auto const& s : subs) {
      if (!s->app->parsed()) continue;
      run.command = s->app->get_name();
      s->flags.apply(run.settings);
      return s->run(run);
    }
    return 2;
  } catch (const Error& e) {
    std::cerr << "topobi: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "topobi: " << e.what() << '\n';
    return 1;
  }
}
