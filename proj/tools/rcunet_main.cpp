// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: corpus generation, training, enhancement,
// evaluation, and architecture analysis.
//
//   rcunet gen-data --out corpus --seed 7
//   rcunet train --arch ALL_RC --corpus corpus --out model.ckpt
//   rcunet enhance --ckpt model.ckpt --in noisy.wav --out clean.wav
//   rcunet evaluate --ckpt model.ckpt --corpus corpus --out report.csv
//   rcunet analyze --all
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcunet/checkpoint.hpp"
#include "rcunet/corpus.hpp"
#include "rcunet/enhance.hpp"
#include "rcunet/report.hpp"
#include "rcunet/stoi.hpp"
#include "rcunet/train.hpp"

namespace {

using namespace rcunet;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered flag map: defaults first, then --config file entries, then
// command-line flags. Later sources override earlier ones.
class Flags {
 public:
  explicit Flags(std::map<std::string, std::string> defaults)
      : values_(std::move(defaults)) {
    for (const auto& [k, v] : values_) order_.push_back(k);
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key))
      throw UsageError(cat("unknown flag --", key));
    values_[key] = value;
  }

  void load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw UsageError(cat("cannot read config file '", path, "'"));
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw UsageError(cat("config '", path, "' line ", lineno,
                             ": expected key=value, got '", line, "'"));
      set(line.substr(0, eq), line.substr(eq + 1));
    }
  }

  const std::string& str(const std::string& key) const {
    return values_.at(key);
  }
  bool flag(const std::string& key) const { return values_.at(key) == "1"; }
  double num(const std::string& key) const {
    const std::string& s = values_.at(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError(cat("flag --", key, ": expected a number, got '", s, "'"));
    }
  }
  std::int64_t integer(const std::string& key) const {
    const double v = num(key);
    const std::int64_t i = static_cast<std::int64_t>(v);
    if (static_cast<double>(i) != v)
      throw UsageError(cat("flag --", key, ": expected an integer, got '",
                           values_.at(key), "'"));
    return i;
  }

  // Prints the fully resolved configuration, one line per flag.
  void print(const std::string& command) const {
    std::printf("config: command=%s", command.c_str());
    for (const auto& k : order_) std::printf(" %s=%s", k.c_str(), values_.at(k).c_str());
    std::printf("\n");
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

// Parses argv after the subcommand. Boolean flags take no argument and are
// stored as "1". `--config FILE` is applied in place, so flags given after
// it override the file while flags before it are overridden by it.
Flags parse_flags(int argc, char** argv, int start,
                  std::map<std::string, std::string> defaults,
                  const std::vector<std::string>& boolean = {}) {
  Flags flags(std::move(defaults));
  for (int i = start; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0)
      throw UsageError(cat("expected a --flag, got '", arg, "'"));
    arg = arg.substr(2);
    if (arg == "config") {
      if (i + 1 >= argc) throw UsageError("flag --config needs a file argument");
      flags.load_config(argv[++i]);
      continue;
    }
    bool is_bool = false;
    for (const auto& b : boolean) is_bool |= (b == arg);
    if (is_bool) {
      flags.set(arg, "1");
      continue;
    }
    if (i + 1 >= argc) throw UsageError(cat("flag --", arg, " needs an argument"));
    flags.set(arg, argv[++i]);
  }
  return flags;
}

OutputMode parse_mode(const std::string& s) {
  if (s == "mapping") return OutputMode::mapping;
  if (s == "irm") return OutputMode::irm;
  throw UsageError(cat("flag --target: expected mapping|irm, got '", s, "'"));
}

ArchSpec arch_or_usage(const std::string& name, OutputMode mode) {
  for (const auto& canon : canonical_arch_names())
    if (canon == name) return make_arch(name, mode);
  std::ostringstream names;
  for (const auto& canon : canonical_arch_names()) names << " " << canon;
  throw UsageError(cat("unknown architecture '", name, "'; canonical names:", names.str()));
}

// --- gen-data ----------------------------------------------------------------

int cmd_gen_data(int argc, char** argv) {
  Flags flags = parse_flags(argc, argv, 2,
                            {{"out", "corpus"},
                             {"seed", "7"},
                             {"train-count", "64"},
                             {"test-count", "16"},
                             {"dur-min", "2"},
                             {"dur-max", "4"},
                             {"snr-db", "0"},
                             {"noise-kind", "both"}});
  flags.print("gen-data");
  CorpusSpec spec;
  spec.seed = static_cast<std::uint64_t>(flags.integer("seed"));
  spec.train_count = flags.integer("train-count");
  spec.test_count = flags.integer("test-count");
  spec.dur_min = flags.num("dur-min");
  spec.dur_max = flags.num("dur-max");
  spec.snr_db = flags.num("snr-db");
  spec.noise_kind = flags.str("noise-kind");
  const fs::path dir = flags.str("out");
  generate_corpus(spec, dir);
  std::printf("wrote %lld train + %lld test utterances under %s\n",
              static_cast<long long>(spec.train_count),
              static_cast<long long>(spec.test_count), dir.string().c_str());
  return 0;
}

// --- train ---------------------------------------------------------------------

template <class T>
int run_train(const ArchSpec& spec, const std::vector<Utterance>& corpus,
              const TrainConfig& cfg, const std::string& log_path) {
  std::ofstream log(log_path);
  check(log.good(), cat("cannot write training log '", log_path, "'"));
  TrainState state = train<T>(spec, corpus, cfg, &log);
  std::printf("trained %lld epochs; best checkpoint: %s\n",
              static_cast<long long>(state.epoch),
              state.best_checkpoint_path.c_str());
  std::printf("final train loss %.6f\n", state.history.back().train_loss);
  return 0;
}

int cmd_train(int argc, char** argv) {
  Flags flags = parse_flags(argc, argv, 2,
                            {{"arch", ""},
                             {"corpus", "corpus"},
                             {"out", "model.ckpt"},
                             {"log", ""},
                             {"target", "mapping"},
                             {"epochs", "100"},
                             {"batch-size", "15"},
                             {"lr", "0"},
                             {"lr-decay", "0.99"},
                             {"val-fraction", "0.1"},
                             {"clip", "100"},
                             {"seed", "1"},
                             {"dtype", "double"}});
  flags.print("train");
  if (flags.str("arch").empty()) throw UsageError("flag --arch is required");
  const ArchSpec spec = arch_or_usage(flags.str("arch"), parse_mode(flags.str("target")));
  const std::vector<Utterance> corpus = load_corpus(flags.str("corpus"), "train");
  TrainConfig cfg;
  cfg.epochs = flags.integer("epochs");
  cfg.batch_size = flags.integer("batch-size");
  cfg.lr0 = flags.num("lr");  // 0 resolves to the per-arch paper default
  cfg.lr_decay = flags.num("lr-decay");
  cfg.val_fraction = flags.num("val-fraction");
  cfg.clip_threshold = flags.num("clip");
  cfg.seed = static_cast<std::uint64_t>(flags.integer("seed"));
  cfg.checkpoint_path = flags.str("out");
  const std::string log_path =
      flags.str("log").empty() ? flags.str("out") + ".csv" : flags.str("log");
  const std::string dtype = flags.str("dtype");
  if (dtype == "double") return run_train<double>(spec, corpus, cfg, log_path);
  if (dtype == "float") return run_train<float>(spec, corpus, cfg, log_path);
  throw UsageError(cat("flag --dtype: expected float|double, got '", dtype, "'"));
}

// --- enhance -------------------------------------------------------------------

// Loads a checkpoint and rebuilds the model it describes (always in double;
// checkpoints store doubles regardless of the training dtype).
struct LoadedModel {
  ArchSpec spec;
  ParameterStore<double> params;
  std::unique_ptr<UNet<double>> net;
};

LoadedModel load_model(const std::string& ckpt_path) {
  if (!fs::exists(ckpt_path))
    throw UsageError(cat("checkpoint '", ckpt_path, "' does not exist"));
  CheckpointData ck = read_checkpoint(ckpt_path);
  LoadedModel m;
  m.spec = parse_arch(ck.meta.arch_text);
  Rng rng(ck.meta.rng_seed);
  m.net = std::make_unique<UNet<double>>(m.spec, m.params, rng);
  restore_checkpoint(ck, m.params, m.net->buffers());
  return m;
}

int cmd_enhance(int argc, char** argv) {
  Flags flags = parse_flags(argc, argv, 2,
                            {{"ckpt", "model.ckpt"}, {"in", ""}, {"out", ""}});
  flags.print("enhance");
  if (flags.str("in").empty() || flags.str("out").empty())
    throw UsageError("flags --in and --out are required");
  LoadedModel m = load_model(flags.str("ckpt"));
  Waveform noisy = read_wav(flags.str("in"));
  if (noisy.sample_rate != kSampleRate) {
    noisy.samples = resample(noisy.samples, static_cast<int>(noisy.sample_rate),
                             static_cast<int>(kSampleRate));
    noisy.sample_rate = kSampleRate;
  }
  MelBank bank = make_mel_bank();
  Waveform enhanced = enhance_waveform(*m.net, bank, noisy);
  write_wav(flags.str("out"), enhanced);
  std::printf("enhanced %s -> %s (%lld samples at %lld Hz)\n",
              flags.str("in").c_str(), flags.str("out").c_str(),
              static_cast<long long>(enhanced.size()),
              static_cast<long long>(enhanced.sample_rate));
  return 0;
}

// --- evaluate ------------------------------------------------------------------

int cmd_evaluate(int argc, char** argv) {
  Flags flags = parse_flags(argc, argv, 2,
                            {{"ckpt", "model.ckpt"},
                             {"corpus", "corpus"},
                             {"out", "report.csv"},
                             {"passthrough", "0"}},
                            {"passthrough"});
  flags.print("evaluate");
  const bool passthrough = flags.flag("passthrough");
  std::optional<LoadedModel> model;
  if (!passthrough) model.emplace(load_model(flags.str("ckpt")));
  const std::vector<Utterance> test = load_corpus(flags.str("corpus"), "test");
  MelBank bank = make_mel_bank();
  std::vector<EvalRow> rows;
  for (const auto& u : test) {
    const Waveform estimate =
        passthrough ? u.mixture : enhance_waveform(*model->net, bank, u.mixture);
    BssResult b = bss_eval(estimate.samples, u.clean.samples, u.noise.samples);
    EvalRow row;
    row.id = u.id;
    row.noise_kind = noise_kind_name(u.noise_kind);
    row.snr_db = u.snr_db;
    row.sdr = b.sdr_db;
    row.sir = b.sir_db;
    row.sar = b.sar_db;
    row.stoi = stoi(u.clean, estimate).score;
    rows.push_back(row);
    std::printf("%s %s sdr %7.3f sir %7.3f sar %7.3f stoi %.4f\n", row.id.c_str(),
                row.noise_kind.c_str(), row.sdr, row.sir, row.sar, row.stoi);
  }
  write_eval_report(flags.str("out"), rows);
  const EvalRow mean = mean_row(rows);
  std::printf("mean sdr %7.3f sir %7.3f sar %7.3f stoi %.4f -> %s\n", mean.sdr,
              mean.sir, mean.sar, mean.stoi, flags.str("out").c_str());
  return 0;
}

// --- analyze -------------------------------------------------------------------

void print_arch_report(const std::string& name) {
  const ArchSpec spec = make_arch(name, OutputMode::mapping);
  const ArchReport report = analyze(spec);
  std::printf("%s\n", name.c_str());
  std::printf("  %-5s %-34s %5s %5s %6s %5s %10s\n", "block", "atoms", "in",
              "out", "scale", "skip", "params");
  for (std::size_t i = 0; i < report.blocks.size(); ++i) {
    const auto& row = report.blocks[i];
    std::printf("  %-5zu %-34s %5lld %5lld 1/%-4lld %5lld %10lld\n", i + 1,
                row.tokens.c_str(), static_cast<long long>(row.in_ch),
                static_cast<long long>(row.out_ch),
                static_cast<long long>(row.scale_out),
                static_cast<long long>(row.skip_from),
                static_cast<long long>(row.params));
  }
  std::printf("  head: %lld params (1x1 conv)\n",
              static_cast<long long>(report.head_params));
  std::printf("  trainable parameters: %lld\n",
              static_cast<long long>(report.total_params));
  std::printf("  receptive field (time, freq): (%s, %s)\n",
              axis_field_str(report.rf.time).c_str(),
              axis_field_str(report.rf.freq).c_str());
}

int cmd_analyze(int argc, char** argv) {
  Flags flags = parse_flags(argc, argv, 2, {{"arch", ""}, {"all", "0"}}, {"all"});
  flags.print("analyze");
  if (flags.flag("all")) {
    for (const auto& name : canonical_arch_names()) print_arch_report(name);
    return 0;
  }
  if (flags.str("arch").empty())
    throw UsageError("flag --arch NAME or --all is required");
  arch_or_usage(flags.str("arch"), OutputMode::mapping);  // validates the name
  print_arch_report(flags.str("arch"));
  return 0;
}

int usage(std::FILE* out) {
  std::fprintf(out,
               "usage: rcunet <command> [--flags]\n"
               "\n"
               "commands:\n"
               "  gen-data  --out DIR --seed S --train-count N --test-count M\n"
               "            --dur-min S --dur-max S --snr-db DB --noise-kind babble|factory|both\n"
               "  train     --arch NAME --corpus DIR --out CKPT --target mapping|irm\n"
               "            --epochs N --batch-size N --lr LR --lr-decay D\n"
               "            --val-fraction F --clip T --seed S --dtype float|double --log CSV\n"
               "  enhance   --ckpt CKPT --in WAV --out WAV\n"
               "  evaluate  --ckpt CKPT --corpus DIR --out CSV [--passthrough]\n"
               "  analyze   --arch NAME | --all\n"
               "\n"
               "Any command also accepts --config FILE with key=value lines, applied\n"
               "in place (later flags override the file).\n");
  return out == stdout ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage(stderr);
  const std::string cmd = argv[1];
  try {
    if (cmd == "gen-data") return cmd_gen_data(argc, argv);
    if (cmd == "train") return cmd_train(argc, argv);
    if (cmd == "enhance") return cmd_enhance(argc, argv);
    if (cmd == "evaluate") return cmd_evaluate(argc, argv);
    if (cmd == "analyze") return cmd_analyze(argc, argv);
    if (cmd == "help" || cmd == "--help" || cmd == "-h") return usage(stdout);
    std::fprintf(stderr, "unknown command '%s'\n", cmd.c_str());
    return usage(stderr);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
