// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rcunet/common.hpp"
#include "rcunet/synth.hpp"
#include "rcunet/wav.hpp"

namespace rcunet {

// Deterministic corpus of (clean, noise, mixture) triples. Every utterance is
// a pure function of (seed, split, index), so corpora regenerate bit-
// identically from the manifest alone.

struct CorpusSpec {
  std::uint64_t seed = 7;
  std::int64_t train_count = 64;
  std::int64_t test_count = 16;
  double dur_min = 2.0;  // seconds
  double dur_max = 4.0;
  double snr_db = 0.0;
  std::string noise_kind = "both";  // babble | factory | both (alternating)
};

struct Utterance {
  std::string id;
  Waveform clean;
  Waveform noise;    // scaled noise actually present in the mixture
  Waveform mixture;  // clean + noise exactly
  double snr_db = 0.0;
  NoiseKind noise_kind = NoiseKind::babble;
};

namespace detail {

inline std::string utt_id(const std::string& split, std::int64_t index) {
  std::ostringstream s;
  s << split << std::setw(3) << std::setfill('0') << index;
  return s.str();
}

inline NoiseKind kind_for(const CorpusSpec& spec, std::int64_t index) {
  if (spec.noise_kind == "both")
    return index % 2 == 0 ? NoiseKind::babble : NoiseKind::factory;
  return noise_kind_from_name(spec.noise_kind);
}

}  // namespace detail

inline void validate(const CorpusSpec& spec) {
  check(spec.train_count >= 0 && spec.test_count >= 0,
        "corpus: counts must be non-negative");
  check(spec.dur_min > 0.0 && spec.dur_max >= spec.dur_min,
        "corpus: need 0 < dur_min <= dur_max");
  check(spec.noise_kind == "both" || spec.noise_kind == "babble" ||
            spec.noise_kind == "factory",
        cat("corpus: unknown noise kind '", spec.noise_kind,
            "' (expected babble, factory, or both)"));
}

// Builds one utterance in memory. The per-utterance stream is forked from
// (seed, split, index) so utterances are independent and order-free.
inline Utterance make_utterance(const CorpusSpec& spec,
                                const std::string& split, std::int64_t index) {
  validate(spec);
  check(split == "train" || split == "test",
        cat("corpus: unknown split '", split, "'"));
  const std::uint64_t split_tag = split == "train" ? 0 : 1;
  Rng rng = Rng(spec.seed).fork((split_tag << 32) |
                                static_cast<std::uint64_t>(index));

  Utterance u;
  u.id = detail::utt_id(split, index);
  u.snr_db = spec.snr_db;
  u.noise_kind = detail::kind_for(spec, index);
  const double duration = rng.uniform(spec.dur_min, spec.dur_max);
  Waveform clean = synth_speech(rng.next_u64(), duration);
  // Synthesize extra noise so the crop offset has a whole second of slack.
  Waveform noise = synth_noise(rng.next_u64(), duration + 1.0, u.noise_kind);
  MixResult mix = mix_at_snr(clean, noise, spec.snr_db, rng);
  u.clean = std::move(mix.clean);
  u.noise = std::move(mix.noise);
  u.mixture = std::move(mix.mixture);
  return u;
}

inline std::string manifest_text(const CorpusSpec& spec) {
  std::ostringstream s;
  s << "seed=" << spec.seed << "\n"
    << "train_count=" << spec.train_count << "\n"
    << "test_count=" << spec.test_count << "\n"
    << "dur_min=" << spec.dur_min << "\n"
    << "dur_max=" << spec.dur_max << "\n"
    << "snr_db=" << spec.snr_db << "\n"
    << "noise_kind=" << spec.noise_kind << "\n"
    << "sample_rate=8000\n";
  return s.str();
}

inline CorpusSpec parse_manifest(const std::string& text) {
  CorpusSpec spec;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    check(eq != std::string::npos, cat("manifest: malformed line '", line, "'"));
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "seed") spec.seed = std::stoull(val);
      else if (key == "train_count") spec.train_count = std::stoll(val);
      else if (key == "test_count") spec.test_count = std::stoll(val);
      else if (key == "dur_min") spec.dur_min = std::stod(val);
      else if (key == "dur_max") spec.dur_max = std::stod(val);
      else if (key == "snr_db") spec.snr_db = std::stod(val);
      else if (key == "noise_kind") spec.noise_kind = val;
      else if (key == "sample_rate")
        check(val == "8000", "manifest: only 8000 Hz corpora are supported");
      else fail("manifest: unknown key '", key, "'");
    } catch (const std::invalid_argument&) {
      fail("manifest: bad value '", val, "' for key '", key, "'");
    }
  }
  validate(spec);
  return spec;
}

inline CorpusSpec load_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest";
  std::ifstream f(path);
  check(f.good(), cat("cannot open manifest '", path.string(), "'"));
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_manifest(buf.str());
}

// Writes corpus/{train,test}/{id}_{clean,noise,mix}.wav plus the manifest.
inline void generate_corpus(const CorpusSpec& spec,
                            const std::filesystem::path& dir) {
  validate(spec);
  for (const std::string split : {"train", "test"}) {
    const auto sub = dir / split;
    std::filesystem::create_directories(sub);
    const std::int64_t count =
        split == "train" ? spec.train_count : spec.test_count;
    for (std::int64_t i = 0; i < count; ++i) {
      Utterance u = make_utterance(spec, split, i);
      write_wav((sub / (u.id + "_clean.wav")).string(), u.clean);
      write_wav((sub / (u.id + "_noise.wav")).string(), u.noise);
      write_wav((sub / (u.id + "_mix.wav")).string(), u.mixture);
    }
  }
  std::ofstream mf(dir / "manifest");
  check(mf.good(), cat("cannot write manifest under '", dir.string(), "'"));
  mf << manifest_text(spec);
}

// Reads one split back from disk. The waveforms are the 16-bit quantized
// files; kind and SNR metadata are recomputed from the manifest rule.
inline std::vector<Utterance> load_corpus(const std::filesystem::path& dir,
                                          const std::string& split) {
  const CorpusSpec spec = load_manifest(dir);
  const std::int64_t count =
      split == "train" ? spec.train_count : spec.test_count;
  check(split == "train" || split == "test",
        cat("corpus: unknown split '", split, "'"));
  std::vector<Utterance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    Utterance u;
    u.id = detail::utt_id(split, i);
    u.snr_db = spec.snr_db;
    u.noise_kind = detail::kind_for(spec, i);
    const auto base = dir / split / u.id;
    u.clean = read_wav(base.string() + "_clean.wav");
    u.noise = read_wav(base.string() + "_noise.wav");
    u.mixture = read_wav(base.string() + "_mix.wav");
    check(u.clean.size() == u.mixture.size() &&
              u.noise.size() == u.mixture.size(),
          cat("corpus: length mismatch in utterance ", u.id));
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace rcunet
