// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "rcunet/common.hpp"

namespace rcunet {

// Mono audio in [-1, 1) held as doubles.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
};

// Reads a mono 16-bit PCM WAV file.
inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), cat("cannot open wav file '", path, "'"));
  char tag[4];
  read_bytes(f, tag, 4);
  check(std::string(tag, 4) == "RIFF", cat(path, ": not a RIFF file"));
  read_le<std::uint32_t>(f);  // riff size
  read_bytes(f, tag, 4);
  check(std::string(tag, 4) == "WAVE", cat(path, ": not a WAVE file"));

  Waveform w;
  bool have_fmt = false;
  while (f.peek() != EOF) {
    read_bytes(f, tag, 4);
    auto size = read_le<std::uint32_t>(f);
    std::string id(tag, 4);
    if (id == "fmt ") {
      auto fmt = read_le<std::uint16_t>(f);
      auto channels = read_le<std::uint16_t>(f);
      auto rate = read_le<std::uint32_t>(f);
      read_le<std::uint32_t>(f);  // byte rate
      read_le<std::uint16_t>(f);  // block align
      auto bits = read_le<std::uint16_t>(f);
      check(fmt == 1, cat(path, ": only PCM wav supported"));
      check(channels == 1, cat(path, ": only mono wav supported"));
      check(bits == 16, cat(path, ": only 16-bit wav supported"));
      w.sample_rate = static_cast<int>(rate);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (id == "data") {
      check(have_fmt, cat(path, ": data chunk before fmt"));
      const std::size_t count = size / 2;
      w.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i)
        w.samples[i] = static_cast<double>(read_le<std::int16_t>(f)) / 32768.0;
      if (size % 2) f.seekg(1, std::ios::cur);  // chunk padding
    } else {
      f.seekg(size + (size % 2), std::ios::cur);
    }
  }
  check(have_fmt && !w.samples.empty(), cat(path, ": missing fmt or data"));
  return w;
}

// Writes a mono 16-bit PCM WAV file; samples are clamped to the int16 range.
inline void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), cat("cannot create wav file '", path, "'"));
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(w.samples.size() * 2);
  write_bytes(f, "RIFF", 4);
  write_le<std::uint32_t>(f, 36 + data_size);
  write_bytes(f, "WAVE", 4);
  write_bytes(f, "fmt ", 4);
  write_le<std::uint32_t>(f, 16);
  write_le<std::uint16_t>(f, 1);  // PCM
  write_le<std::uint16_t>(f, 1);  // mono
  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(f, static_cast<std::uint32_t>(w.sample_rate * 2));
  write_le<std::uint16_t>(f, 2);
  write_le<std::uint16_t>(f, 16);
  write_bytes(f, "data", 4);
  write_le<std::uint32_t>(f, data_size);
  for (double s : w.samples) {
    double v = s * 32768.0;
    v = std::max(-32768.0, std::min(32767.0, std::round(v)));
    write_le<std::int16_t>(f, static_cast<std::int16_t>(v));
  }
  check(f.good(), cat("failed writing wav file '", path, "'"));
}

}  // namespace rcunet
