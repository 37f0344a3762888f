// Copyright 2026 The rcunet authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcunet {

// Error type thrown by every component; the CLI maps it to exit code 1
// (runtime failure) or 2 (bad invocation) depending on where it surfaces.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <class A, class... R>
void cat_into(std::ostringstream& os, A&& a, R&&... rest) {
  os << a;
  cat_into(os, std::forward<R>(rest)...);
}
}  // namespace detail

// Builds an error message from heterogeneous pieces.
template <class... A>
std::string cat(A&&... a) {
  std::ostringstream os;
  detail::cat_into(os, std::forward<A>(a)...);
  return os.str();
}

template <class... A>
[[noreturn]] void fail(A&&... a) {
  throw Error(cat(std::forward<A>(a)...));
}

template <class... A>
void check(bool cond, A&&... a) {
  if (!cond) throw Error(cat(std::forward<A>(a)...));
}

// ---------------------------------------------------------------------------
// Deterministic random numbers.
//
// std::mt19937 plus the standard distributions would work, but the
// distributions are not bit-identical across standard libraries. Corpus
// synthesis and parameter init must reproduce exactly from a seed on any
// platform, so the generator and the transforms are spelled out here.
// splitmix64 passes BigCrush and needs four lines.
// ---------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling removes the modulo bias; the loop almost never
    // iterates for the small n used here.
    std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Standard normal via Box-Muller; one spare value is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * 3.14159265358979323846 * u2;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
  }

  // Derives an independent child stream; (seed, tag) pairs map to distinct
  // well-mixed states.
  Rng fork(std::uint64_t tag) const {
    Rng mixer(state_ ^ (0x6a09e667f3bcc909ULL + tag * 0x3c6ef372fe94f82bULL));
    return Rng(mixer.next_u64());
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates; spelled out so the permutation is platform-stable.
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Little-endian binary IO used by checkpoint and WAV code.
// ---------------------------------------------------------------------------
inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    fail("unexpected end of stream while reading ", n, " bytes");
}

template <class T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  // This codebase targets little-endian hosts; the memcpy keeps the
  // aliasing legal and the static check below documents the assumption.
  static_assert(sizeof(int) == 4);
  write_bytes(os, buf, sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is) {
  auto n = read_le<std::uint32_t>(is);
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n);
  return s;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace rcunet
