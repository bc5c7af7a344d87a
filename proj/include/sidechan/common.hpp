#pragma once

// Shared error types, deterministic randomness, and small numeric helpers
// used across the library. All randomness flows through Rng so that results
// are reproducible bit-for-bit across runs and platforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sidechan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or an unsatisfiable request (bad profile, empty
// candidate set, calibration that cannot reach its target, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input text (perf output, /proc/stat traces, CSV, config files).
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid input that cannot be used: missing counter events,
// non-monotone jiffy counters, label/feature mismatches.
struct DataError : Error {
  using Error::Error;
};

// Deterministic random source. mt19937_64's output sequence is pinned by the
// standard; the helpers below avoid std::normal_distribution, std::shuffle
// and std::uniform_int_distribution, whose draws are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform in (0,1]; safe as a log() argument.
  double uniform_open01() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (no state caching, fixed draw order).
  double normal() {
    const double u1 = uniform_open01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform index in [0, n). Modulo bias is negligible for our n and keeps
  // the draw sequence platform-independent.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(gen_() % n);
  }

 private:
  std::mt19937_64 gen_;
};

// Fisher-Yates with an explicit RNG so shuffles replay identically.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.below(i)]);
  }
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double stddev_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double min_of(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("min of empty sample");
  return *std::min_element(xs.begin(), xs.end());
}

inline double max_of(const std::vector<double>& xs) {
  if (xs.empty()) throw Error("max of empty sample");
  return *std::max_element(xs.begin(), xs.end());
}

// Shortest text form that parses back to the same double ("%.17g" is exact
// for IEEE doubles); used wherever bundles must be byte-stable.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace sidechan
