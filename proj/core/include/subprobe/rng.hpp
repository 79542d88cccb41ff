#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace subprobe::rng {

// splitmix64 finalizer. Used both for sub-seed derivation and for hashing.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named randomness streams. Every piece of randomness in the pipeline draws
// from a Prng seeded by derive_seed(master, stream, index), so a single
// command-level seed reproduces each subject / channel / event independently.
enum class Stream : std::uint64_t {
  Schedule = 1,
  Noise = 2,
  Jitter = 3,
  Blank = 4,
  Subject = 5,
  Profile = 6,
  Recording = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index = 0) {
  return mix64(master ^ mix64(static_cast<std::uint64_t>(stream) ^ mix64(index)));
}

// mt19937_64 with hand-rolled draw functions. The standard distribution
// objects are implementation-defined, so schedules and recordings generated
// here would differ across standard libraries; these draws are pinned.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform on [0, n), unbiased via rejection of the top remainder.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform integer on [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(uniform_below(span));
  }

  // Box-Muller with cached spare.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return mean + stddev * radius * std::cos(angle);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace subprobe::rng
