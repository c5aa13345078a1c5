#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pgt {

// Deterministic RNG used everywhere in the pipeline. The engine is
// std::mt19937_64 (fully specified by the standard); all distributions are
// implemented here so that streams are reproducible independent of the
// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  uint64_t below(uint64_t n);

  // Standard normal via Box-Muller with a cached spare.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Sample k distinct indices from [0, n) without replacement.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  // Stable named sub-seed derivation so every phase/sample gets an
  // independent, reproducible stream from one master seed.
  static uint64_t derive(uint64_t master, std::string_view label);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pgt
