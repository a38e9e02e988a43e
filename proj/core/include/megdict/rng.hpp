#pragma once

#include <cstdint>
#include <random>

namespace megdict {

// splitmix64 finalizer; used to derive well-separated child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic per-trial stream: any (region, trial, attempt) cell can be
// re-run in isolation and is independent of worker scheduling.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t region,
                                std::uint64_t trial, std::uint64_t attempt) {
  std::uint64_t h = mix64(master ^ 0x747269616c736dULL);  // "trialsm"
  h = mix64(h ^ region);
  h = mix64(h ^ trial);
  h = mix64(h ^ attempt);
  return h;
}

inline std::uint64_t head_seed(std::uint64_t master) {
  return mix64(master ^ 0x686561646d646cULL);  // "headmdl"
}

// mt19937_64 with explicit uniform/normal kernels. std::*_distribution is
// implementation-defined, so we hand-roll the mappings to keep streams
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller (pairs cached).
  double normal();

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace megdict
