#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hida {

// SplitMix64 step; used to turn (seed, tag...) tuples into well-mixed
// stream seeds so that every task owns an independent generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives a child seed from a master seed and up to a handful of tags
// (sampler id, iteration, slot, retry, ...). Deterministic and
// independent of how work is split across workers.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t t : tags) {
    // Chain through the full finalizer per tag; weaker xor-shift folds
    // collide at ~10^-2 rates on small consecutive tag grids.
    s = out ^ (t + 0x9e3779b97f4a7c15ULL);
    out = splitmix64(s);
  }
  return out;
}

// A self-contained random stream. Each parallel task constructs its own
// stream from a derived seed, so draw sequences never depend on worker
// count or interleaving.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1).
  double uniform01() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  double normal() { return normal_(gen_); }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hida
