#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace rasa {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive keys from seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives the key of path `path` under `master_seed`:
///   splitmix64(splitmix64(master_seed) + path).
/// Every path stream is a pure function of this pair, so Monte Carlo output
/// does not depend on which thread ran which path.
std::uint64_t path_key(std::uint64_t master_seed, std::uint64_t path);

/// Noise/graph channels addressed by the counter layout.
enum class Channel : std::uint32_t {
  Graph = 1,
  GradientNoise = 2,
  ResourceNoise = 3,
  LambdaChannel = 4,
  ZChannel = 5,
  Generic = 15,
};

/// Sequential counter-based generator. The 128-bit counter is
/// (block, step_lo, step_hi | channel << 16, i << 16 | j); only `block`
/// advances as values are drawn, so draws for distinct (step, channel, i, j)
/// addresses never overlap.
///
/// Satisfies UniformRandomBitGenerator, but uniform()/normal() should be
/// preferred over <random> distributions, whose output is not portable.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : CounterRng(key, 0, Channel::Generic, 0, 0) {}
  CounterRng(std::uint64_t key, std::uint64_t step, Channel channel, std::uint32_t i,
             std::uint32_t j);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  /// Standard normal via Box-Muller; draws come in cached pairs.
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// The random-stream handle of one sample path: addresses a CounterRng per
/// (step, channel, i, j).
class PathStream {
 public:
  explicit PathStream(std::uint64_t key) : key_(key) {}
  static PathStream for_path(std::uint64_t master_seed, std::uint64_t path) {
    return PathStream(path_key(master_seed, path));
  }
  CounterRng at(std::uint64_t step, Channel channel, std::uint32_t i = 0,
                std::uint32_t j = 0) const {
    return CounterRng(key_, step, channel, i, j);
  }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace rasa
