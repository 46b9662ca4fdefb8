#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dsbm {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3", SC'11).  Distinct (seed, stream) pairs give
// statistically independent streams, so label trajectories, per-snapshot edge
// draws and sweep replicates can each own a stream no matter how work is
// scheduled across threads.
class Philox {
public:
  using result_type = std::uint64_t;

  Philox() : Philox(0, 0) {}
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t mixed = splitmix64(seed ^ splitmix64(stream + 0x1d8e4e27c47d124fULL));
    key_ = {static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32)};
    counter_ = {0, 0, 0, 0};
    pos_ = 4;
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = bijection(counter_, key_);
      advance_counter();
      pos_ = 0;
    }
    return block_[pos_++];
  }

  result_type operator()() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  // uniform on [0,1) with 53-bit resolution
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  // uniform on (0,1], safe as a log() argument
  double uniform01_open() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  // unbiased integer in [0, bound); bound == 0 or 1 returns 0
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound < 2) return 0;
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t x = (*this)();
      if (x >= threshold) return x % bound;
    }
  }

  // raw 10-round bijection, exposed for the known-answer tests
  static std::array<std::uint32_t, 4> bijection(std::array<std::uint32_t, 4> ctr,
                                                std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u, kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u, kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

private:
  void advance_counter() {
    for (int i = 0; i < 4; ++i) {
      if (++counter_[i] != 0) break;
    }
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

}  // namespace dsbm
