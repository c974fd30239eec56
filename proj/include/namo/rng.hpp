#pragma once

#include <cmath>
#include <cstdint>

#include "namo/common.hpp"

namespace namo {

// Seed namespaces. Training and evaluation derive per-episode seeds from
// disjoint namespaces so their scene streams can never collide.
inline constexpr uint64_t kSeedSpaceTrain = 0x745261696eull;
inline constexpr uint64_t kSeedSpaceEval = 0x4576616c00ull;
static_assert(kSeedSpaceTrain != kSeedSpaceEval);

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t space, uint64_t index) {
  return splitmix64(splitmix64(base ^ space) + index);
}

// PCG32. Hand-rolled so streams are reproducible bit-for-bit across
// platforms and toolchains; std::normal_distribution and friends are
// implementation-defined.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bull) {}
  explicit Rng(uint64_t seed, uint64_t stream = 0) { reseed(seed, stream); }

  void reseed(uint64_t seed, uint64_t stream = 0) {
    inc_ = (stream << 1u) | 1u;
    state_ = 0u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
  }

  // [0, 1)
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return n <= 1 ? 0 : static_cast<int>(uniform() * n);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one draw per call keeps the state trivially serializable.
  double normal() {
    double u = (next_u32() + 1.0) * (1.0 / 4294967296.0);  // (0, 1]
    double v = next_u32() * (1.0 / 4294967296.0);
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * kPi * v);
  }

  uint64_t state() const { return state_; }
  uint64_t inc() const { return inc_; }
  void restore(uint64_t state, uint64_t inc) { state_ = state; inc_ = inc; }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 0;
};

}  // namespace namo
