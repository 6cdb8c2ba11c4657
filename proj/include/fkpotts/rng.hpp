#pragma once

#include <cstdint>

namespace fkp {

// splitmix64 finaliser.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t key, std::uint64_t v) { return mix64(key ^ mix64(v)); }

// Counter-based stream: every draw is a pure function of (key, index), so results do
// not depend on evaluation order or thread schedule.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  // Derived stream, e.g. rng.sub(replica).sub(sweep).sub(phase).
  CounterRng sub(std::uint64_t tag) const { return CounterRng(combine(key_, tag)); }

  std::uint64_t bits(std::uint64_t index) const { return combine(key_ ^ 0x5851f42d4c957f2dULL, index); }

  // Uniform on [0, 1) with 53 bits.
  double uniform(std::uint64_t index) const {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by Lemire's multiply-shift; the bias is below 2^-40
  // for the ranges used here.
  std::uint64_t below(std::uint64_t index, std::uint64_t n) const {
    const unsigned __int128 m = static_cast<unsigned __int128>(bits(index)) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
};

// Sequential adaptor over a CounterRng for code that consumes draws one at a time.
class SeqRng {
 public:
  explicit SeqRng(CounterRng base) : base_(base) {}
  double uniform() { return base_.uniform(counter_++); }
  std::uint64_t below(std::uint64_t n) { return base_.below(counter_++, n); }

 private:
  CounterRng base_;
  std::uint64_t counter_ = 0;
};

}  // namespace fkp
