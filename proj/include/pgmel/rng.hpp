#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace pgmel {

/// Deterministic PRNG (xoshiro256**) with explicit, serializable state.
/// std::mt19937 plus the standard distributions are implementation-defined
/// across toolchains; reproducible training and checkpoint resume need draws
/// that depend only on the stored state, so all distributions are hand-rolled.
class Rng {
 public:
  using State = std::array<uint64_t, 4>;

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  /// Derives an independent stream, e.g. one per training phase.
  Rng stream(uint64_t tag) const {
    return Rng(splitmix64_once(state_[0] ^ (tag * 0x9e3779b97f4a7c15ULL)));
  }

  uint64_t next_u64() {
    uint64_t result = rotl(state_[1] * 5, 7) * 9;
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased uniform integer in [0, bound).
  uint64_t uniform_int(uint64_t bound) {
    uint64_t threshold = (-bound) % bound;
    uint64_t x;
    do {
      x = next_u64();
    } while (x < threshold);
    return x % bound;
  }

  /// Standard normal via Box-Muller (cosine branch only, no cached spare,
  /// so the state alone determines the next draw).
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Index draw from a probability vector (entries nonnegative, sum ~ 1).
  template <class Probs>
  int categorical(const Probs& probs) {
    double u = uniform();
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
      acc += probs[i];
      last = i;
      if (u < acc) return i;
    }
    return last;  // guards rounding shortfall in the cumulative sum
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    return splitmix64_once(x);
  }

  static uint64_t splitmix64_once(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  State state_{};
};

}  // namespace pgmel
