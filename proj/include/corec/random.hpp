#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace corec {

/// Deterministic PRNG (xoshiro256**), self-contained so that seeded runs are
/// reproducible bit-for-bit across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Unbiased draw from {0, ..., n-1} by rejection sampling. n > 0.
  std::uint64_t below(std::uint64_t n);

  /// 53-bit uniform in [0, 1).
  double uniform01();

  bool bernoulli(double p) { return uniform01() < p; }

  /// Fisher-Yates with draws from this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

/// Named sub-streams of the top-level seed. Every component that consumes
/// randomness derives its own seed as derive_seed(master, {stream, ids...}),
/// so adding parallelism or reordering work never perturbs other streams.
enum class Stream : std::uint64_t {
  split_mask = 1,
  flip_noise = 2,
  preference_blocks = 3,
  rating_channel = 4,
  erasure = 5,
  sweep_trial = 6,
  protocol = 7,
};

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path);

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream) {
  return derive_seed(master, {static_cast<std::uint64_t>(stream)});
}

}  // namespace corec
