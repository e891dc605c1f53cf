#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "refl/rational.hpp"

namespace refl {

// Deterministic stream of fair bits from a seeded PRNG. All sampling in the
// library draws through a BitSource so that runs are reproducible bit for
// bit from the seed alone.
class BitSource {
 public:
  explicit BitSource(std::uint64_t seed) : gen_(seed) {}

  int next_bit() {
    if (left_ == 0) {
      buffer_ = gen_();
      left_ = 64;
    }
    int bit = static_cast<int>(buffer_ & 1);
    buffer_ >>= 1;
    --left_;
    return bit;
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t buffer_ = 0;
  int left_ = 0;
};

// Draws an index with probability weights[i] / sum(weights), consuming only
// as many bits as needed to decide exactly. Weights must be nonnegative with
// a positive sum.
std::size_t sample_index(std::span<const Rat> weights, BitSource& bits);

// Bernoulli draw with exact success probability p in [0, 1].
bool sample_bernoulli(const Rat& p, BitSource& bits);

}  // namespace refl
