#include "refl/random.hpp"

#include "refl/errors.hpp"

namespace refl {

std::size_t sample_index(std::span<const Rat> weights, BitSource& bits) {
  Rat total(0);
  for (const Rat& w : weights) {
    if (w < 0) throw Error("negative sampling weight");
    total += w;
  }
  if (total == 0) throw Error("sampling from all-zero weights");

  // Refine a uniform u in [0, 1) one bit at a time until its enclosing
  // interval lies inside a single CDF segment.
  Rat lo(0);
  Rat width(1);
  for (;;) {
    Rat acc(0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      Rat next = acc + weights[i] / total;
      if (lo >= acc && lo + width <= next) return i;
      acc = next;
    }
    width /= 2;
    if (bits.next_bit()) lo += width;
  }
}

bool sample_bernoulli(const Rat& p, BitSource& bits) {
  if (p < 0 || p > 1) throw Error("bernoulli probability out of range");
  Rat lo(0);
  Rat width(1);
  for (;;) {
    if (lo + width <= p) return true;
    if (lo >= p) return false;
    width /= 2;
    if (bits.next_bit()) lo += width;
  }
}

}  // namespace refl
