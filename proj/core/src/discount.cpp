#include "refl/discount.hpp"

#include "refl/errors.hpp"

namespace refl {

GeometricDiscount::GeometricDiscount(Rat ratio) : ratio_(std::move(ratio)) {
  if (ratio_ <= 0 || ratio_ >= 1)
    throw Error("geometric discount ratio must lie in (0, 1), got " +
                rat_str(ratio_));
}

Rat GeometricDiscount::gamma(int t) const {
  if (t < 1) throw Error("time steps start at 1");
  Rat g(1);
  for (int i = 0; i < t; ++i) g *= ratio_;
  return g;
}

Rat GeometricDiscount::normalizer(int t) const {
  return gamma(t) / (Rat(1) - ratio_);
}

int effective_horizon(const Discount& discount, int t, const Rat& eps) {
  if (eps <= 0) throw Error("effective horizon needs eps > 0");
  Rat base = discount.normalizer(t);
  if (base == 0)
    throw Error("Gamma_" + std::to_string(t) + " is zero; horizon undefined");
  for (int k = 0;; ++k) {
    if (discount.normalizer(t + k) <= eps * base) return k;
    if (k > 100000) throw Error("effective horizon exceeds 100000 steps");
  }
}

}  // namespace refl
