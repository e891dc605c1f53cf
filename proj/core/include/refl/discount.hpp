#pragma once

#include <functional>
#include <memory>

#include "refl/rational.hpp"

namespace refl {

// Summable discount function gamma_t with exact tail sums
// Gamma_t = sum_{k>=t} gamma_k. Time steps start at t = 1.
class Discount {
 public:
  virtual ~Discount() = default;
  virtual Rat gamma(int t) const = 0;
  virtual Rat normalizer(int t) const = 0;  // Gamma_t
  // Geometric discounts make normalized values time-invariant, which lets
  // value memoization drop the absolute time step from its keys.
  virtual bool geometric() const { return false; }
};

// gamma_t = ratio^t, Gamma_t = ratio^t / (1 - ratio), 0 < ratio < 1.
class GeometricDiscount final : public Discount {
 public:
  explicit GeometricDiscount(Rat ratio);
  Rat gamma(int t) const override;
  Rat normalizer(int t) const override;
  bool geometric() const override { return true; }
  const Rat& ratio() const { return ratio_; }

 private:
  Rat ratio_;
};

// User-supplied discount; requires a closed-form tail function.
class CustomDiscount final : public Discount {
 public:
  CustomDiscount(std::function<Rat(int)> gamma, std::function<Rat(int)> tail)
      : gamma_(std::move(gamma)), tail_(std::move(tail)) {}
  Rat gamma(int t) const override { return gamma_(t); }
  Rat normalizer(int t) const override { return tail_(t); }

 private:
  std::function<Rat(int)> gamma_;
  std::function<Rat(int)> tail_;
};

// Effective horizon H_t(eps) = min{ k : Gamma_{t+k} / Gamma_t <= eps }.
// Throws when Gamma_t = 0 (the horizon is undefined there).
int effective_horizon(const Discount& discount, int t, const Rat& eps);

}  // namespace refl
