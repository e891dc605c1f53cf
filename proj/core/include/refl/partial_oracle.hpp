#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "refl/machine.hpp"
#include "refl/random.hpp"
#include "refl/rational.hpp"

namespace refl {

// Closed interval [lo, hi] within [0, 1]. Machine-backed probabilities are
// carried as intervals whose width is exactly the truncated (non-halting)
// mass still unassigned at the oracle's level.
struct ProbabilityInterval {
  Rat lo;
  Rat hi;

  ProbabilityInterval() : lo(0), hi(1) {}
  ProbabilityInterval(Rat lo_, Rat hi_);

  Rat width() const { return hi - lo; }
  Rat midpoint() const { return (lo + hi) / 2; }
  bool contains(const Rat& p) const { return lo <= p && p <= hi; }
  bool contains(const ProbabilityInterval& inner) const {
    return lo <= inner.lo && inner.hi <= hi;
  }
};

ProbabilityInterval operator*(const ProbabilityInterval& a,
                              const ProbabilityInterval& b);
ProbabilityInterval operator+(const ProbabilityInterval& a,
                              const ProbabilityInterval& b);
ProbabilityInterval operator*(const Rat& s, const ProbabilityInterval& a);

// A level-k partial oracle: grid answers n_i * 2^-k for the first k queries
// of the registry's enumeration. Immutable; bound to the registry it was
// built against through a fingerprint. Numerators are big integers: deep
// levels (fine threshold grids sit far out in the query enumeration) need
// grids beyond 2^63.
class PartialOracle final : public OracleValuation {
 public:
  PartialOracle(int level, const std::vector<std::int64_t>& numerators,
                std::uint64_t registry_fingerprint);
  static PartialOracle from_big_numerators(int level,
                                           std::vector<mpz_class> numerators,
                                           std::uint64_t registry_fingerprint);

  int level() const override { return level_; }
  Rat value(std::uint64_t query_index) const override;
  const mpz_class& numerator(std::uint64_t query_index) const;
  const std::vector<mpz_class>& numerators() const { return numerators_; }
  std::uint64_t registry_fingerprint() const { return fingerprint_; }
  mpz_class grid_size() const;

  void check_registry(const MachineRegistry& reg) const;

 private:
  PartialOracle(int level, std::vector<mpz_class> numerators,
                std::uint64_t registry_fingerprint, int tag);

  int level_;
  std::vector<mpz_class> numerators_;
  std::uint64_t fingerprint_;
};

enum class OracleAnswer { kOne, kZero, kHalt };

// Samples the truncated oracle's reply for query q_i: 1 with probability
// max(0, v_i - 2^-(k+1)), 0 with max(0, 1 - v_i - 2^-(k+1)), halt with the
// remainder; deterministically halt for i > k.
OracleAnswer answer(const PartialOracle& po, std::uint64_t query_index,
                    BitSource& bits);

// True iff |child(q_i) - parent(q_i)| <= 2^-(k+1) for every i <= k, where
// parent has level k and child level k+1.
bool extends(const PartialOracle& child, const PartialOracle& parent);

struct ReflectivityResult {
  bool reflective = true;
  // Set when reflective is false: the first query whose implication fails.
  std::uint64_t violated_index = 0;
  std::optional<Query> violated_query;
  // The grid value the implication would force there.
  Rat required_value;

  explicit operator bool() const { return reflective; }
};

// Finite-time check of partial reflectivity: for each of q_1..q_k = (T,x,p),
// runs T truncated and verifies that lambda(1|x) > p forces value 1 and
// lambda(0|x) > 1-p forces value 0.
ReflectivityResult is_partially_reflective(const PartialOracle& po,
                                           const MachineRegistry& reg);

// Interval bracketing the completed measure's probability of output 1:
// [lambda(1|x), 1 - lambda(0|x)]. Width equals the truncated mass.
ProbabilityInterval completed_bounds(const PartialOracle& po,
                                     const MachineRegistry& reg, int index,
                                     const BitString& input);

// Serialization: one line "k" followed by k lines "i n_i". Lines starting
// with '#' are ignored on input; the writer appends one with the registry
// fingerprint. Reading binds the oracle to the supplied registry.
void write_partial_oracle(std::ostream& out, const PartialOracle& po);
PartialOracle read_partial_oracle(std::istream& in, const MachineRegistry& reg);

}  // namespace refl
