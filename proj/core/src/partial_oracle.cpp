#include "refl/partial_oracle.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <sstream>

#include "refl/errors.hpp"

namespace refl {

ProbabilityInterval::ProbabilityInterval(Rat lo_, Rat hi_)
    : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo < 0 || hi > 1 || lo > hi)
    throw Error("malformed probability interval [" + rat_str(lo) + ", " +
                rat_str(hi) + "]");
}

ProbabilityInterval operator*(const ProbabilityInterval& a,
                              const ProbabilityInterval& b) {
  // Endpoints are nonnegative, so the product interval needs no case split.
  return ProbabilityInterval(a.lo * b.lo, a.hi * b.hi);
}

ProbabilityInterval operator+(const ProbabilityInterval& a,
                              const ProbabilityInterval& b) {
  return ProbabilityInterval(a.lo + b.lo, rat_min(Rat(1), a.hi + b.hi));
}

ProbabilityInterval operator*(const Rat& s, const ProbabilityInterval& a) {
  return ProbabilityInterval(s * a.lo, s * a.hi);
}

PartialOracle::PartialOracle(int level, const std::vector<std::int64_t>& numerators,
                             std::uint64_t registry_fingerprint)
    : PartialOracle(level,
                    std::vector<mpz_class>(numerators.begin(), numerators.end()),
                    registry_fingerprint, 0) {}

PartialOracle PartialOracle::from_big_numerators(int level,
                                                 std::vector<mpz_class> numerators,
                                                 std::uint64_t registry_fingerprint) {
  return PartialOracle(level, std::move(numerators), registry_fingerprint, 0);
}

PartialOracle::PartialOracle(int level, std::vector<mpz_class> numerators,
                             std::uint64_t registry_fingerprint, int)
    : level_(level),
      numerators_(std::move(numerators)),
      fingerprint_(registry_fingerprint) {
  if (level_ < 1 || level_ > 4096)
    throw Error("partial oracle level out of range: " + std::to_string(level_));
  if (numerators_.size() != static_cast<std::size_t>(level_))
    throw Error("level-" + std::to_string(level_) + " oracle needs exactly " +
                std::to_string(level_) + " values");
  mpz_class grid = grid_size();
  for (const mpz_class& n : numerators_)
    if (n < 0 || n > grid)
      throw Error("oracle grid value " + n.get_str() + " outside [0, 2^" +
                  std::to_string(level_) + "]");
}

mpz_class PartialOracle::grid_size() const {
  mpz_class grid(1);
  mpz_mul_2exp(grid.get_mpz_t(), grid.get_mpz_t(),
               static_cast<mp_bitcnt_t>(level_));
  return grid;
}

Rat PartialOracle::value(std::uint64_t query_index) const {
  return dyadic(numerator(query_index), level_);
}

const mpz_class& PartialOracle::numerator(std::uint64_t query_index) const {
  if (query_index < 1 || query_index > static_cast<std::uint64_t>(level_))
    throw Error("query index " + std::to_string(query_index) +
                " not covered at level " + std::to_string(level_));
  return numerators_[static_cast<std::size_t>(query_index - 1)];
}

void PartialOracle::check_registry(const MachineRegistry& reg) const {
  if (reg.fingerprint() != fingerprint_)
    throw FingerprintMismatch(
        "partial oracle was built against a different registry");
}

OracleAnswer answer(const PartialOracle& po, std::uint64_t query_index,
                    BitSource& bits) {
  if (query_index > static_cast<std::uint64_t>(po.level()))
    return OracleAnswer::kHalt;
  Rat v = po.value(query_index);
  Rat margin = pow2(-(po.level() + 1));
  Rat w1 = rat_max(Rat(0), v - margin);
  Rat w0 = rat_max(Rat(0), Rat(1) - v - margin);
  Rat wh = Rat(1) - w1 - w0;
  std::array<Rat, 3> weights{w1, w0, wh};
  switch (sample_index(weights, bits)) {
    case 0: return OracleAnswer::kOne;
    case 1: return OracleAnswer::kZero;
    default: return OracleAnswer::kHalt;
  }
}

bool extends(const PartialOracle& child, const PartialOracle& parent) {
  if (child.level() != parent.level() + 1)
    throw Error("extends() needs levels k+1 and k, got " +
                std::to_string(child.level()) + " and " +
                std::to_string(parent.level()));
  if (child.registry_fingerprint() != parent.registry_fingerprint())
    throw FingerprintMismatch("extends() across different registries");
  // On the common grid: |n'_i - 2 n_i| <= 1 at denominator 2^(k+1).
  for (int i = 0; i < parent.level(); ++i) {
    mpz_class diff = child.numerators()[static_cast<std::size_t>(i)] -
                     2 * parent.numerators()[static_cast<std::size_t>(i)];
    if (diff < -1 || diff > 1) return false;
  }
  return true;
}

ReflectivityResult is_partially_reflective(const PartialOracle& po,
                                           const MachineRegistry& reg) {
  po.check_registry(reg);
  std::vector<Query> queries =
      enumerate_queries(reg, static_cast<std::uint64_t>(po.level()));
  // An empty registry has no queries; every oracle is vacuously reflective.
  const int k = static_cast<int>(queries.size());
  for (int i = 1; i <= k; ++i) {
    const Query& q = queries[static_cast<std::size_t>(i - 1)];
    OutputDist dist = eval_truncated(reg, q.machine, q.input, po);
    Rat v = po.value(static_cast<std::uint64_t>(i));
    std::optional<Rat> required;
    if (dist.p1 > q.threshold && v != 1) required = Rat(1);
    if (dist.p0 > Rat(1) - q.threshold && v != 0) required = Rat(0);
    if (required) {
      ReflectivityResult r;
      r.reflective = false;
      r.violated_index = static_cast<std::uint64_t>(i);
      r.violated_query = q;
      r.required_value = *required;
      return r;
    }
  }
  return ReflectivityResult{};
}

ProbabilityInterval completed_bounds(const PartialOracle& po,
                                     const MachineRegistry& reg, int index,
                                     const BitString& input) {
  po.check_registry(reg);
  OutputDist dist = eval_truncated(reg, index, input, po);
  return ProbabilityInterval(dist.p1, Rat(1) - dist.p0);
}

void write_partial_oracle(std::ostream& out, const PartialOracle& po) {
  out << po.level() << "\n";
  for (int i = 1; i <= po.level(); ++i)
    out << i << " " << po.numerators()[static_cast<std::size_t>(i - 1)] << "\n";
  out << "# registry " << po.registry_fingerprint() << "\n";
}

PartialOracle read_partial_oracle(std::istream& in, const MachineRegistry& reg) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '#') continue;
      if (line.empty()) continue;
      return true;
    }
    return false;
  };
  if (!next_line()) throw Error("empty partial-oracle stream");
  int level = 0;
  try {
    level = std::stoi(line);
  } catch (...) {
    throw Error("bad partial-oracle header line: '" + line + "'");
  }
  std::vector<mpz_class> numerators;
  numerators.reserve(static_cast<std::size_t>(level));
  for (int i = 1; i <= level; ++i) {
    if (!next_line())
      throw Error("partial-oracle stream ends before value " + std::to_string(i));
    std::istringstream ls(line);
    std::int64_t idx = 0;
    std::string num;
    if (!(ls >> idx >> num) || idx != i)
      throw Error("bad partial-oracle value line: '" + line + "'");
    mpz_class n;
    if (mpz_set_str(n.get_mpz_t(), num.c_str(), 10) != 0)
      throw Error("bad partial-oracle numerator: '" + num + "'");
    numerators.push_back(std::move(n));
  }
  return PartialOracle::from_big_numerators(level, std::move(numerators),
                                            reg.fingerprint());
}

}  // namespace refl
