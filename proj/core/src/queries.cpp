#include <limits>

#include "refl/errors.hpp"
#include "refl/machine.hpp"

namespace refl {

// Thresholds are enumerated by dyadic level, then numerator:
//   rank 0 -> 0, rank 1 -> 1, rank 2 -> 1/2,
//   level L >= 2 occupies ranks 2^(L-1)+1 .. 2^L with numerators 1,3,5,...
Rat threshold_from_rank(std::uint64_t rank) {
  if (rank == 0) return Rat(0);
  if (rank == 1) return Rat(1);
  if (rank == 2) return dyadic(1, 1);
  int level = 2;
  while ((std::uint64_t{1} << level) < rank) ++level;
  std::uint64_t start = (std::uint64_t{1} << (level - 1)) + 1;
  std::uint64_t pos = rank - start;
  return dyadic(static_cast<std::int64_t>(2 * pos + 1), level);
}

std::uint64_t threshold_rank(const Rat& threshold) {
  if (threshold < 0 || threshold > 1)
    throw Error("threshold out of [0,1]: " + rat_str(threshold));
  auto parts = as_dyadic(threshold);
  if (!parts) throw Error("threshold is not dyadic: " + rat_str(threshold));
  if (parts->level == 0) return threshold == 0 ? 0 : 1;
  if (parts->level == 1) return 2;
  return (std::uint64_t{1} << (parts->level - 1)) + 1 +
         static_cast<std::uint64_t>((parts->numerator - 1) / 2);
}

std::vector<Query> enumerate_queries(int registry_size, std::uint64_t n) {
  std::vector<Query> out;
  if (registry_size <= 0 || n == 0) return out;
  out.reserve(n);
  for (std::uint64_t d = 0;; ++d) {
    std::uint64_t a_max = std::min<std::uint64_t>(d, registry_size - 1);
    for (std::uint64_t a = 0; a <= a_max; ++a) {
      for (std::uint64_t b = 0; b + a <= d; ++b) {
        std::uint64_t c = d - a - b;
        out.push_back(Query{static_cast<int>(a) + 1, bitstring_from_rank(b),
                            threshold_from_rank(c)});
        if (out.size() == n) return out;
      }
    }
  }
}

std::vector<Query> enumerate_queries(const MachineRegistry& reg, std::uint64_t n) {
  return enumerate_queries(reg.size(), n);
}

namespace {

// Number of triples (a, b, c) with a + b + c < d and a < N, as an exact
// integer; bisection thresholds from builtins can push d far past 2^32.
mpz_class triples_below_diagonal(std::uint64_t d, std::uint64_t n_machines) {
  mpz_class d_z(static_cast<unsigned long>(std::min<std::uint64_t>(
      d, std::numeric_limits<unsigned long>::max())));
  // Use exact arithmetic throughout; d always fits an unsigned long here.
  mpz_class N(static_cast<unsigned long>(n_machines));
  if (d <= n_machines) {
    // Full tetrahedral count: d(d+1)(d+2)/6.
    return d_z * (d_z + 1) * (d_z + 2) / 6;
  }
  mpz_class total = N * (N + 1) * (N + 2) / 6;  // diagonals 0 .. N-1
  // Diagonals N .. d-1 contribute N(d'+1) - N(N-1)/2 each.
  mpz_class sum_k = (d_z * (d_z + 1) - N * (N + 1)) / 2;  // sum of N+1..d
  total += N * sum_k - (d_z - N) * (N * (N - 1) / 2);
  return total;
}

}  // namespace

std::uint64_t query_index(int registry_size, const Query& q) {
  if (q.machine < 1 || q.machine > registry_size)
    throw Error("query names machine " + std::to_string(q.machine) +
                " outside registry of size " + std::to_string(registry_size));
  std::uint64_t a = static_cast<std::uint64_t>(q.machine - 1);
  std::uint64_t b = length_lex_rank(q.input);
  std::uint64_t c = threshold_rank(q.threshold);
  std::uint64_t d = a + b + c;
  mpz_class index = triples_below_diagonal(d, registry_size);
  // Offset inside the diagonal: machines a' < a first, then input rank.
  mpz_class a_z(static_cast<unsigned long>(a));
  mpz_class d_z(static_cast<unsigned long>(d));
  index += a_z * (d_z + 1) - a_z * (a_z - 1) / 2;
  index += mpz_class(static_cast<unsigned long>(b));
  index += 1;  // 1-based
  if (!index.fits_ulong_p() ||
      index.get_ui() > std::numeric_limits<std::uint64_t>::max() / 2)
    return std::numeric_limits<std::uint64_t>::max();  // far beyond any level
  return static_cast<std::uint64_t>(index.get_ui());
}

std::uint64_t query_index(const MachineRegistry& reg, const Query& q) {
  return query_index(reg.size(), q);
}

}  // namespace refl
