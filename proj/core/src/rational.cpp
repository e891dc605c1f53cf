#include "refl/rational.hpp"

#include "refl/errors.hpp"

namespace refl {

Rat dyadic(std::int64_t n, int level) {
  if (level < 0) throw Error("dyadic level must be nonnegative");
  mpz_class den(1);
  mpz_mul_2exp(den.get_mpz_t(), den.get_mpz_t(), level);
  Rat q(mpz_class(static_cast<long>(n)), den);
  q.canonicalize();
  return q;
}

Rat dyadic(const mpz_class& n, int level) {
  if (level < 0) throw Error("dyadic level must be nonnegative");
  mpz_class den(1);
  mpz_mul_2exp(den.get_mpz_t(), den.get_mpz_t(), level);
  Rat q(n, den);
  q.canonicalize();
  return q;
}

Rat pow2(int e) {
  mpz_class p(1);
  mpz_mul_2exp(p.get_mpz_t(), p.get_mpz_t(), e >= 0 ? e : -e);
  if (e >= 0) return Rat(p);
  Rat q(mpz_class(1), p);
  q.canonicalize();
  return q;
}

Rat parse_rational(const std::string& text) {
  if (text.empty()) throw ParseError(0, 0, "empty rational literal");
  // mpq_class accepts garbage prefixes in some bases; validate shape first.
  std::size_t i = 0;
  auto scan_int = [&]() {
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
    std::size_t start = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    return i > start;
  };
  bool ok = scan_int();
  if (ok && i < text.size() && text[i] == '/') {
    ++i;
    ok = scan_int();
  }
  if (!ok || i != text.size())
    throw ParseError(0, 0, "malformed rational literal '" + text + "'");
  Rat q;
  if (mpq_set_str(q.get_mpq_t(), text.c_str(), 10) != 0)
    throw ParseError(0, 0, "malformed rational literal '" + text + "'");
  if (mpz_sgn(mpq_denref(q.get_mpq_t())) == 0)
    throw ParseError(0, 0, "zero denominator in '" + text + "'");
  q.canonicalize();
  return q;
}

std::optional<DyadicParts> as_dyadic(const Rat& q) {
  const mpz_class den = q.get_den();
  if (mpz_sgn(den.get_mpz_t()) <= 0) return std::nullopt;
  // A canonical denominator is a power of two iff it has a single set bit.
  if (mpz_popcount(den.get_mpz_t()) != 1) return std::nullopt;
  DyadicParts out;
  out.level = static_cast<int>(mpz_sizeinbase(den.get_mpz_t(), 2)) - 1;
  if (!q.get_num().fits_slong_p()) return std::nullopt;
  out.numerator = q.get_num().get_si();
  return out;
}

std::string rat_str(const Rat& q) { return q.get_str(); }

double rat_to_double(const Rat& q) { return q.get_d(); }

}  // namespace refl
