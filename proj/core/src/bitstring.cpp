#include "refl/bitstring.hpp"

#include "refl/errors.hpp"

namespace refl {

bool is_bitstring(const std::string& s) {
  for (char c : s)
    if (c != '0' && c != '1') return false;
  return true;
}

std::uint64_t length_lex_rank(const BitString& s) {
  if (!is_bitstring(s)) throw Error("not a binary string: '" + s + "'");
  if (s.size() >= 63) throw Error("binary string too long for rank arithmetic");
  // 2^len - 1 strings are strictly shorter; then the value of s itself.
  std::uint64_t shorter = (std::uint64_t{1} << s.size()) - 1;
  std::uint64_t value = 0;
  for (char c : s) value = (value << 1) | static_cast<std::uint64_t>(c - '0');
  return shorter + value;
}

BitString bitstring_from_rank(std::uint64_t rank) {
  std::size_t len = 0;
  while (((std::uint64_t{1} << (len + 1)) - 1) <= rank) ++len;
  std::uint64_t value = rank - ((std::uint64_t{1} << len) - 1);
  BitString s(len, '0');
  for (std::size_t i = 0; i < len; ++i)
    if (value & (std::uint64_t{1} << (len - 1 - i))) s[i] = '1';
  return s;
}

}  // namespace refl
