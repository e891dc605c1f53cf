#pragma once

#include <cstdint>
#include <string>

namespace refl {

// Binary strings are held as std::string over the characters '0' and '1'.
// The empty string is the machine-input epsilon.
using BitString = std::string;

bool is_bitstring(const std::string& s);

// Rank in length-lexicographic order: eps -> 0, "0" -> 1, "1" -> 2,
// "00" -> 3, "01" -> 4, ...
std::uint64_t length_lex_rank(const BitString& s);
BitString bitstring_from_rank(std::uint64_t rank);

}  // namespace refl
