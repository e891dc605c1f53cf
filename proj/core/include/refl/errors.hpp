#pragma once

#include <stdexcept>
#include <string>

namespace refl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Assembly or file-format error with a source position.
struct ParseError : Error {
  ParseError(int line, int column, const std::string& what)
      : Error("parse error at " + std::to_string(line) + ":" +
              std::to_string(column) + ": " + what),
        line(line),
        column(column) {}
  int line;
  int column;
};

// A partial oracle was used against a registry it was not built for.
struct FingerprintMismatch : Error {
  using Error::Error;
};

// Every environment in a Bayesian class assigned likelihood zero.
struct PosteriorUndefined : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace refl
