#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ureg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Lexical or grammatical failure while parsing an expression. `offset` is the
// byte offset into the input where the problem was detected.
struct ParseError : Error {
  ParseError(std::string msg, std::size_t offset_)
      : Error(msg + " (at offset " + std::to_string(offset_) + ")"), offset(offset_) {}
  std::size_t offset;
};

// Evaluation outside the real domain of an expression (pole, log of a
// non-positive value, |.| differentiated at zero, ...). Raised instead of
// letting NaN/Inf propagate silently.
struct DomainError : Error {
  using Error::Error;
};

// Ill-formed atlas data: unknown chart ids, asymmetric neighbour relations,
// points outside declared overlap domains.
struct AtlasError : Error {
  using Error::Error;
};

// Numerical failure: non-SPD metric where one is required, singular
// transition Jacobian, step-size underflow in an integrator.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace ureg
