#pragma once

#include <stdexcept>
#include <string>

namespace pburg {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Syntax error while parsing an expression. `offset` is a byte offset into the input.
struct ParseError : Error {
    std::size_t offset;
    ParseError(const std::string& what, std::size_t offset_)
        : Error(what + " (at byte " + std::to_string(offset_) + ")"), offset(offset_) {}
};

/// Evaluation hit a point outside the domain (division by zero, ln/sqrt of a
/// nonpositive argument, unbound variable). Carries the offending subexpression.
struct EvalError : Error {
    std::string subexpr;
    EvalError(const std::string& what, std::string subexpr_)
        : Error(what + " in subexpression: " + subexpr_), subexpr(std::move(subexpr_)) {}
};

/// A probabilistic zero/constancy test could not reach a verdict.
struct IndeterminateError : Error {
    using Error::Error;
};

/// Invalid transformation or equation parameters (violated invariants).
struct ParamError : Error {
    using Error::Error;
};

/// Adaptive quadrature failed to converge or met a singular integrand.
struct QuadratureError : Error {
    using Error::Error;
};

/// Numeric inversion of a transformation component failed on the given box.
struct InversionError : Error {
    using Error::Error;
};

/// A sampler could not produce enough admissible points (domain starvation).
struct SamplingError : Error {
    using Error::Error;
};

}  // namespace pburg
