#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace difflab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExpressionError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public ExpressionError {
public:
    SyntaxError(std::size_t position, std::string expected, const std::string& text)
        : ExpressionError("syntax error at byte " + std::to_string(position) + ": expected " + expected +
                          " in \"" + text + "\""),
          position_(position),
          expected_(std::move(expected)) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

class NegativeIntegrand : public QuadratureError {
public:
    using QuadratureError::QuadratureError;
};

class InversionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class HypothesisError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class DivergentTail : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

class OutOfGrid : public Error {
public:
    using Error::Error;
};

class UnsupportedBoundary : public Error {
public:
    using Error::Error;
};

class BlowUp : public Error {
public:
    using Error::Error;
};

class ModelFileError : public Error {
public:
    using Error::Error;
};

}  // namespace difflab
