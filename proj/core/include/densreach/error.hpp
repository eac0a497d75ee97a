// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace densreach {

/// Base of every error raised by the library. Callers that only need
/// "something went wrong" can catch this; the CLI maps subclasses onto
/// exit codes.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad argument: dimension mismatch, out-of-range parameter, malformed set.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// A computation produced NaN/Inf.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Integration blew up. `step` is the recorded step index where the state
/// first became non-finite.
class DivergenceError : public NumericError {
  public:
    DivergenceError(const std::string& what, long step) : NumericError(what), step_(step) {}
    [[nodiscard]] long step() const noexcept { return step_; }

  private:
    long step_;
};

/// Input outside the mathematical domain of a formula.
class DomainError : public Error {
  public:
    using Error::Error;
};

class InfeasibleError : public Error {
  public:
    using Error::Error;
};

class UnboundedError : public Error {
  public:
    using Error::Error;
};

/// Cell enumeration exceeded its budget. Partial results are discarded.
class BudgetError : public Error {
  public:
    using Error::Error;
};

/// Rejection sampling of a truncated distribution accepts too rarely.
class TruncationError : public Error {
  public:
    using Error::Error;
};

/// Requested estimator does not support this many dimensions.
class DimensionalityError : public Error {
  public:
    using Error::Error;
};

class TrainingDivergedError : public NumericError {
  public:
    TrainingDivergedError(const std::string& what, int epoch) : NumericError(what), epoch_(epoch) {}
    [[nodiscard]] int epoch() const noexcept { return epoch_; }

  private:
    int epoch_;
};

/// Malformed serialized payload. `offset` is the byte offset reported by the
/// parser, or the best available position.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t offset) : Error(what), offset_(offset) {}
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

  private:
    std::size_t offset_;
};

class UnsupportedVersionError : public Error {
  public:
    UnsupportedVersionError(const std::string& what, int version) : Error(what), version_(version) {}
    [[nodiscard]] int version() const noexcept { return version_; }

  private:
    int version_;
};

}  // namespace densreach
