// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msd {

/// Root of every error thrown by the library. Callers that only care about
/// "something went wrong in msd" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A computation produced NaN/Inf, or a training run diverged.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration. `key()` names the offending knob.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& message)
        : Error(key + ": " + message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Malformed serialized input; `offset()` is the byte position of the fault.
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& message)
        : Error("parse error at byte " + std::to_string(offset) + ": " + message),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Lookup of an id that does not exist.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// A tape passed to a backward call does not belong to the layer given.
class TapeError : public Error {
public:
    using Error::Error;
};

}  // namespace msd
