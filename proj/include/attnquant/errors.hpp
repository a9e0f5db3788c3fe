// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace attnquant {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor rank/dimension mismatches.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Empty inputs, out-of-range values, invalid parameters.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Bad configuration files or option values (CLI exit 65).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// File-format and I/O failures (CLI exit 74). Each failure mode has a
/// stable numeric code so tools and tests can tell them apart.
class IoError : public Error {
public:
    enum Code {
        open_failed = 1,
        bad_magic = 2,
        bad_version = 3,
        bad_dtype = 4,
        truncated = 5,
        dim_overflow = 6,
        non_finite = 7,
        write_failed = 8,
    };

    IoError(Code code, const std::string& msg) : Error(msg), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

}  // namespace attnquant
