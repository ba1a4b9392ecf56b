#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zrnorm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or type invariant (bad config, empty input, N < K, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    DimensionMismatch(std::size_t expected, std::size_t got, const std::string& what)
        : InvalidArgument(what + ": expected dimension " + std::to_string(expected) + ", got " +
                          std::to_string(got)),
          expected_(expected), got_(got) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t got() const noexcept { return got_; }

private:
    std::size_t expected_;
    std::size_t got_;
};

/// Binary container errors. Each failure mode has its own kind so callers can tell them apart.
class FormatError : public Error {
public:
    enum class Kind { bad_magic, version_mismatch, truncated, duplicate_id, invalid_value, io };

    FormatError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Text format errors. `line()` is 1-based, 0 when the error is not tied to a line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Alignment segments that do not tile [0, T).
class AlignmentError : public Error {
public:
    enum class Kind { gap, overlap, bad_start, empty_segment, length_mismatch, unknown_utterance };

    AlignmentError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

} // namespace zrnorm
