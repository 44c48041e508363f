#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kernseg {

/// Precondition violated by the caller (bad sizes, empty inputs, invalid configs).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A kernel matrix failed the Mercer (PSD) check.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or a degenerate numerical state reached during an iteration.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the byte offset where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace kernseg
