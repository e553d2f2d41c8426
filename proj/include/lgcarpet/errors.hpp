#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lgcarpet {

/// A system, measure or potential violates one of its defining inequalities.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input text (JSON syntax, bad number literal, wrong shape).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An enumeration or memory guard would be exceeded.
class GuardExceeded : public std::length_error {
public:
    using std::length_error::length_error;
};

/// A finite word is too short for the requested quantity.
class InsufficientPrefix : public std::out_of_range {
public:
    InsufficientPrefix(const std::string& what, std::size_t deficit)
        : std::out_of_range(what + " (need " + std::to_string(deficit) + " more symbols)"),
          deficit_(deficit) {}

    std::size_t deficit() const noexcept { return deficit_; }

private:
    std::size_t deficit_;
};

}  // namespace lgcarpet
