#pragma once

#include <stdexcept>
#include <string>

namespace rega {

// Input failed validation (bad field, missing value, broken invariant).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A file or line could not be parsed. Messages carry "<file>:<line>".
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace rega
