#pragma once

#include <stdexcept>
#include <string>

namespace scengen {

// input file could not be read or decoded
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// input decoded fine but violates a structural rule; message names the offender
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// a query left the domain of an otherwise valid object
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scengen
