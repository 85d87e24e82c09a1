#pragma once

#include <stdexcept>
#include <string>

namespace xdesign {

/// Malformed or out-of-range input (bad JSON, invalid config values).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A setup or rule cannot be evaluated on the given population,
/// e.g. the intersection-only setup with no users in group 3.
class InapplicableError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical routine failed to produce a usable answer
/// (bracket failure in a root search, non-finite intermediate).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xdesign
