#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ared {

/// A structural constant or configuration value lies outside its valid range.
/// `key()` names the offending parameter.
class ParameterError : public std::invalid_argument {
public:
  ParameterError(std::string key, const std::string& reason)
      : std::invalid_argument(key + ": " + reason), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

/// A model quantity left its valid domain at run time (non-positive price,
/// undefined rate of change, ...). `period()` is -1 when no period applies.
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what, std::int64_t period = -1)
      : std::domain_error(what), period_(period) {}

  std::int64_t period() const noexcept { return period_; }

  DomainError at_period(std::int64_t period) const {
    return DomainError(std::string(what()) + " (period " + std::to_string(period) + ")",
                       period);
  }

private:
  std::int64_t period_;
};

/// Raised when an arithmetic invariant that cannot fail in exact arithmetic
/// does fail, e.g. both candidate demands negative while their average is s.
class InternalError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace ared
