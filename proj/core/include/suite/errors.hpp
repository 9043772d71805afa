#pragma once

#include <stdexcept>
#include <string>

namespace suite {

/// Raised when an operation's inputs fall outside its mathematical domain
/// (infeasible tallies, empty candidate sets, unsupported stratum layouts).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Raised when a stratum P-value function breaks the monotonicity contract
/// the interval bounds rely on.
class ContractViolation : public DomainError {
public:
    explicit ContractViolation(const std::string& what) : DomainError(what) {}
};

/// Malformed input files (JSON, CSV). Carries the offending source location
/// in the message.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace suite
