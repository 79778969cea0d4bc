#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ctrllab {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Raised when a computation cannot be carried out at the current working
// precision. required_bits is the estimate the caller should retry with.
struct PrecisionEscalation : std::runtime_error {
    PrecisionEscalation(const std::string& what, int required_bits)
        : std::runtime_error(what + " (required bits: " + std::to_string(required_bits) + ")"),
          required_bits(required_bits) {}
    int required_bits;
};

struct NormalizationError : std::runtime_error {
    NormalizationError(const std::string& what, double lambda)
        : std::runtime_error(what), lambda(lambda) {}
    double lambda;
};

// Approximate controllability fails: some observation or coupling integral vanishes.
struct ControllabilityError : std::runtime_error {
    ControllabilityError(const std::string& what, double lambda)
        : std::runtime_error(what), lambda(lambda) {}
    double lambda;
};

// Some biorthogonal atoms failed their moment check; the control was not assembled.
struct AssemblyError : std::runtime_error {
    AssemblyError(const std::string& what, std::vector<int> groups)
        : std::runtime_error(what), groups(std::move(groups)) {}
    std::vector<int> groups;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ctrllab
