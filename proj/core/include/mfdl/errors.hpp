#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mfdl {

// Numeric failure (NaN/Inf, blow-up, stagnation). Carries the last usable
// state so callers can inspect how far a run got.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, std::vector<double> last = {})
        : std::runtime_error(what), last_iterate(std::move(last)) {}

    std::vector<double> last_iterate;
};

// Requested combination of inputs is outside what this build supports
// (e.g. full-covariance W2, high-dimensional Taylor assemblies).
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mfdl
