#pragma once

#include <stdexcept>
#include <string>

namespace epiflow {

// Bad inputs: malformed CSVs, schema violations, precondition failures.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical/statistical failures: rank deficiency, non-convergence,
// degenerate instruments. The CLI maps this to exit code 3.
class EstimationError : public std::runtime_error {
public:
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace epiflow
