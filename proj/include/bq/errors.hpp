#pragma once

#include <stdexcept>
#include <string>

namespace bq {

/// Grid or array sizes that do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Non-finite values or failed numerical procedures.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A simulated path produced non-finite values.
class BlowUpError : public NumericError {
public:
    BlowUpError(double time, std::string variable)
        : NumericError("blow-up in " + variable + " at t=" + std::to_string(time)),
          time_(time), variable_(std::move(variable)) {}

    double time() const noexcept { return time_; }
    const std::string& variable() const noexcept { return variable_; }

private:
    double time_;
    std::string variable_;
};

}  // namespace bq
