#pragma once

#include <stdexcept>
#include <string>

namespace qprobe {

// Contract violations (bad shapes, invalid inputs, unsupported configurations)
// derive from ContractError; failures of a numerical procedure derive from
// NumericalError. The CLI maps the two families to exit codes 2 and 1.
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public ContractError {
public:
    using ContractError::ContractError;
};

class ValidationError : public ContractError {
public:
    using ContractError::ContractError;
};

class UnsupportedConfiguration : public ContractError {
public:
    using ContractError::ContractError;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace qprobe
