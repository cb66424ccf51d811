#pragma once

#include <stdexcept>
#include <string>

namespace fhmp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid input data (non-positive D, shape mismatch, malformed files).
class DataError : public Error {
public:
    using Error::Error;
};

// X'V^{-1}X is numerically singular, i.e. rank(X) < p.
class RankDeficiencyError : public DataError {
public:
    using DataError::DataError;
};

// Argument outside the domain of a function (A <= 0 where A > 0 is required, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// REML estimate truncated at zero where a strictly positive value is needed.
class TruncationError : public DomainError {
public:
    using DomainError::DomainError;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

}  // namespace fhmp
