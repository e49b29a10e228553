#pragma once

#include <stdexcept>
#include <string>

namespace sburgers {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed configuration, unknown preset names.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Step or cell index outside the range covered by a path or a table.
class IndexError : public Error {
public:
    using Error::Error;
};

/// A numerical scheme could not proceed (window too narrow, CFL exceeded).
class SolverError : public Error {
public:
    using Error::Error;
};

/// An operation needs data that was not retained (e.g. value-function history).
class StateError : public Error {
public:
    using Error::Error;
};

/// Mathematically invalid argument (zero tangent vector and the like).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A structural check could not produce a verdict; maps to exit code 4.
class CheckError : public Error {
public:
    using Error::Error;
};

/// No shock covers enough of the circle at the requested horizon.
class HorizonTooShortError : public CheckError {
public:
    using CheckError::CheckError;
};

/// Several shocks share the cover; expected for symmetric single-mode forcing.
class DegeneracyError : public CheckError {
public:
    using CheckError::CheckError;
};

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitCheck = 4;

} // namespace sburgers
