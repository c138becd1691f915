// errors.hpp
//
// Exception types. Every failure the library reports is a subclass of
// wtqkd::Error so callers (the CLI in particular) can catch one type.

#ifndef WTQKD_ERRORS_HPP
#define WTQKD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wtqkd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class BelowThresholdError : public Error {
public:
    using Error::Error;
};

class NumericalInstabilityError : public Error {
public:
    NumericalInstabilityError(const std::string& what, long step)
        : Error(what), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

class FitFailure : public Error {
public:
    FitFailure(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class MalformedRecord : public Error {
public:
    using Error::Error;
};

class EstimationAborted : public Error {
public:
    using Error::Error;
};

class NoLockError : public Error {
public:
    using Error::Error;
};

/// Raised by config loading; the message carries the offending key path.
class SchemaError : public Error {
public:
    SchemaError(const std::string& key_path, const std::string& reason)
        : Error(key_path + ": " + reason), key_path_(key_path) {}
    const std::string& key_path() const { return key_path_; }

private:
    std::string key_path_;
};

}  // namespace wtqkd

#endif  // WTQKD_ERRORS_HPP
