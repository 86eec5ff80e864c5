#pragma once

#include <stdexcept>
#include <string>

namespace spde {

/// Caller passed an argument outside an operation's contract.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A step produced non-finite coefficients.
class NumericalBlowup : public std::runtime_error {
public:
    NumericalBlowup(double time, const std::string& what)
        : std::runtime_error(what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Configuration text rejected; carries the offending key and line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)), line_(line) {}

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

}  // namespace spde
