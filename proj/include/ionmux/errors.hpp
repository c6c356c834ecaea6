#pragma once

#include <stdexcept>
#include <string>

namespace ionmux {

/// Machine-readable error categories, mapped to CLI exit codes
/// (config = 2, input = 3, numeric/convergence = 4).
enum class ErrorCategory { config, input, numeric, convergence };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(msg), category_(cat) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorCategory::config, msg) {}
};

struct InputError : Error {
    explicit InputError(const std::string& msg) : Error(ErrorCategory::input, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorCategory::numeric, msg) {}
};

struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& msg) : Error(ErrorCategory::convergence, msg) {}
};

} // namespace ionmux
