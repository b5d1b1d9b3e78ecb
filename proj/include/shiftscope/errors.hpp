#pragma once

#include <stdexcept>
#include <string>

namespace shiftscope {

// Error taxonomy mirrors the CLI exit codes: config/usage problems,
// bad or insufficient input data, and broken internal contracts.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace shiftscope
