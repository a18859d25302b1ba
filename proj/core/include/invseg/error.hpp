#pragma once

#include <stdexcept>
#include <string>

namespace invseg {

// Pipeline-stage failures (bad data, degenerate inputs, broken invariants).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace invseg
