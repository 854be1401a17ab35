#pragma once

#include <stdexcept>
#include <string>

namespace oetr {

// Error taxonomy mirrored by the CLI exit codes: data errors (bad inputs,
// shapes, configs, files) exit 2, numerical failures exit 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidInput : DataError {
    explicit InvalidInput(const std::string& msg) : DataError(msg) {}
};

struct InvalidShape : DataError {
    explicit InvalidShape(const std::string& msg) : DataError(msg) {}
};

struct InvalidConfig : DataError {
    explicit InvalidConfig(const std::string& msg) : DataError(msg) {}
};

struct IoError : DataError {
    explicit IoError(const std::string& msg) : DataError(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace oetr
