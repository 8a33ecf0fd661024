#pragma once

#include <stdexcept>
#include <string>

namespace tomopair {

// Violated call contract (bad shapes, out-of-range arguments, missing inputs).
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input is structurally valid but carries no usable information
// (constant field for normalization, all-zero volume for FSC, ...).
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw PreconditionError(msg);
}

} // namespace tomopair
