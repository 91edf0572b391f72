#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace movae {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Operand shapes do not conform.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A precondition on user-supplied data or configuration failed.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A value is outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace movae
