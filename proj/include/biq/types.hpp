#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace biq {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

// Calibrated probabilities are clipped to [kProbClip, 1 - kProbClip].
inline constexpr Scalar kProbClip = 1e-6;

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error {
    ParseError(std::size_t line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line(line) {}
    std::size_t line;
};

struct ConfigError : Error {
    using Error::Error;
};

struct TrainError : Error {
    using Error::Error;
};

struct UnsupportedError : Error {
    using Error::Error;
};

}  // namespace biq
