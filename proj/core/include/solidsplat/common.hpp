// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace solidsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

// Opacities are capped at 1 - kOpacityEpsilon so the vacancy never reaches zero.
inline constexpr double kOpacityEpsilon = 1e-4;
inline constexpr double kMaxOpacity = 1.0 - kOpacityEpsilon;

// Restrictions whose ray peak falls below this are ignored everywhere.
inline constexpr double kContributionCutoff = 1e-4;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user input: bad parameters, schema violations, missing files.
class ValidationError : public Error {
public:
    using Error::Error;
};

// NaN/Inf or a degenerate configuration encountered during computation.
class NumericError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string &what, std::size_t byte_offset)
        : Error(what + " (at byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace solidsplat
