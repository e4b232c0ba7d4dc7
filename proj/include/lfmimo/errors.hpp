// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lfmimo {

// Invalid argument values (nonpositive powers, unsupported constellations, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Matrix operands whose dimensions do not match the operation.
struct ShapeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Vector operands of unequal or invalid length.
struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Effective channel or covariance numerically below full rank.
struct RankDeficient : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fewer entries than an operation needs.
struct TooFewEntries : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Enumeration would exceed the configured cap.
struct TooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Every candidate was infeasible for the given channel.
struct AllInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A bound evaluation was requested without the packing density.
struct MissingDensity : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Simulation campaign skipped more draws than the tolerated fraction.
struct TooManySkips : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace lfmimo
