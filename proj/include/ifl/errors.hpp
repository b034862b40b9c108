// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ifl {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File / format errors (module volume).
struct ParseError : Error { using Error::Error; };
struct CorruptPayload : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

/// A stored or computed value violates a documented type invariant.
struct InvariantViolation : Error { using Error::Error; };

// Input validation.
struct InvalidParameter : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };
struct InvalidTarget : Error { using Error::Error; };
struct InvalidStep : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct DegenerateVolume : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };

/// Training reached a non-finite loss. Carries the step at which the
/// divergence was detected and the last finite total loss seen.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, long step, double last_finite_loss)
        : Error(msg), step(step), last_finite_loss(last_finite_loss) {}
    long step;
    double last_finite_loss;
};

} // namespace ifl
