// SPDX-License-Identifier: Apache-2.0
//
// Time-decaying weight lambda(t) on the fuzzy branch and the learnable
// rho reparameterization. Decreasing lambda moves the optimizer from a
// fuzzy-dominant regime toward the Dice-dominant regime; each fixed
// lambda corresponds to one trade-off point between the two objectives.
#pragma once

#include <cstdint>

#include "ifl/losses.hpp"

namespace ifl {

enum class ScheduleKind { Exponential, Linear, Constant, LearnableOnly };

struct CurriculumSchedule {
    ScheduleKind kind = ScheduleKind::Exponential;
    double lambda0 = 1.0;
    double alpha = 0.0;     ///< exponential decay rate
    int64_t t_end = 1;      ///< linear ramp length in steps
    double clamp_min = 0.0; ///< floor applied to decaying kinds

    /// Default used by the workbench: lambda(t) = exp(-alpha t) with
    /// alpha chosen so lambda(total_steps) = 0.01.
    static CurriculumSchedule default_exponential(int64_t total_steps);
};

/// lambda at step t. Decaying kinds are clamped from below at
/// clamp_min; LearnableOnly pins lambda to 1 and leaves the annealing
/// to the rho dynamics. Throws InvalidStep for negative t.
double lambda_at(const CurriculumSchedule& s, int64_t t);

/// RhoPair whose sigmoid values reproduce the given inits. Inits must
/// lie strictly inside (0,1).
RhoPair make_rho(double init1, double init2);

struct CurriculumState {
    int64_t step = 0;
    double lambda = 0.0;
    RhoPair rho;
};

} // namespace ifl
