// SPDX-License-Identifier: Apache-2.0

#include "ifl/curriculum.hpp"

#include <cmath>

namespace ifl {

CurriculumSchedule CurriculumSchedule::default_exponential(int64_t total_steps) {
    if (total_steps < 1) throw InvalidParameter("total_steps must be >= 1");
    CurriculumSchedule s;
    s.kind = ScheduleKind::Exponential;
    s.lambda0 = 1.0;
    s.alpha = std::log(100.0) / double(total_steps); // lambda(T) = 0.01
    return s;
}

double lambda_at(const CurriculumSchedule& s, int64_t t) {
    if (t < 0) throw InvalidStep("schedule step must be >= 0, got " + std::to_string(t));
    switch (s.kind) {
        case ScheduleKind::Exponential:
            return std::max(s.clamp_min, s.lambda0 * std::exp(-s.alpha * double(t)));
        case ScheduleKind::Linear: {
            if (s.t_end < 1) throw InvalidParameter("linear schedule needs t_end >= 1");
            const double raw = s.lambda0 * (1.0 - double(t) / double(s.t_end));
            return std::max(s.clamp_min, std::max(0.0, raw));
        }
        case ScheduleKind::Constant:
            return s.lambda0;
        case ScheduleKind::LearnableOnly:
            return 1.0;
    }
    throw InvalidParameter("unknown schedule kind");
}

RhoPair make_rho(double init1, double init2) {
    if (!(init1 > 0.0 && init1 < 1.0) || !(init2 > 0.0 && init2 < 1.0))
        throw InvalidParameter("rho inits must lie strictly inside (0,1)");
    return RhoPair::from_values(init1, init2);
}

} // namespace ifl
