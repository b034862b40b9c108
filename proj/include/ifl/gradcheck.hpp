// SPDX-License-Identifier: Apache-2.0
//
// Central-finite-difference verification of every analytic derivative:
// the fuzzy term's p- and rho-gradients, its curvature, the
// cross-entropy derivatives, the Dice gradient, and the full logit /
// raw-rho chain through the combined objective. The checker only ever
// evaluates loss *values*; the analytic formulas enter solely as the
// quantities under test.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ifl {

struct GradCheckFamily {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckFamily> families;
    int samples = 0;
    uint64_t seed = 0;

    bool all_pass() const {
        for (const auto& f : families)
            if (!f.pass) return false;
        return !families.empty();
    }
    std::string to_text() const;
};

/// Runs `samples` seeded random instances per derivative family.
/// First-order families use tolerance 1e-5, second-order 1e-4; the
/// error measure is |analytic - fd| / max(1, |analytic|, |fd|).
/// `perturb` (a test hook) adds a bias to every analytic value so the
/// suite can be shown to fail; keep 0 for real checks.
/// Throws InsufficientData when samples < 1.
GradCheckReport run_gradient_checks(int samples, uint64_t seed, double perturb = 0.0);

} // namespace ifl
