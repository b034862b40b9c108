// SPDX-License-Identifier: Apache-2.0
//
// Fuzzy auxiliary loss, Dice loss, cross-entropy baseline and their
// analytic first and second derivatives.
//
// The fuzzy auxiliary term for one voxel and class, with membership mu,
// prediction p and learnable scalars rho1, rho2 in (0,1), is
//
//   L = -( mu * log p + rho2 * (1 - mu) * log(rho1 * (1 - p)) )
//
// with derivatives
//
//   dL/dp     = -mu/p + rho2*(1-mu)/(1-p)
//   d2L/dp2   =  mu/p^2 + rho2*(1-mu)/(1-p)^2        (>= 0, convex)
//   dL/drho1  = -(rho2/rho1)*(1-mu)
//   dL/drho2  = -(1-mu)*log(rho1*(1-p))
//
// The stationary point in p is p* = mu / (mu + rho2*(1-mu)); at rho2=1
// this is exactly mu, so the loss targets an interior probability and
// its curvature there stays bounded, unlike cross-entropy whose
// curvature diverges as p approaches a hard 0/1 target.
//
// Field-level losses reduce as mean over voxels of the per-voxel class
// sums; all field gradients are gradients of that mean. rho1, rho2 are
// kept in (0,1) through sigmoid reparameterization, and their raw
// (pre-sigmoid) gradients are chained with rho*(1-rho).
#pragma once

#include <optional>
#include <vector>

#include "ifl/util.hpp"
#include "ifl/volume.hpp"

namespace ifl {

/// Probabilities are clamped to [kProbClamp, 1-kProbClamp] before any
/// logarithm so losses and gradients stay finite.
inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) {
    return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

// --- scalar kernels (single voxel-class term) ---

inline double fuzzy_term(double p, double mu, double rho1, double rho2) {
    p = clamp_prob(p);
    // log(rho1*(1-p)) split as log(rho1) + log1p(-p); the constant
    // log(rho1) still contributes to the value and to dL/drho2.
    return -(mu * std::log(p) + rho2 * (1.0 - mu) * (std::log(rho1) + std::log1p(-p)));
}

inline double fuzzy_term_grad_p(double p, double mu, double rho2) {
    p = clamp_prob(p);
    return -mu / p + rho2 * (1.0 - mu) / (1.0 - p);
}

inline double fuzzy_term_curvature(double p, double mu, double rho2) {
    p = clamp_prob(p);
    return mu / (p * p) + rho2 * (1.0 - mu) / ((1.0 - p) * (1.0 - p));
}

inline double fuzzy_term_grad_rho1(double mu, double rho1, double rho2) {
    return -(rho2 / rho1) * (1.0 - mu);
}

inline double fuzzy_term_grad_rho2(double p, double mu, double rho1) {
    p = clamp_prob(p);
    return -(1.0 - mu) * (std::log(rho1) + std::log1p(-p));
}

/// Root of fuzzy_term_grad_p in p: p* = mu / (mu + rho2*(1-mu)).
/// Interior for mu in (0,1); equals mu exactly at rho2 = 1.
inline double fuzzy_equilibrium(double mu, double rho2) {
    return mu / (mu + rho2 * (1.0 - mu));
}

inline double ce_term(double p, double y) {
    p = clamp_prob(p);
    return -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

inline double ce_term_grad(double p, double y) {
    p = clamp_prob(p);
    return -y / p + (1.0 - y) / (1.0 - p);
}

inline double ce_term_curvature(double p, double y) {
    p = clamp_prob(p);
    return y / (p * p) + (1.0 - y) / ((1.0 - p) * (1.0 - p));
}

// --- learnable scalars ---

/// The pair (rho1, rho2), each in (0,1), stored through its raw
/// pre-sigmoid value so gradient updates can never leave the box.
struct RhoPair {
    double raw1 = 0.0;
    double raw2 = 0.0;

    static RhoPair from_values(double rho1, double rho2);
    static RhoPair from_raw(double raw1, double raw2) { return {raw1, raw2}; }

    double rho1() const { return sigmoid(raw1); }
    double rho2() const { return sigmoid(raw2); }
    bool operator==(const RhoPair&) const = default;
};

// --- field-level operations ---

/// Stabilized softmax over the class axis. Throws NonFiniteInput if any
/// logit is NaN or infinite.
ProbField softmax_field(const LogitField& z);

/// One-hot probability field from crisp labels.
ProbField one_hot(const LabelVolume& labels);

struct FuzzyLossResult {
    double value = 0.0;     ///< mean over voxels of the per-voxel class sums
    ScalarField per_voxel;  ///< per-voxel class sums (mean of this field == value)
};

/// Eq-style fuzzy auxiliary loss over a field. p is used as-is (no
/// row-sum requirement) so the same routine serves both softmax outputs
/// and independent per-class probes. nu is formed on the fly from the
/// live rho2.
FuzzyLossResult fuzzy_loss(const ProbField& p, const ProbField& mu, const RhoPair& rho);

/// Gradient of the mean fuzzy loss w.r.t. every p entry.
std::vector<double> fuzzy_loss_grad_p(const ProbField& p, const ProbField& mu,
                                      const RhoPair& rho);

/// Second derivative of the mean fuzzy loss w.r.t. every p entry.
/// Nonnegative everywhere.
std::vector<double> fuzzy_loss_curvature(const ProbField& p, const ProbField& mu,
                                         const RhoPair& rho);

struct RhoGrads {
    double d_rho1 = 0.0;     ///< d(mean loss)/d rho1
    double d_rho2 = 0.0;
    double d_raw1 = 0.0;     ///< chained through the sigmoid
    double d_raw2 = 0.0;
};

RhoGrads fuzzy_loss_grad_rho(const ProbField& p, const ProbField& mu, const RhoPair& rho);

/// Cross-entropy against one-hot targets (per-class binary form, summed
/// over classes, mean over voxels). Throws InvalidTarget unless y is
/// exactly one-hot.
double ce_loss(const ProbField& p, const ProbField& y_onehot);
std::vector<double> ce_loss_grad(const ProbField& p, const ProbField& y_onehot);
std::vector<double> ce_loss_curvature(const ProbField& p, const ProbField& y_onehot);

struct DiceOptions {
    bool include_background = false; ///< include class 0 in the average
    double smooth = 1e-5;
};

struct DiceResult {
    double value = 0.0;
    std::vector<double> d_p; ///< analytic gradient w.r.t. p
};

/// Squared-denominator soft Dice loss averaged over foreground classes:
///   L_c = 1 - (2*sum(p*t) + s) / (sum(p^2) + sum(t^2) + s).
/// target holds per voxel-class weights (one-hot or soft), same layout
/// as p.
DiceResult dice_loss(const ProbField& p, const std::vector<double>& target,
                     const DiceOptions& opts = {});

/// Backpropagates a gradient w.r.t. probabilities through the softmax:
/// dL/dz_k = p_k * (g_k - sum_c g_c p_c) per voxel.
std::vector<double> softmax_backward(const ProbField& p, const std::vector<double>& d_p);

// --- combined curriculum objective ---

struct LossBreakdown {
    double total = 0.0;
    double dice = 0.0;
    double fuzzy = 0.0;
    double lambda = 0.0;
    std::optional<ScalarField> per_voxel_fuzzy;
};

struct TotalLossOptions {
    DiceOptions dice;
    double dice_weight = 1.0;      ///< 0 removes the Dice branch entirely
    bool want_per_voxel = false;
    bool want_branch_grads = false;
};

struct TotalLossResult {
    LossBreakdown breakdown;
    ProbField p;                      ///< softmax(z), reused by diagnostics
    std::vector<double> d_logits;     ///< gradient of breakdown.total
    double d_raw1 = 0.0;              ///< lambda-scaled raw rho gradients
    double d_raw2 = 0.0;
    std::vector<double> d_logits_dice;  ///< branch gradients w.r.t. z,
    std::vector<double> d_logits_fuzzy; ///< unscaled (filled on request)
};

/// total = dice_weight * Dice(p, dice_target) + lambda * Fuzzy(p, mu).
/// lambda scales only the fuzzy branch, including the rho gradients;
/// Dice never touches rho.
TotalLossResult total_loss(const LogitField& z, const ProbField& mu,
                           const std::vector<double>& dice_target, const RhoPair& rho,
                           double lambda, const TotalLossOptions& opts = {});

} // namespace ifl
