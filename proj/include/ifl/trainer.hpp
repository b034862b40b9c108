// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale gradient-descent training of the curriculum objective
//   L(theta, t) = L_Dice(theta) + lambda(t) * L_fuzzy(theta, rho1, rho2)
// as the literal discretization of theta'(t) = -grad L(theta, t),
// jointly updating theta and the raw (pre-sigmoid) rho parameters.
// The default model is the per-voxel logit field itself; a tiny 3D
// conv net exercises the non-separable case for the gradient
// interaction analysis.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "ifl/curriculum.hpp"
#include "ifl/fuzzy_label.hpp"
#include "ifl/losses.hpp"
#include "ifl/synth.hpp"

namespace ifl {

enum class ModelKind { PerVoxel, TinyConv };

struct TrainConfig {
    int64_t steps = 2000;
    double learning_rate = 0.5;
    CurriculumSchedule schedule; ///< default: exponential reaching 0.01 at `steps`
    double rho_init1 = 0.5;
    double rho_init2 = 0.5;
    ModelKind model = ModelKind::PerVoxel;
    int hidden_width = 4;  ///< tiny-conv hidden channels
    uint64_t seed = 42;
    bool dice_soft_target = false; ///< use mu instead of one-hot labels
    bool dice_include_background = false;
    double dice_weight = 1.0;
    double momentum = 0.0; ///< 0 = plain gradient descent (the verified mode)
    int64_t record_every = 1;

    TrainConfig() { schedule = CurriculumSchedule::default_exponential(steps); }
    void validate() const;
};

struct TrajectoryRow {
    int64_t t = 0;
    double lambda = 0.0;
    double rho1 = 0.0;
    double rho2 = 0.0;
    double loss_total = 0.0;
    double loss_dice = 0.0;
    double loss_fuzzy = 0.0;
    double grad_cos = 0.0; ///< cos(grad_theta L_fuzzy, grad_theta L_Dice)
    std::vector<double> dice_per_class; ///< foreground classes vs eval labels
    double mean_uncertainty = 0.0;
};

struct TrainingTrajectory {
    std::vector<TrajectoryRow> rows;
    int num_classes = 0;
    uint64_t seed = 0;
    std::string config_hash;

    /// CSV with header t,lambda,rho1,rho2,loss_total,loss_dice,
    /// loss_fuzzy,grad_cos,dice_c1..dice_cK,mean_uncertainty; floats at
    /// 17 significant digits. A `# config_hash=` comment line leads
    /// when the hash is set.
    std::string to_csv() const;
    static TrainingTrajectory from_csv(const std::string& text);
};

struct TrainData {
    const ScalarField* intensity = nullptr;   ///< required for tiny-conv
    const LabelVolume* labels = nullptr;      ///< Dice supervision targets
    const FuzzyLabelVolume* fuzzy = nullptr;  ///< fuzzy membership targets
    const LabelVolume* eval_labels = nullptr; ///< Dice-score reference; defaults to labels
};

struct TrainResult {
    LogitField logits; ///< final logits (model output for tiny-conv)
    RhoPair rho;
    TrainingTrajectory trajectory;
    std::vector<double> conv_params; ///< tiny-conv parameters, empty otherwise
};

/// Runs `cfg.steps` gradient-descent steps. Deterministic given
/// (seed, config, inputs). Rows are recorded before the update at every
/// record_every-th step and at the final step. Throws DivergenceError
/// when the total loss stops being finite.
TrainResult train(const TrainData& data, const TrainConfig& cfg);

/// Cosine similarity of two flat gradients; 0 by convention when either
/// norm vanishes. Throws ShapeMismatch on length disagreement.
double grad_cosine(std::span<const double> g1, std::span<const double> g2);

/// Per-voxel predictive ambiguity u(x) = 1 - max_c p_c(x), in
/// [0, 1 - 1/C].
ScalarField uncertainty_map(const ProbField& p);

/// Crisp argmax labels (ties resolved to the lowest class index).
LabelVolume argmax_labels(const ProbField& p);

struct ParetoPoint {
    int64_t t = 0;
    double loss_dice = 0.0;
    double loss_fuzzy = 0.0;
};

/// Objective-space projection of the trajectory.
std::vector<ParetoPoint> pareto_trace(const TrainingTrajectory& traj);

struct StabilityMetrics {
    double loss_variance_tail = 0.0; ///< variance of loss_total over the last half
    double max_step_jump = 0.0;      ///< max |loss_total(i+1) - loss_total(i)|
};

/// Requires at least 20 recorded rows (InsufficientData otherwise).
StabilityMetrics stability_metrics(const TrainingTrajectory& traj);

/// Hard overlap 2|P and T| / (|P| + |T|) for one class; 1.0 when both
/// masks are empty.
double dice_score(const LabelVolume& pred, const LabelVolume& truth, int cls);

/// Least-squares slope of ys against their indices.
double linear_trend(std::span<const double> ys);

/// Two 3x3x3 conv layers (1 -> hidden -> classes) with ReLU between,
/// zero padding, seeded He-style init. Parameter count is fixed by
/// (hidden, classes): hidden*27 + hidden + classes*hidden*27 + classes.
class TinyConvModel {
public:
    TinyConvModel(Dims dims, int hidden, int num_classes, uint64_t seed);

    size_t param_count() const { return params_.size(); }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& params() { return params_; }

    /// Forward pass; caches activations for backward().
    LogitField forward(const ScalarField& input);

    /// Gradient of a scalar loss w.r.t. all parameters, given its
    /// gradient w.r.t. the logits of the last forward() call.
    std::vector<double> backward(const std::vector<double>& d_logits) const;

private:
    Dims dims_;
    int hidden_;
    int classes_;
    std::vector<double> params_;
    // caches from the last forward pass
    std::vector<double> input_;
    std::vector<double> pre_act_;  // hidden pre-activations, channel-major
    std::vector<double> hidden_act_;

    size_t w1_off() const { return 0; }
    size_t b1_off() const { return size_t(hidden_) * 27; }
    size_t w2_off() const { return b1_off() + size_t(hidden_); }
    size_t b2_off() const { return w2_off() + size_t(classes_) * size_t(hidden_) * 27; }
};

} // namespace ifl
