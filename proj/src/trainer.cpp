// SPDX-License-Identifier: Apache-2.0

#include "ifl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace ifl {

void TrainConfig::validate() const {
    if (steps < 1) throw InvalidParameter("steps must be >= 1");
    // lr = 0 is allowed as a diagnostic null-update run
    if (!(learning_rate >= 0.0)) throw InvalidParameter("learning_rate must be >= 0");
    if (record_every < 1) throw InvalidParameter("record_every must be >= 1");
    if (hidden_width < 1) throw InvalidParameter("hidden_width must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0)
        throw InvalidParameter("momentum must lie in [0,1)");
    if (!(rho_init1 > 0.0 && rho_init1 < 1.0) || !(rho_init2 > 0.0 && rho_init2 < 1.0))
        throw InvalidParameter("rho inits must lie strictly inside (0,1)");
}

// --- trajectory CSV ---

std::string TrainingTrajectory::to_csv() const {
    std::ostringstream out;
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "t,lambda,rho1,rho2,loss_total,loss_dice,loss_fuzzy,grad_cos";
    const size_t k = rows.empty() ? size_t(std::max(0, num_classes - 1))
                                  : rows.front().dice_per_class.size();
    for (size_t c = 1; c <= k; ++c) out << ",dice_c" << c;
    out << ",mean_uncertainty\n";
    for (const TrajectoryRow& r : rows) {
        out << r.t << ',' << format_g17(r.lambda) << ',' << format_g17(r.rho1) << ','
            << format_g17(r.rho2) << ',' << format_g17(r.loss_total) << ','
            << format_g17(r.loss_dice) << ',' << format_g17(r.loss_fuzzy) << ','
            << format_g17(r.grad_cos);
        for (double d : r.dice_per_class) out << ',' << format_g17(d);
        out << ',' << format_g17(r.mean_uncertainty) << "\n";
    }
    return out.str();
}

TrainingTrajectory TrainingTrajectory::from_csv(const std::string& text) {
    TrainingTrajectory traj;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    size_t k = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# config_hash=", 0) == 0) {
            traj.config_hash = line.substr(14);
            continue;
        }
        if (line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!saw_header) {
            if (cells.size() < 9 || cells[0] != "t")
                throw ParseError("unrecognized trajectory CSV header");
            k = cells.size() - 9;
            traj.num_classes = int(k) + 1;
            saw_header = true;
            continue;
        }
        if (cells.size() != 9 + k)
            throw ParseError("trajectory row has wrong column count");
        TrajectoryRow r;
        r.t = std::stoll(cells[0]);
        r.lambda = std::stod(cells[1]);
        r.rho1 = std::stod(cells[2]);
        r.rho2 = std::stod(cells[3]);
        r.loss_total = std::stod(cells[4]);
        r.loss_dice = std::stod(cells[5]);
        r.loss_fuzzy = std::stod(cells[6]);
        r.grad_cos = std::stod(cells[7]);
        for (size_t c = 0; c < k; ++c) r.dice_per_class.push_back(std::stod(cells[8 + c]));
        r.mean_uncertainty = std::stod(cells[8 + k]);
        traj.rows.push_back(std::move(r));
    }
    if (!saw_header) throw ParseError("trajectory CSV has no header line");
    return traj;
}

// --- small analysis operations ---

double grad_cosine(std::span<const double> g1, std::span<const double> g2) {
    if (g1.size() != g2.size())
        throw ShapeMismatch("grad_cosine: gradient lengths differ");
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (size_t i = 0; i < g1.size(); ++i) {
        dot += g1[i] * g2[i];
        n1 += g1[i] * g1[i];
        n2 += g2[i] * g2[i];
    }
    if (n1 == 0.0 || n2 == 0.0) return 0.0;
    return dot / (std::sqrt(n1) * std::sqrt(n2));
}

ScalarField uncertainty_map(const ProbField& p) {
    ScalarField u;
    u.dims = p.dims;
    const size_t n = p.dims.voxels();
    u.data.resize(n);
    for (size_t v = 0; v < n; ++v) {
        double top = 0.0;
        for (int c = 0; c < p.num_classes; ++c) top = std::max(top, p.at(v, c));
        u.data[v] = 1.0 - top;
    }
    return u;
}

LabelVolume argmax_labels(const ProbField& p) {
    LabelVolume out;
    out.dims = p.dims;
    out.num_classes = p.num_classes;
    const size_t n = p.dims.voxels();
    out.data.resize(n);
    for (size_t v = 0; v < n; ++v) {
        int best = 0;
        double top = p.at(v, 0);
        for (int c = 1; c < p.num_classes; ++c)
            if (p.at(v, c) > top) {
                top = p.at(v, c);
                best = c;
            }
        out.data[v] = uint8_t(best);
    }
    return out;
}

std::vector<ParetoPoint> pareto_trace(const TrainingTrajectory& traj) {
    if (traj.rows.empty()) throw InsufficientData("pareto_trace: empty trajectory");
    std::vector<ParetoPoint> pts;
    pts.reserve(traj.rows.size());
    for (const TrajectoryRow& r : traj.rows)
        pts.push_back({r.t, r.loss_dice, r.loss_fuzzy});
    return pts;
}

StabilityMetrics stability_metrics(const TrainingTrajectory& traj) {
    const size_t n = traj.rows.size();
    if (n < 20)
        throw InsufficientData("stability_metrics needs >= 20 recorded rows, got " +
                               std::to_string(n));
    StabilityMetrics m;
    const size_t tail_begin = n / 2;
    double mean = 0.0;
    for (size_t i = tail_begin; i < n; ++i) mean += traj.rows[i].loss_total;
    const double tail_n = double(n - tail_begin);
    mean /= tail_n;
    for (size_t i = tail_begin; i < n; ++i) {
        const double d = traj.rows[i].loss_total - mean;
        m.loss_variance_tail += d * d;
    }
    m.loss_variance_tail /= tail_n;
    for (size_t i = 1; i < n; ++i)
        m.max_step_jump = std::max(
            m.max_step_jump, std::fabs(traj.rows[i].loss_total - traj.rows[i - 1].loss_total));
    return m;
}

double dice_score(const LabelVolume& pred, const LabelVolume& truth, int cls) {
    if (pred.dims != truth.dims)
        throw ShapeMismatch("dice_score: volume shapes differ");
    size_t p = 0, t = 0, both = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool in_p = pred.data[i] == cls;
        const bool in_t = truth.data[i] == cls;
        p += in_p;
        t += in_t;
        both += in_p && in_t;
    }
    if (p + t == 0) return 1.0;
    return 2.0 * double(both) / double(p + t);
}

double linear_trend(std::span<const double> ys) {
    const size_t n = ys.size();
    if (n < 2) throw InsufficientData("linear_trend needs at least two samples");
    const double mean_x = double(n - 1) / 2.0;
    double mean_y = 0.0;
    for (double y : ys) mean_y += y;
    mean_y /= double(n);
    double sxy = 0.0, sxx = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = double(i) - mean_x;
        sxy += dx * (ys[i] - mean_y);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

// --- tiny conv model ---

namespace {
constexpr int kKernel = 27; // 3x3x3 offsets, C-order (dz, dy, dx)
}

TinyConvModel::TinyConvModel(Dims dims, int hidden, int num_classes, uint64_t seed)
    : dims_(dims), hidden_(hidden), classes_(num_classes) {
    if (hidden < 1 || num_classes < 2)
        throw InvalidParameter("TinyConvModel needs hidden >= 1 and classes >= 2");
    params_.assign(b2_off() + size_t(classes_), 0.0);
    SeededRng rng(seed);
    const double s1 = std::sqrt(2.0 / kKernel);
    for (size_t i = 0; i < size_t(hidden_) * kKernel; ++i)
        params_[w1_off() + i] = s1 * rng.normal();
    const double s2 = std::sqrt(2.0 / (kKernel * double(hidden_)));
    for (size_t i = 0; i < size_t(classes_) * size_t(hidden_) * kKernel; ++i)
        params_[w2_off() + i] = s2 * rng.normal();
}

LogitField TinyConvModel::forward(const ScalarField& input) {
    if (input.dims != dims_)
        throw ShapeMismatch("TinyConvModel: input dims differ from model dims");
    const size_t n = dims_.voxels();
    input_ = input.data;
    pre_act_.assign(size_t(hidden_) * n, 0.0);
    hidden_act_.assign(size_t(hidden_) * n, 0.0);

    const double* w1 = params_.data() + w1_off();
    const double* b1 = params_.data() + b1_off();
    for (int k = 0; k < hidden_; ++k) {
        double* z1 = pre_act_.data() + size_t(k) * n;
        double* h1 = hidden_act_.data() + size_t(k) * n;
        const double* wk = w1 + size_t(k) * kKernel;
        for (int z = 0; z < dims_.d; ++z)
            for (int y = 0; y < dims_.h; ++y)
                for (int x = 0; x < dims_.w; ++x) {
                    double acc = b1[k];
                    int off = 0;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx, ++off) {
                                const int nz = z + dz, ny = y + dy, nx = x + dx;
                                if (!dims_.contains(nz, ny, nx)) continue;
                                acc += wk[off] * input_[dims_.index(nz, ny, nx)];
                            }
                    const size_t v = dims_.index(z, y, x);
                    z1[v] = acc;
                    h1[v] = acc > 0.0 ? acc : 0.0;
                }
    }

    LogitField out;
    out.dims = dims_;
    out.num_classes = classes_;
    out.data.assign(n * size_t(classes_), 0.0);
    const double* w2 = params_.data() + w2_off();
    const double* b2 = params_.data() + b2_off();
    for (int c = 0; c < classes_; ++c) {
        for (int k = 0; k < hidden_; ++k) {
            const double* h1 = hidden_act_.data() + size_t(k) * n;
            const double* wck = w2 + (size_t(c) * size_t(hidden_) + size_t(k)) * kKernel;
            for (int z = 0; z < dims_.d; ++z)
                for (int y = 0; y < dims_.h; ++y)
                    for (int x = 0; x < dims_.w; ++x) {
                        double acc = 0.0;
                        int off = 0;
                        for (int dz = -1; dz <= 1; ++dz)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx, ++off) {
                                    const int nz = z + dz, ny = y + dy, nx = x + dx;
                                    if (!dims_.contains(nz, ny, nx)) continue;
                                    acc += wck[off] * h1[dims_.index(nz, ny, nx)];
                                }
                        out.data[dims_.index(z, y, x) * size_t(classes_) + size_t(c)] += acc;
                    }
        }
        for (size_t v = 0; v < n; ++v)
            out.data[v * size_t(classes_) + size_t(c)] += b2[c];
    }
    return out;
}

std::vector<double> TinyConvModel::backward(const std::vector<double>& d_logits) const {
    const size_t n = dims_.voxels();
    if (d_logits.size() != n * size_t(classes_))
        throw ShapeMismatch("TinyConvModel::backward: gradient length mismatch");
    if (input_.size() != n)
        throw InvalidParameter("TinyConvModel::backward called before forward");

    std::vector<double> grad(params_.size(), 0.0);
    double* dW2 = grad.data() + w2_off();
    double* dB2 = grad.data() + b2_off();
    const double* w2 = params_.data() + w2_off();

    std::vector<double> d_hidden(size_t(hidden_) * n, 0.0);

    for (int c = 0; c < classes_; ++c) {
        // db2: plain sum of logit grads for this class
        double acc_b = 0.0;
        for (size_t v = 0; v < n; ++v) acc_b += d_logits[v * size_t(classes_) + size_t(c)];
        dB2[c] = acc_b;

        for (int k = 0; k < hidden_; ++k) {
            const double* h1 = hidden_act_.data() + size_t(k) * n;
            double* dh1 = d_hidden.data() + size_t(k) * n;
            double* dwck = dW2 + (size_t(c) * size_t(hidden_) + size_t(k)) * kKernel;
            const double* wck = w2 + (size_t(c) * size_t(hidden_) + size_t(k)) * kKernel;
            for (int z = 0; z < dims_.d; ++z)
                for (int y = 0; y < dims_.h; ++y)
                    for (int x = 0; x < dims_.w; ++x) {
                        const double g =
                            d_logits[dims_.index(z, y, x) * size_t(classes_) + size_t(c)];
                        if (g == 0.0) continue;
                        int off = 0;
                        for (int dz = -1; dz <= 1; ++dz)
                            for (int dy = -1; dy <= 1; ++dy)
                                for (int dx = -1; dx <= 1; ++dx, ++off) {
                                    const int nz = z + dz, ny = y + dy, nx = x + dx;
                                    if (!dims_.contains(nz, ny, nx)) continue;
                                    const size_t nv = dims_.index(nz, ny, nx);
                                    dwck[off] += g * h1[nv];
                                    dh1[nv] += g * wck[off];
                                }
                    }
        }
    }

    double* dW1 = grad.data() + w1_off();
    double* dB1 = grad.data() + b1_off();
    for (int k = 0; k < hidden_; ++k) {
        const double* z1 = pre_act_.data() + size_t(k) * n;
        const double* dh1 = d_hidden.data() + size_t(k) * n;
        double* dwk = dW1 + size_t(k) * kKernel;
        double acc_b = 0.0;
        for (int z = 0; z < dims_.d; ++z)
            for (int y = 0; y < dims_.h; ++y)
                for (int x = 0; x < dims_.w; ++x) {
                    const size_t v = dims_.index(z, y, x);
                    if (z1[v] <= 0.0) continue; // ReLU gate
                    const double g = dh1[v];
                    if (g == 0.0) continue;
                    acc_b += g;
                    int off = 0;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx, ++off) {
                                const int nz = z + dz, ny = y + dy, nx = x + dx;
                                if (!dims_.contains(nz, ny, nx)) continue;
                                dwk[off] += g * input_[dims_.index(nz, ny, nx)];
                            }
                }
        dB1[k] = acc_b;
    }
    return grad;
}

// --- training loop ---

namespace {

struct ModelState {
    ModelKind kind;
    LogitField logits; // the parameters themselves for PerVoxel
    std::unique_ptr<TinyConvModel> conv;
    const ScalarField* input = nullptr;
    std::vector<double> velocity;

    LogitField forward() {
        if (kind == ModelKind::PerVoxel) return logits;
        return conv->forward(*input);
    }

    std::vector<double> param_grad(const std::vector<double>& d_logits) const {
        if (kind == ModelKind::PerVoxel) return d_logits;
        return conv->backward(d_logits);
    }

    void step(const std::vector<double>& d_logits, double lr, double momentum) {
        std::vector<double>& p =
            kind == ModelKind::PerVoxel ? logits.data : conv->params();
        std::vector<double> g = param_grad(d_logits);
        if (momentum > 0.0) {
            if (velocity.empty()) velocity.assign(p.size(), 0.0);
            for (size_t i = 0; i < p.size(); ++i) {
                velocity[i] = momentum * velocity[i] + g[i];
                p[i] -= lr * velocity[i];
            }
        } else {
            for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
        }
    }
};

} // namespace

TrainResult train(const TrainData& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.labels == nullptr || data.fuzzy == nullptr)
        throw InvalidParameter("train: labels and fuzzy volumes are required");
    const LabelVolume& labels = *data.labels;
    const FuzzyLabelVolume& fuzzy = *data.fuzzy;
    if (labels.dims != fuzzy.dims || labels.num_classes != fuzzy.num_classes)
        throw ShapeMismatch("train: labels and fuzzy volume shapes differ");
    const LabelVolume& eval = data.eval_labels ? *data.eval_labels : labels;
    if (eval.dims != labels.dims)
        throw ShapeMismatch("train: eval labels shape differs");
    if (cfg.model == ModelKind::TinyConv) {
        if (data.intensity == nullptr)
            throw InvalidParameter("train: tiny-conv model requires an intensity field");
        if (data.intensity->dims != labels.dims)
            throw ShapeMismatch("train: intensity shape differs");
    }

    const int C = labels.num_classes;
    const ProbField mu = fuzzy.membership_field();
    const std::vector<double> dice_target =
        cfg.dice_soft_target ? mu.data : one_hot(labels).data;

    ModelState model;
    model.kind = cfg.model;
    if (cfg.model == ModelKind::PerVoxel) {
        model.logits.dims = labels.dims;
        model.logits.num_classes = C;
        model.logits.data.assign(labels.dims.voxels() * size_t(C), 0.0);
    } else {
        model.conv =
            std::make_unique<TinyConvModel>(labels.dims, cfg.hidden_width, C, cfg.seed);
        model.input = data.intensity;
    }

    RhoPair rho = make_rho(cfg.rho_init1, cfg.rho_init2);
    double rho_vel1 = 0.0, rho_vel2 = 0.0;

    TotalLossOptions opts;
    opts.dice.include_background = cfg.dice_include_background;
    opts.dice_weight = cfg.dice_weight;
    opts.want_branch_grads = true;

    TrainResult result;
    result.trajectory.num_classes = C;
    result.trajectory.seed = cfg.seed;

    double last_finite = std::numeric_limits<double>::quiet_NaN();
    LogitField z;
    for (int64_t t = 0; t < cfg.steps; ++t) {
        const double lambda = lambda_at(cfg.schedule, t);
        z = model.forward();

        TotalLossResult res;
        try {
            res = total_loss(z, mu, dice_target, rho, lambda, opts);
        } catch (const NonFiniteInput&) {
            throw DivergenceError("training diverged: non-finite logits at step " +
                                      std::to_string(t),
                                  long(t), last_finite);
        }
        if (!std::isfinite(res.breakdown.total))
            throw DivergenceError("training diverged: non-finite loss at step " +
                                      std::to_string(t),
                                  long(t), last_finite);
        last_finite = res.breakdown.total;

        if (t % cfg.record_every == 0 || t == cfg.steps - 1) {
            TrajectoryRow row;
            row.t = t;
            row.lambda = lambda;
            row.rho1 = rho.rho1();
            row.rho2 = rho.rho2();
            row.loss_total = res.breakdown.total;
            row.loss_dice = res.breakdown.dice;
            row.loss_fuzzy = res.breakdown.fuzzy;
            const std::vector<double> g_fuzzy = model.param_grad(res.d_logits_fuzzy);
            const std::vector<double> g_dice = model.param_grad(res.d_logits_dice);
            row.grad_cos = grad_cosine(g_fuzzy, g_dice);
            const LabelVolume pred = argmax_labels(res.p);
            for (int c = 1; c < C; ++c)
                row.dice_per_class.push_back(dice_score(pred, eval, c));
            const ScalarField u = uncertainty_map(res.p);
            double mean_u = 0.0;
            for (double v : u.data) mean_u += v;
            row.mean_uncertainty = mean_u / double(u.data.size());
            result.trajectory.rows.push_back(std::move(row));
        }

        model.step(res.d_logits, cfg.learning_rate, cfg.momentum);
        if (cfg.momentum > 0.0) {
            rho_vel1 = cfg.momentum * rho_vel1 + res.d_raw1;
            rho_vel2 = cfg.momentum * rho_vel2 + res.d_raw2;
            rho.raw1 -= cfg.learning_rate * rho_vel1;
            rho.raw2 -= cfg.learning_rate * rho_vel2;
        } else {
            rho.raw1 -= cfg.learning_rate * res.d_raw1;
            rho.raw2 -= cfg.learning_rate * res.d_raw2;
        }
    }

    result.logits = model.forward();
    result.rho = rho;
    if (cfg.model == ModelKind::TinyConv) result.conv_params = model.conv->params();
    return result;
}

} // namespace ifl
