// SPDX-License-Identifier: Apache-2.0

#include "ifl/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ifl {

RhoPair RhoPair::from_values(double rho1, double rho2) {
    if (!(rho1 > 0.0 && rho1 < 1.0) || !(rho2 > 0.0 && rho2 < 1.0))
        throw InvalidParameter("rho values must lie strictly inside (0,1)");
    return {logit(rho1), logit(rho2)};
}

ProbField softmax_field(const LogitField& z) {
    for (double v : z.data)
        if (!std::isfinite(v)) throw NonFiniteInput("softmax_field: non-finite logit");

    ProbField p;
    p.dims = z.dims;
    p.num_classes = z.num_classes;
    p.data.resize(z.data.size());
    const size_t n = z.dims.voxels();
    const int C = z.num_classes;
    parallel_for(n, [&](size_t b, size_t e) {
        for (size_t v = b; v < e; ++v) {
            const size_t base = v * size_t(C);
            double m = z.data[base];
            for (int c = 1; c < C; ++c) m = std::max(m, z.data[base + c]);
            double sum = 0.0;
            for (int c = 0; c < C; ++c) {
                const double ec = std::exp(z.data[base + c] - m);
                p.data[base + c] = ec;
                sum += ec;
            }
            for (int c = 0; c < C; ++c) p.data[base + c] /= sum;
        }
    });
    return p;
}

ProbField one_hot(const LabelVolume& labels) {
    labels.validate();
    ProbField y;
    y.dims = labels.dims;
    y.num_classes = labels.num_classes;
    y.data.assign(labels.dims.voxels() * size_t(labels.num_classes), 0.0);
    for (size_t v = 0; v < labels.data.size(); ++v)
        y.data[y.index(v, labels.data[v])] = 1.0;
    return y;
}

namespace {

void check_same_shape(const ProbField& a, const ProbField& b, const char* what) {
    if (a.dims != b.dims || a.num_classes != b.num_classes || a.data.size() != b.data.size())
        throw ShapeMismatch(std::string(what) + ": field shapes differ");
}

void check_target_size(const ProbField& p, size_t target_size, const char* what) {
    if (p.data.size() != target_size)
        throw ShapeMismatch(std::string(what) + ": target length " + std::to_string(target_size) +
                            " does not match field length " + std::to_string(p.data.size()));
}

void check_one_hot(const ProbField& y) {
    const size_t n = y.dims.voxels();
    for (size_t v = 0; v < n; ++v) {
        int ones = 0;
        for (int c = 0; c < y.num_classes; ++c) {
            const double t = y.at(v, c);
            if (t == 1.0)
                ++ones;
            else if (t != 0.0)
                throw InvalidTarget("cross-entropy target is not one-hot at voxel " +
                                    std::to_string(v));
        }
        if (ones != 1)
            throw InvalidTarget("cross-entropy target row does not sum to one at voxel " +
                                std::to_string(v));
    }
}

} // namespace

FuzzyLossResult fuzzy_loss(const ProbField& p, const ProbField& mu, const RhoPair& rho) {
    check_same_shape(p, mu, "fuzzy_loss");
    const double r1 = rho.rho1(), r2 = rho.rho2();
    const size_t n = p.dims.voxels();
    const int C = p.num_classes;

    FuzzyLossResult out;
    out.per_voxel.dims = p.dims;
    out.per_voxel.data.resize(n);
    parallel_for(n, [&](size_t b, size_t e) {
        for (size_t v = b; v < e; ++v) {
            double s = 0.0;
            const size_t base = v * size_t(C);
            for (int c = 0; c < C; ++c)
                s += fuzzy_term(p.data[base + c], mu.data[base + c], r1, r2);
            out.per_voxel.data[v] = s;
        }
    });
    out.value = parallel_sum(n, [&](size_t v) { return out.per_voxel.data[v]; }) / double(n);
    return out;
}

std::vector<double> fuzzy_loss_grad_p(const ProbField& p, const ProbField& mu,
                                      const RhoPair& rho) {
    check_same_shape(p, mu, "fuzzy_loss_grad_p");
    const double r2 = rho.rho2();
    const double inv_n = 1.0 / double(p.dims.voxels());
    std::vector<double> g(p.data.size());
    parallel_for(g.size(), [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i)
            g[i] = fuzzy_term_grad_p(p.data[i], mu.data[i], r2) * inv_n;
    });
    return g;
}

std::vector<double> fuzzy_loss_curvature(const ProbField& p, const ProbField& mu,
                                         const RhoPair& rho) {
    check_same_shape(p, mu, "fuzzy_loss_curvature");
    const double r2 = rho.rho2();
    const double inv_n = 1.0 / double(p.dims.voxels());
    std::vector<double> h(p.data.size());
    parallel_for(h.size(), [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i)
            h[i] = fuzzy_term_curvature(p.data[i], mu.data[i], r2) * inv_n;
    });
    return h;
}

RhoGrads fuzzy_loss_grad_rho(const ProbField& p, const ProbField& mu, const RhoPair& rho) {
    check_same_shape(p, mu, "fuzzy_loss_grad_rho");
    const double r1 = rho.rho1(), r2 = rho.rho2();
    const size_t total = p.data.size();
    const double inv_n = 1.0 / double(p.dims.voxels());

    RhoGrads g;
    g.d_rho1 =
        parallel_sum(total, [&](size_t i) { return fuzzy_term_grad_rho1(mu.data[i], r1, r2); }) *
        inv_n;
    g.d_rho2 = parallel_sum(total, [&](size_t i) {
                   return fuzzy_term_grad_rho2(p.data[i], mu.data[i], r1);
               }) *
               inv_n;
    g.d_raw1 = g.d_rho1 * sigmoid_derivative(r1);
    g.d_raw2 = g.d_rho2 * sigmoid_derivative(r2);
    return g;
}

double ce_loss(const ProbField& p, const ProbField& y) {
    check_same_shape(p, y, "ce_loss");
    check_one_hot(y);
    const double sum =
        parallel_sum(p.data.size(), [&](size_t i) { return ce_term(p.data[i], y.data[i]); });
    return sum / double(p.dims.voxels());
}

std::vector<double> ce_loss_grad(const ProbField& p, const ProbField& y) {
    check_same_shape(p, y, "ce_loss_grad");
    check_one_hot(y);
    const double inv_n = 1.0 / double(p.dims.voxels());
    std::vector<double> g(p.data.size());
    for (size_t i = 0; i < g.size(); ++i) g[i] = ce_term_grad(p.data[i], y.data[i]) * inv_n;
    return g;
}

std::vector<double> ce_loss_curvature(const ProbField& p, const ProbField& y) {
    check_same_shape(p, y, "ce_loss_curvature");
    check_one_hot(y);
    const double inv_n = 1.0 / double(p.dims.voxels());
    std::vector<double> h(p.data.size());
    for (size_t i = 0; i < h.size(); ++i) h[i] = ce_term_curvature(p.data[i], y.data[i]) * inv_n;
    return h;
}

DiceResult dice_loss(const ProbField& p, const std::vector<double>& target,
                     const DiceOptions& opts) {
    check_target_size(p, target.size(), "dice_loss");
    const int C = p.num_classes;
    const int c0 = opts.include_background ? 0 : 1;
    if (c0 >= C)
        throw InvalidParameter("dice_loss: no foreground classes to average over");
    const size_t n = p.dims.voxels();
    const double s = opts.smooth;

    DiceResult out;
    out.d_p.assign(p.data.size(), 0.0);
    const double inv_k = 1.0 / double(C - c0);
    for (int c = c0; c < C; ++c) {
        const double inter = parallel_sum(n, [&](size_t v) {
            const size_t i = v * size_t(C) + size_t(c);
            return p.data[i] * target[i];
        });
        const double psq = parallel_sum(n, [&](size_t v) {
            const size_t i = v * size_t(C) + size_t(c);
            return p.data[i] * p.data[i];
        });
        const double tsq = parallel_sum(n, [&](size_t v) {
            const size_t i = v * size_t(C) + size_t(c);
            return target[i] * target[i];
        });
        const double num = 2.0 * inter + s;
        const double den = psq + tsq + s;
        out.value += (1.0 - num / den) * inv_k;
        const double scale = 2.0 * inv_k / (den * den);
        parallel_for(n, [&](size_t b, size_t e) {
            for (size_t v = b; v < e; ++v) {
                const size_t i = v * size_t(C) + size_t(c);
                out.d_p[i] = scale * (p.data[i] * num - target[i] * den);
            }
        });
    }
    return out;
}

std::vector<double> softmax_backward(const ProbField& p, const std::vector<double>& d_p) {
    if (d_p.size() != p.data.size())
        throw ShapeMismatch("softmax_backward: gradient length mismatch");
    const size_t n = p.dims.voxels();
    const int C = p.num_classes;
    std::vector<double> dz(d_p.size());
    parallel_for(n, [&](size_t b, size_t e) {
        for (size_t v = b; v < e; ++v) {
            const size_t base = v * size_t(C);
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += d_p[base + c] * p.data[base + c];
            for (int c = 0; c < C; ++c)
                dz[base + c] = p.data[base + c] * (d_p[base + c] - dot);
        }
    });
    return dz;
}

TotalLossResult total_loss(const LogitField& z, const ProbField& mu,
                           const std::vector<double>& dice_target, const RhoPair& rho,
                           double lambda, const TotalLossOptions& opts) {
    if (lambda < 0.0) throw InvalidParameter("lambda must be >= 0");

    TotalLossResult out;
    out.p = softmax_field(z);

    DiceResult dice = dice_loss(out.p, dice_target, opts.dice);
    FuzzyLossResult fz = fuzzy_loss(out.p, mu, rho);
    std::vector<double> fz_dp = fuzzy_loss_grad_p(out.p, mu, rho);
    RhoGrads rho_g = fuzzy_loss_grad_rho(out.p, mu, rho);

    out.breakdown.dice = dice.value;
    out.breakdown.fuzzy = fz.value;
    out.breakdown.lambda = lambda;
    out.breakdown.total = opts.dice_weight * dice.value + lambda * fz.value;
    if (opts.want_per_voxel) out.breakdown.per_voxel_fuzzy = std::move(fz.per_voxel);

    std::vector<double> dp_total(fz_dp.size());
    for (size_t i = 0; i < dp_total.size(); ++i)
        dp_total[i] = opts.dice_weight * dice.d_p[i] + lambda * fz_dp[i];
    out.d_logits = softmax_backward(out.p, dp_total);
    out.d_raw1 = lambda * rho_g.d_raw1;
    out.d_raw2 = lambda * rho_g.d_raw2;

    if (opts.want_branch_grads) {
        out.d_logits_dice = softmax_backward(out.p, dice.d_p);
        out.d_logits_fuzzy = softmax_backward(out.p, fz_dp);
    }
    return out;
}

} // namespace ifl
