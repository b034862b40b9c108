// SPDX-License-Identifier: Apache-2.0

#include "ifl/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "ifl/losses.hpp"
#include "ifl/util.hpp"

namespace ifl {

namespace {

constexpr double kTolFirst = 1e-5;
constexpr double kTolSecond = 1e-4;

double rel_err(double analytic, double fd) {
    return std::fabs(analytic - fd) /
           std::max({1.0, std::fabs(analytic), std::fabs(fd)});
}

double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double central_diff2(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

struct Tracker {
    double worst = 0.0;
    void update(double analytic, double fd, double perturb) {
        if (perturb != 0.0) analytic += perturb * (1.0 + std::fabs(analytic));
        worst = std::max(worst, rel_err(analytic, fd));
    }
};

ProbField random_field(SeededRng& rng, const Dims& dims, int classes, double lo, double hi) {
    ProbField f;
    f.dims = dims;
    f.num_classes = classes;
    f.data.resize(dims.voxels() * size_t(classes));
    for (double& v : f.data) v = rng.uniform(lo, hi);
    return f;
}

} // namespace

std::string GradCheckReport::to_text() const {
    std::ostringstream out;
    for (const auto& f : families)
        out << f.name << ": max_rel_err=" << format_g17(f.max_rel_err)
            << " tol=" << format_g17(f.tolerance) << (f.pass ? " PASS" : " FAIL") << "\n";
    out << (all_pass() ? "gradcheck: all families PASS" : "gradcheck: FAILURES present")
        << " (samples=" << samples << ", seed=" << seed << ")\n";
    return out.str();
}

GradCheckReport run_gradient_checks(int samples, uint64_t seed, double perturb) {
    if (samples < 1)
        throw InsufficientData("gradcheck needs at least one sample, got " +
                               std::to_string(samples));
    SeededRng rng(seed);
    const double h1 = 1e-6;
    const double h2 = 1e-4;

    Tracker t_grad_p, t_grad_rho1, t_grad_rho2, t_curv, t_ce_grad, t_ce_curv;

    for (int i = 0; i < samples; ++i) {
        const double p = rng.uniform(0.01, 0.99);
        const double mu = rng.uniform(0.0, 1.0);
        const double r1 = rng.uniform(0.05, 0.95);
        const double r2 = rng.uniform(0.05, 0.95);

        t_grad_p.update(fuzzy_term_grad_p(p, mu, r2),
                        central_diff([&](double q) { return fuzzy_term(q, mu, r1, r2); }, p, h1),
                        perturb);
        t_grad_rho1.update(
            fuzzy_term_grad_rho1(mu, r1, r2),
            central_diff([&](double a) { return fuzzy_term(p, mu, a, r2); }, r1, h1), perturb);
        t_grad_rho2.update(
            fuzzy_term_grad_rho2(p, mu, r1),
            central_diff([&](double b) { return fuzzy_term(p, mu, r1, b); }, r2, h1), perturb);
        t_curv.update(fuzzy_term_curvature(p, mu, r2),
                      central_diff2([&](double q) { return fuzzy_term(q, mu, r1, r2); }, p, h2),
                      perturb);

        const double y = rng.uniform01() < 0.5 ? 0.0 : 1.0;
        t_ce_grad.update(ce_term_grad(p, y),
                         central_diff([&](double q) { return ce_term(q, y); }, p, h1), perturb);
        t_ce_curv.update(ce_term_curvature(p, y),
                         central_diff2([&](double q) { return ce_term(q, y); }, p, h2), perturb);
    }

    // Dice gradient on small random fields
    Tracker t_dice;
    {
        const Dims dims{3, 3, 3};
        const int reps = std::max(1, samples / 40);
        for (int i = 0; i < reps; ++i) {
            const int C = 2 + int(rng.below(2));
            ProbField p = random_field(rng, dims, C, 0.05, 0.95);
            std::vector<double> target(p.data.size());
            for (double& v : target) v = rng.uniform01() < 0.5 ? 0.0 : 1.0;
            DiceResult res = dice_loss(p, target);
            for (size_t j = 0; j < p.data.size(); ++j) {
                const double fd = central_diff(
                    [&](double q) {
                        ProbField pq = p;
                        pq.data[j] = q;
                        return dice_loss(pq, target).value;
                    },
                    p.data[j], h1);
                t_dice.update(res.d_p[j], fd, perturb);
            }
        }
    }

    // Full chain: d(total)/d(logit) and d(total)/d(raw rho)
    Tracker t_chain, t_chain_rho;
    {
        const Dims dims{3, 3, 3};
        const int reps = std::max(1, samples / 40);
        for (int i = 0; i < reps; ++i) {
            const int C = 2 + int(rng.below(2));
            LogitField z;
            z.dims = dims;
            z.num_classes = C;
            z.data.resize(dims.voxels() * size_t(C));
            for (double& v : z.data) v = rng.uniform(-2.0, 2.0);
            ProbField mu = random_field(rng, dims, C, 0.0, 1.0);
            std::vector<double> target(z.data.size(), 0.0);
            for (size_t v = 0; v < dims.voxels(); ++v)
                target[v * size_t(C) + rng.below(uint64_t(C))] = 1.0;
            const RhoPair rho =
                RhoPair::from_values(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
            const double lambda = rng.uniform(0.1, 2.0);

            TotalLossResult res = total_loss(z, mu, target, rho, lambda);
            for (size_t j = 0; j < z.data.size(); ++j) {
                const double fd = central_diff(
                    [&](double q) {
                        LogitField zq = z;
                        zq.data[j] = q;
                        return total_loss(zq, mu, target, rho, lambda).breakdown.total;
                    },
                    z.data[j], h1);
                t_chain.update(res.d_logits[j], fd, perturb);
            }
            const double fd_r1 = central_diff(
                [&](double a) {
                    return total_loss(z, mu, target, RhoPair::from_raw(a, rho.raw2), lambda)
                        .breakdown.total;
                },
                rho.raw1, h1);
            t_chain_rho.update(res.d_raw1, fd_r1, perturb);
            const double fd_r2 = central_diff(
                [&](double b) {
                    return total_loss(z, mu, target, RhoPair::from_raw(rho.raw1, b), lambda)
                        .breakdown.total;
                },
                rho.raw2, h1);
            t_chain_rho.update(res.d_raw2, fd_r2, perturb);
        }
    }

    GradCheckReport report;
    report.samples = samples;
    report.seed = seed;
    auto add = [&](const std::string& name, const Tracker& t, double tol) {
        report.families.push_back({name, t.worst, tol, t.worst <= tol});
    };
    add("fuzzy_grad_p", t_grad_p, kTolFirst);
    add("fuzzy_grad_rho1", t_grad_rho1, kTolFirst);
    add("fuzzy_grad_rho2", t_grad_rho2, kTolFirst);
    add("fuzzy_curvature", t_curv, kTolSecond);
    add("ce_grad", t_ce_grad, kTolFirst);
    add("ce_curvature", t_ce_curv, kTolSecond);
    add("dice_grad", t_dice, kTolFirst);
    add("logit_chain", t_chain, kTolFirst);
    add("rho_raw_chain", t_chain_rho, kTolFirst);
    return report;
}

} // namespace ifl
