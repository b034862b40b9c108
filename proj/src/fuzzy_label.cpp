// SPDX-License-Identifier: Apache-2.0

#include "ifl/fuzzy_label.hpp"

#include <algorithm>

#include "ifl/util.hpp"

namespace ifl {

ProbField compute_membership(const LabelVolume& labels, int radius) {
    labels.validate();
    if (radius < 1)
        throw InvalidParameter("neighborhood radius must be >= 1, got " + std::to_string(radius));
    const Dims& dims = labels.dims;
    if (dims.voxels() == 1)
        throw DegenerateVolume("1x1x1 volume has no neighbors");

    const int C = labels.num_classes;
    ProbField mu;
    mu.dims = dims;
    mu.num_classes = C;
    mu.data.assign(dims.voxels() * size_t(C), 0.0);

    parallel_for(size_t(dims.d), [&](size_t zb, size_t ze) {
        std::vector<int> counts(size_t(C), 0);
        for (int z = int(zb); z < int(ze); ++z)
            for (int y = 0; y < dims.h; ++y)
                for (int x = 0; x < dims.w; ++x) {
                    std::fill(counts.begin(), counts.end(), 0);
                    int in_bounds = 0;
                    for (int dz = -radius; dz <= radius; ++dz)
                        for (int dy = -radius; dy <= radius; ++dy)
                            for (int dx = -radius; dx <= radius; ++dx) {
                                if (dz == 0 && dy == 0 && dx == 0) continue;
                                const int nz = z + dz, ny = y + dy, nx = x + dx;
                                if (!dims.contains(nz, ny, nx)) continue;
                                ++counts[labels.at(nz, ny, nx)];
                                ++in_bounds;
                            }
                    const size_t voxel = dims.index(z, y, x);
                    for (int c = 0; c < C; ++c)
                        mu.data[mu.index(voxel, c)] =
                            double(counts[size_t(c)]) / double(in_bounds);
                }
    });
    return mu;
}

FuzzyLabelVolume fuzzify(const LabelVolume& labels, int radius, double rho2) {
    if (!(rho2 > 0.0 && rho2 <= 1.0))
        throw InvalidParameter("rho2 must lie in (0,1], got " + format_g17(rho2));
    ProbField mu = compute_membership(labels, radius);

    FuzzyLabelVolume out;
    out.dims = labels.dims;
    out.num_classes = labels.num_classes;
    out.neighborhood_radius = radius;
    out.rho2_used = rho2;
    out.mu = std::move(mu.data);
    const size_t n = out.mu.size();
    out.nu.resize(n);
    out.pi.resize(n);
    parallel_for(n, [&](size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
            const double m = out.mu[i];
            out.nu[i] = (1.0 - m) * rho2;
            out.pi[i] = 1.0 - m - out.nu[i];
        }
    });
    return out;
}

ScalarField boundary_mask(const FuzzyLabelVolume& fuzzy, const LabelVolume& labels) {
    if (fuzzy.dims != labels.dims || fuzzy.num_classes != labels.num_classes)
        throw ShapeMismatch("fuzzy volume and label volume shapes differ");
    ScalarField mask;
    mask.dims = fuzzy.dims;
    const size_t n = fuzzy.dims.voxels();
    mask.data.resize(n);
    for (size_t v = 0; v < n; ++v) {
        const double own = fuzzy.mu[fuzzy.index(v, labels.data[v])];
        mask.data[v] = own < 1.0 - 1e-9 ? 1.0 : 0.0;
    }
    return mask;
}

ScalarField boundary_mask(const FuzzyLabelVolume& fuzzy) {
    ScalarField mask;
    mask.dims = fuzzy.dims;
    const size_t n = fuzzy.dims.voxels();
    mask.data.resize(n);
    for (size_t v = 0; v < n; ++v) {
        double top = 0.0;
        for (int c = 0; c < fuzzy.num_classes; ++c)
            top = std::max(top, fuzzy.mu[fuzzy.index(v, c)]);
        mask.data[v] = top < 1.0 - 1e-9 ? 1.0 : 0.0;
    }
    return mask;
}

} // namespace ifl
