// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "ifl/synth.hpp"
#include "oracles.hpp"

using namespace ifl;

TEST_CASE("zero noise is the identity corruption") {
    SynthSpec spec = SynthSpec::default_benchmark(3);
    spec.slice_flip_prob = 0.0;
    spec.boundary_jitter_voxels = 0;
    const SynthResult res = generate(spec);
    CHECK(res.corrupted == res.clean);
    CHECK(res.intensity.dims == spec.dims);
}

TEST_CASE("radius-zero sphere paints exactly the center voxel") {
    SynthSpec spec;
    spec.dims = {5, 5, 5};
    spec.num_classes = 2;
    spec.shape = ShapeKind::Sphere;
    spec.center = {2.0, 2.0, 2.0};
    spec.radius = 0.0;
    spec.class_means = {0.0, 1.0};
    const SynthResult res = generate(spec);
    size_t fg = 0;
    for (uint8_t v : res.clean.data) fg += v;
    CHECK(fg == 1);
    CHECK(res.clean.at(2, 2, 2) == 1);
}

TEST_CASE("cuboid rasterization count matches the analytic volume") {
    SynthSpec spec;
    spec.dims = {8, 8, 8};
    spec.num_classes = 2;
    spec.shape = ShapeKind::Cuboid;
    spec.extent = {{{1, 4}, {2, 5}, {0, 7}}};
    spec.class_means = {0.0, 1.0};
    const SynthResult res = generate(spec);
    size_t fg = 0;
    for (uint8_t v : res.clean.data) fg += v;
    CHECK(fg == size_t(4) * 4 * 8);
}

TEST_CASE("identical specs generate identical outputs, different seeds differ") {
    const SynthSpec spec = SynthSpec::default_benchmark(42);
    const SynthResult a = generate(spec);
    const SynthResult b = generate(spec);
    CHECK(a.clean == b.clean);
    CHECK(a.corrupted == b.corrupted);
    CHECK(a.intensity == b.intensity);

    SynthSpec other = spec;
    other.seed = 43;
    const SynthResult c = generate(other);
    CHECK(c.corrupted.data != a.corrupted.data);
}

TEST_CASE("slice flips corrupt at least one and at most all foreground slices") {
    SynthSpec spec = SynthSpec::default_benchmark(42);
    spec.boundary_jitter_voxels = 0; // isolate slice corruption
    const SynthResult res = generate(spec);

    int fg_slices = 0, changed_slices = 0;
    for (int z = 0; z < spec.dims.d; ++z) {
        bool fg = false, changed = false;
        for (int y = 0; y < spec.dims.h; ++y)
            for (int x = 0; x < spec.dims.w; ++x) {
                fg |= res.clean.at(z, y, x) != 0;
                changed |= res.clean.at(z, y, x) != res.corrupted.at(z, y, x);
            }
        fg_slices += fg;
        changed_slices += changed;
    }
    CHECK(fg_slices > 0);
    CHECK(changed_slices >= 1); // holds for this frozen seed
    CHECK(changed_slices <= fg_slices);

    size_t diff = 0;
    for (size_t i = 0; i < res.clean.data.size(); ++i)
        diff += res.clean.data[i] != res.corrupted.data[i];
    const SynthResult rerun = generate(spec);
    size_t diff2 = 0;
    for (size_t i = 0; i < rerun.clean.data.size(); ++i)
        diff2 += rerun.clean.data[i] != rerun.corrupted.data[i];
    CHECK(diff == diff2);
}

TEST_CASE("jitter-only corruption stays within the boundary band") {
    SynthSpec spec = SynthSpec::default_benchmark(11);
    spec.slice_flip_prob = 0.0;
    spec.boundary_jitter_voxels = 2;
    const SynthResult res = generate(spec);

    // brute-force Chebyshev distance from every changed voxel to the
    // clean boundary
    const std::vector<double> boundary = oracle::boundary_brute_force(res.clean, 1);
    const Dims& d = spec.dims;
    size_t changed = 0;
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
                if (res.clean.at(z, y, x) == res.corrupted.at(z, y, x)) continue;
                ++changed;
                int best = 1 << 20;
                for (int bz = 0; bz < d.d; ++bz)
                    for (int by = 0; by < d.h; ++by)
                        for (int bx = 0; bx < d.w; ++bx) {
                            if (boundary[d.index(bz, by, bx)] == 0.0) continue;
                            const int cheb = std::max(
                                {std::abs(bz - z), std::abs(by - y), std::abs(bx - x)});
                            best = std::min(best, cheb);
                        }
                CHECK(best <= spec.boundary_jitter_voxels);
            }
    CHECK(changed > 0); // the band actually got jittered for this seed
}

TEST_CASE("invalid specs are rejected") {
    SynthSpec spec = SynthSpec::default_benchmark(1);
    spec.dims = {0, 16, 16};
    CHECK_THROWS_AS(generate(spec), InvalidSpec);

    spec = SynthSpec::default_benchmark(1);
    spec.radius = 9.0; // ball sticks out of the 16^3 box
    CHECK_THROWS_AS(generate(spec), InvalidSpec);

    spec = SynthSpec::default_benchmark(1);
    spec.slice_flip_prob = 1.5;
    CHECK_THROWS_AS(generate(spec), InvalidSpec);

    spec = SynthSpec::default_benchmark(1);
    spec.class_means = {0.0};
    CHECK_THROWS_AS(generate(spec), InvalidSpec);
}

TEST_CASE("two-blob shape paints separate classes") {
    SynthSpec spec;
    spec.dims = {12, 12, 12};
    spec.num_classes = 3;
    spec.shape = ShapeKind::TwoBlob;
    spec.blobs = {{{3.5, 3.5, 3.5}, 2.0, 1}, {{8.0, 8.0, 8.0}, 2.5, 2}};
    spec.class_means = {0.0, 1.0, 2.0};
    const SynthResult res = generate(spec);
    bool has1 = false, has2 = false;
    for (uint8_t v : res.clean.data) {
        has1 |= v == 1;
        has2 |= v == 2;
    }
    CHECK(has1);
    CHECK(has2);
}

TEST_CASE("intensity follows class means with seeded noise") {
    SynthSpec spec = SynthSpec::default_benchmark(5);
    spec.noise_sigma = 0.0;
    const SynthResult res = generate(spec);
    for (size_t i = 0; i < res.clean.data.size(); ++i)
        CHECK(res.intensity.data[i] == spec.class_means[res.clean.data[i]]);
}
