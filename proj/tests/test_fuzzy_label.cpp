// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "ifl/fuzzy_label.hpp"
#include "oracles.hpp"

using namespace ifl;

namespace {

LabelVolume flat_boundary_4x4x4() {
    // z < 2 -> class 0, z >= 2 -> class 1
    LabelVolume v;
    v.dims = {4, 4, 4};
    v.num_classes = 2;
    v.data.resize(64);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) v.data[v.dims.index(z, y, x)] = z >= 2 ? 1 : 0;
    return v;
}

LabelVolume uniform(Dims dims, int classes, uint8_t cls) {
    LabelVolume v;
    v.dims = dims;
    v.num_classes = classes;
    v.data.assign(dims.voxels(), cls);
    return v;
}

} // namespace

TEST_CASE("homogeneous neighborhoods give one-hot membership") {
    const LabelVolume v = uniform({4, 4, 4}, 2, 1);
    const ProbField mu = compute_membership(v, 1);
    const size_t interior = v.dims.index(2, 2, 2);
    CHECK(mu.at(interior, 1) == 1.0);
    CHECK(mu.at(interior, 0) == 0.0);
    // corner voxel: 7 in-bounds neighbors, all agreeing
    CHECK(mu.at(v.dims.index(0, 0, 0), 1) == 1.0);
}

TEST_CASE("flat boundary voxel sees 17 of 26 neighbors agreeing") {
    const LabelVolume v = flat_boundary_4x4x4();
    const ProbField mu = compute_membership(v, 1);
    const size_t voxel = v.dims.index(2, 1, 1);
    CHECK(mu.at(voxel, 1) == doctest::Approx(17.0 / 26.0).epsilon(1e-15));
    CHECK(mu.at(voxel, 0) == doctest::Approx(9.0 / 26.0).epsilon(1e-15));
}

TEST_CASE("membership matches the brute-force oracle exactly on random volumes") {
    SeededRng rng(4242);
    for (int i = 0; i < 20; ++i) {
        const Dims dims{2 + int(rng.below(5)), 2 + int(rng.below(5)), 2 + int(rng.below(5))};
        const int C = 2 + int(rng.below(3));
        const int r = 1 + int(rng.below(2));
        const LabelVolume v = oracle::random_labels(rng, dims, C);
        const ProbField mu = compute_membership(v, r);
        const std::vector<double> expect = oracle::membership_brute_force(v, r);
        REQUIRE(mu.data.size() == expect.size());
        for (size_t j = 0; j < expect.size(); ++j) CHECK(mu.data[j] == expect[j]);
    }
}

TEST_CASE("degenerate and invalid inputs are rejected") {
    CHECK_THROWS_AS(compute_membership(uniform({1, 1, 1}, 2, 0), 1), DegenerateVolume);
    CHECK_THROWS_AS(compute_membership(uniform({4, 4, 4}, 2, 0), 0), InvalidParameter);
    CHECK_THROWS_AS(fuzzify(uniform({4, 4, 4}, 2, 0), 1, 1.5), InvalidParameter);
    CHECK_THROWS_AS(fuzzify(uniform({4, 4, 4}, 2, 0), 1, 0.0), InvalidParameter);
}

TEST_CASE("fuzzify fills nu and pi from the membership") {
    const LabelVolume v = flat_boundary_4x4x4();
    const FuzzyLabelVolume fz = fuzzify(v, 1, 0.5);
    fz.validate();

    const size_t i = fz.index(v.dims.index(2, 1, 1), 1); // mu = 17/26
    CHECK(fz.mu[i] == doctest::Approx(17.0 / 26.0).epsilon(1e-15));
    CHECK(fz.nu[i] == doctest::Approx(9.0 / 52.0).epsilon(1e-15));
    CHECK(fz.pi[i] == doctest::Approx(9.0 / 52.0).epsilon(1e-15));
    CHECK(fz.mu[i] + fz.nu[i] <= 1.0);

    // mu = 1 kills both nu and pi regardless of rho2
    const size_t interior = fz.index(v.dims.index(0, 1, 1), 0);
    CHECK(fz.mu[interior] == 1.0);
    CHECK(fz.nu[interior] == 0.0);
    CHECK(fz.pi[interior] == 0.0);
}

TEST_CASE("rho2 = 1 degenerates to a classical fuzzy set with zero hesitation") {
    const FuzzyLabelVolume fz = fuzzify(flat_boundary_4x4x4(), 1, 1.0);
    for (size_t i = 0; i < fz.mu.size(); ++i) {
        CHECK(fz.nu[i] == doctest::Approx(1.0 - fz.mu[i]).epsilon(1e-15));
        CHECK(fz.pi[i] == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("eq-2/3/5 invariants hold on random fuzzified volumes") {
    SeededRng rng(7);
    for (int i = 0; i < 10; ++i) {
        const Dims dims{2 + int(rng.below(4)), 2 + int(rng.below(4)), 2 + int(rng.below(4))};
        const LabelVolume v = oracle::random_labels(rng, dims, 2 + int(rng.below(3)));
        const double rho2 = rng.uniform(0.05, 1.0);
        const FuzzyLabelVolume fz = fuzzify(v, 1, rho2);
        CHECK_NOTHROW(fz.validate());
        for (size_t j = 0; j < fz.mu.size(); ++j) {
            CHECK(fz.mu[j] + fz.nu[j] <= 1.0 + 1e-12);
            CHECK(fz.pi[j] == doctest::Approx(1.0 - fz.mu[j] - fz.nu[j]).epsilon(1e-12));
            CHECK(fz.nu[j] == doctest::Approx((1.0 - fz.mu[j]) * rho2).epsilon(1e-12));
        }
    }
}

TEST_CASE("label permutation permutes the channels identically") {
    SeededRng rng(11);
    const LabelVolume v = oracle::random_labels(rng, {4, 4, 4}, 3);
    LabelVolume permuted = v;
    const int perm[3] = {2, 0, 1};
    for (auto& b : permuted.data) b = uint8_t(perm[b]);

    const ProbField mu = compute_membership(v, 1);
    const ProbField mu_p = compute_membership(permuted, 1);
    for (size_t vox = 0; vox < v.dims.voxels(); ++vox)
        for (int c = 0; c < 3; ++c)
            CHECK(mu.at(vox, c) == mu_p.at(vox, perm[c]));
}

TEST_CASE("translation equivariance on interior voxels") {
    // pattern shifted by one voxel in x; interior neighborhoods shift along
    SeededRng rng(13);
    LabelVolume a = oracle::random_labels(rng, {5, 5, 6}, 2);
    LabelVolume b = a;
    for (int z = 0; z < 5; ++z)
        for (int y = 0; y < 5; ++y) {
            for (int x = 5; x >= 1; --x)
                b.data[b.dims.index(z, y, x)] = a.data[a.dims.index(z, y, x - 1)];
            b.data[b.dims.index(z, y, 0)] = a.data[a.dims.index(z, y, 0)];
        }
    const ProbField mu_a = compute_membership(a, 1);
    const ProbField mu_b = compute_membership(b, 1);
    for (int z = 1; z < 4; ++z)
        for (int y = 1; y < 4; ++y)
            for (int x = 2; x < 5; ++x) // x-1 must itself be interior in a
                for (int c = 0; c < 2; ++c)
                    CHECK(mu_b.at(b.dims.index(z, y, x), c) ==
                          mu_a.at(a.dims.index(z, y, x - 1), c));
}

TEST_CASE("boundary mask marks the two planes adjacent to a flat boundary") {
    const LabelVolume v = flat_boundary_4x4x4();
    const FuzzyLabelVolume fz = fuzzify(v, 1, 0.5);
    const ScalarField mask = boundary_mask(fz, v);
    const std::vector<double> expect = oracle::boundary_brute_force(v, 1);
    for (size_t i = 0; i < mask.data.size(); ++i) CHECK(mask.data[i] == expect[i]);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                CHECK(mask.data[v.dims.index(z, y, x)] == ((z == 1 || z == 2) ? 1.0 : 0.0));
    // the label-free variant agrees on this volume
    const ScalarField mask_free = boundary_mask(fz);
    CHECK(mask_free.data == mask.data);
}

TEST_CASE("isolated voxel marks itself and its 26 neighbors as boundary") {
    LabelVolume v = uniform({5, 5, 5}, 2, 0);
    v.data[v.dims.index(2, 2, 2)] = 1;
    const FuzzyLabelVolume fz = fuzzify(v, 1, 0.5);
    const ScalarField mask = boundary_mask(fz, v);
    const std::vector<double> expect = oracle::boundary_brute_force(v, 1);
    CHECK(mask.data == expect);
    double count = 0;
    for (double m : mask.data) count += m;
    CHECK(count == 27.0);
}
