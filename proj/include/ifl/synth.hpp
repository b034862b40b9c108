// SPDX-License-Identifier: Apache-2.0
//
// Seeded generator of synthetic 3D label volumes with controlled
// corruptions: whole-slice erase/dilate events mimicking slice-wise
// annotation inconsistency, and boundary-band label jitter creating
// the ambiguous shell that soft labels are meant to absorb.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ifl/volume.hpp"

namespace ifl {

enum class ShapeKind { Sphere, Cuboid, TwoBlob };

struct Blob {
    std::array<double, 3> center{}; ///< (z, y, x)
    double radius = 0.0;
    int cls = 1;
};

struct SynthSpec {
    Dims dims;
    int num_classes = 2;
    ShapeKind shape = ShapeKind::Sphere;

    // sphere
    std::array<double, 3> center{};
    double radius = 0.0;
    // cuboid, inclusive [lo, hi] per axis (z, y, x)
    std::array<std::array<int, 2>, 3> extent{};
    // two-blob
    std::vector<Blob> blobs;

    double slice_flip_prob = 0.0;
    int boundary_jitter_voxels = 0;

    std::vector<double> class_means; ///< one intensity mean per class
    double noise_sigma = 0.0;

    uint64_t seed = 0;

    /// 16^3 two-class sphere with slice flips and a one-voxel jitter
    /// band; the workbench's standard noisy-boundary benchmark.
    static SynthSpec default_benchmark(uint64_t seed);

    void validate() const; ///< throws InvalidSpec
};

struct SynthResult {
    LabelVolume clean;
    LabelVolume corrupted;
    ScalarField intensity;
};

/// Deterministic given spec.seed: rasterizes the clean geometry, applies
/// slice flips then boundary jitter to produce the corrupted labels, and
/// samples intensity as class means over the clean labels plus Gaussian
/// noise.
SynthResult generate(const SynthSpec& spec);

SynthSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const SynthSpec& spec);

} // namespace ifl
