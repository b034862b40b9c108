// SPDX-License-Identifier: Apache-2.0
//
// Voxel-grid data model and FVOL file IO.
//
// FVOL layout (bit-exact, little-endian):
//   bytes 0..3   magic "FVOL"
//   bytes 4..7   u32 header length N
//   N bytes      UTF-8 JSON header with keys:
//                  kind  : "labels" | "fuzzy" | "logits" | "prob" | "scalar"
//                  dims  : [d, h, w]
//                  classes : int (absent for kind "scalar")
//                  dtype : "u8" (labels) | "f32" (all real kinds)
//                kind "fuzzy" additionally carries "radius" and "rho2".
//   rest         raw payload, C-order (z, y, x[, class[, channel]]).
//
// Real-valued data is float32 on disk and double in memory; every f32
// is exactly representable as a double, so read(write(v)) is bit-exact
// for any volume whose payload originated from (or fits in) f32.
// For kind "fuzzy" the per voxel-class channel order is (mu, nu, pi).
#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ifl/errors.hpp"

namespace ifl {

struct Dims {
    int d = 0; ///< depth  (z, slowest)
    int h = 0; ///< height (y)
    int w = 0; ///< width  (x, fastest)

    size_t voxels() const { return size_t(d) * size_t(h) * size_t(w); }
    size_t index(int z, int y, int x) const {
        return (size_t(z) * h + y) * w + x;
    }
    bool contains(int z, int y, int x) const {
        return z >= 0 && z < d && y >= 0 && y < h && x >= 0 && x < w;
    }
    bool operator==(const Dims&) const = default;
};

/// Crisp integer class labels; every value lies in [0, num_classes).
struct LabelVolume {
    Dims dims;
    int num_classes = 0;
    std::vector<uint8_t> data;

    uint8_t at(int z, int y, int x) const { return data[dims.index(z, y, x)]; }
    void validate() const;
    bool operator==(const LabelVolume&) const = default;
};

/// Dense finite real field, one value per voxel.
struct ScalarField {
    Dims dims;
    std::vector<double> data;

    void validate() const;
    bool operator==(const ScalarField&) const = default;
};

/// Per-voxel class probabilities; class index is the fastest-varying
/// axis. Rows sum to 1 within 1e-6.
struct ProbField {
    Dims dims;
    int num_classes = 0;
    std::vector<double> data;

    size_t index(size_t voxel, int c) const { return voxel * num_classes + c; }
    double at(size_t voxel, int c) const { return data[index(voxel, c)]; }
    void validate() const;
    bool operator==(const ProbField&) const = default;
};

/// Per-voxel, per-class real logits. These are the trainable parameters
/// of the per-voxel desk model; also the checkpoint format.
struct LogitField {
    Dims dims;
    int num_classes = 0;
    std::vector<double> data;

    size_t index(size_t voxel, int c) const { return voxel * num_classes + c; }
    void validate() const;
    bool operator==(const LogitField&) const = default;
};

/// Intuitionistic fuzzy labels: per voxel and class a membership mu,
/// non-membership nu and hesitation pi, all in [0,1], with
///   0 <= mu + nu <= 1,   pi = 1 - mu - nu,   nu = (1 - mu) * rho2_used,
/// and sum_c mu_c = 1 (memberships are neighbor-label fractions).
/// rho2_used is the snapshot scaling applied at construction time; the
/// training loss recomputes nu from the live rho2.
struct FuzzyLabelVolume {
    Dims dims;
    int num_classes = 0;
    int neighborhood_radius = 0;
    double rho2_used = 0.0;
    std::vector<double> mu, nu, pi; // voxel-major, class fastest

    size_t index(size_t voxel, int c) const { return voxel * num_classes + c; }
    ProbField membership_field() const;
    void validate() const;
    bool operator==(const FuzzyLabelVolume&) const = default;
};

using AnyVolume =
    std::variant<LabelVolume, ScalarField, ProbField, LogitField, FuzzyLabelVolume>;

/// Reads any FVOL file and validates the stored type's invariants.
/// Throws IoError (unreadable file), ParseError (bad magic/header),
/// CorruptPayload (payload length mismatch) or InvariantViolation.
AnyVolume read_volume(const std::filesystem::path& path);

/// Writes a volume in FVOL format. Invariants are validated before any
/// bytes are written. `extra_header` entries are merged into the JSON
/// header (used for provenance tags such as config_hash); readers
/// ignore unknown keys.
void write_volume(const AnyVolume& vol, const std::filesystem::path& path);
void write_volume(const AnyVolume& vol, const std::filesystem::path& path,
                  const nlohmann::json& extra_header);

// Typed readers; throw ParseError when the file holds a different kind.
LabelVolume read_labels(const std::filesystem::path& path);
ScalarField read_scalar(const std::filesystem::path& path);
ProbField read_prob(const std::filesystem::path& path);
LogitField read_logits(const std::filesystem::path& path);
FuzzyLabelVolume read_fuzzy(const std::filesystem::path& path);

} // namespace ifl
