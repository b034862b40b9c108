// SPDX-License-Identifier: Apache-2.0

#include "ifl/synth.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ifl/util.hpp"

namespace ifl {

using nlohmann::json;

SynthSpec SynthSpec::default_benchmark(uint64_t seed) {
    SynthSpec s;
    s.dims = {16, 16, 16};
    s.num_classes = 2;
    s.shape = ShapeKind::Sphere;
    s.center = {8.0, 8.0, 8.0};
    s.radius = 5.0;
    s.slice_flip_prob = 0.2;
    s.boundary_jitter_voxels = 1;
    s.class_means = {0.0, 1.0};
    s.noise_sigma = 0.1;
    s.seed = seed;
    return s;
}

namespace {

void check_ball(const std::array<double, 3>& center, double radius, const Dims& dims,
                const char* what) {
    if (radius < 0.0) throw InvalidSpec(std::string(what) + ": negative radius");
    const double lims[3] = {double(dims.d - 1), double(dims.h - 1), double(dims.w - 1)};
    for (int a = 0; a < 3; ++a)
        if (center[size_t(a)] - radius < 0.0 || center[size_t(a)] + radius > lims[a])
            throw InvalidSpec(std::string(what) + ": geometry exceeds volume bounds");
}

} // namespace

void SynthSpec::validate() const {
    if (dims.d < 1 || dims.h < 1 || dims.w < 1) throw InvalidSpec("dims must be positive");
    if (num_classes < 2 || num_classes > 256)
        throw InvalidSpec("num_classes must be in [2,256]");
    if (!(slice_flip_prob >= 0.0 && slice_flip_prob <= 1.0))
        throw InvalidSpec("slice_flip_prob must lie in [0,1]");
    if (boundary_jitter_voxels < 0) throw InvalidSpec("boundary_jitter_voxels must be >= 0");
    if (noise_sigma < 0.0) throw InvalidSpec("noise_sigma must be >= 0");
    if (class_means.size() != size_t(num_classes))
        throw InvalidSpec("class_means must list one mean per class");

    const int dim_per_axis[3] = {dims.d, dims.h, dims.w};
    switch (shape) {
        case ShapeKind::Sphere:
            check_ball(center, radius, dims, "sphere");
            break;
        case ShapeKind::Cuboid:
            for (int a = 0; a < 3; ++a) {
                const auto& e = extent[size_t(a)];
                if (e[0] < 0 || e[1] < e[0] || e[1] >= dim_per_axis[a])
                    throw InvalidSpec("cuboid extent outside volume");
            }
            break;
        case ShapeKind::TwoBlob:
            if (blobs.empty()) throw InvalidSpec("two-blob shape needs at least one blob");
            for (const Blob& b : blobs) {
                check_ball(b.center, b.radius, dims, "blob");
                if (b.cls < 1 || b.cls >= num_classes)
                    throw InvalidSpec("blob class must be a foreground class");
            }
            break;
    }
}

namespace {

LabelVolume rasterize(const SynthSpec& spec) {
    LabelVolume v;
    v.dims = spec.dims;
    v.num_classes = spec.num_classes;
    v.data.assign(spec.dims.voxels(), 0);

    auto paint_ball = [&](const std::array<double, 3>& c, double r, uint8_t cls) {
        const double r2 = r * r;
        for (int z = 0; z < v.dims.d; ++z)
            for (int y = 0; y < v.dims.h; ++y)
                for (int x = 0; x < v.dims.w; ++x) {
                    const double dz = z - c[0], dy = y - c[1], dx = x - c[2];
                    if (dz * dz + dy * dy + dx * dx <= r2)
                        v.data[v.dims.index(z, y, x)] = cls;
                }
    };

    switch (spec.shape) {
        case ShapeKind::Sphere:
            paint_ball(spec.center, spec.radius, 1);
            break;
        case ShapeKind::Cuboid:
            for (int z = spec.extent[0][0]; z <= spec.extent[0][1]; ++z)
                for (int y = spec.extent[1][0]; y <= spec.extent[1][1]; ++y)
                    for (int x = spec.extent[2][0]; x <= spec.extent[2][1]; ++x)
                        v.data[v.dims.index(z, y, x)] = 1;
            break;
        case ShapeKind::TwoBlob:
            for (const Blob& b : spec.blobs)
                paint_ball(b.center, b.radius, uint8_t(b.cls));
            break;
    }
    return v;
}

bool slice_has_foreground(const LabelVolume& v, int z) {
    const size_t base = size_t(z) * size_t(v.dims.h) * size_t(v.dims.w);
    const size_t n = size_t(v.dims.h) * size_t(v.dims.w);
    for (size_t i = 0; i < n; ++i)
        if (v.data[base + i] != 0) return true;
    return false;
}

void erase_slice(LabelVolume& v, int z) {
    const size_t base = size_t(z) * size_t(v.dims.h) * size_t(v.dims.w);
    const size_t n = size_t(v.dims.h) * size_t(v.dims.w);
    for (size_t i = 0; i < n; ++i) v.data[base + i] = 0;
}

// In-plane 8-neighborhood dilation by one voxel; new voxels take the
// majority label of their adjacent foreground (ties -> smallest class).
void dilate_slice(LabelVolume& v, int z) {
    const int H = v.dims.h, W = v.dims.w;
    std::vector<uint8_t> before(size_t(H) * size_t(W));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) before[size_t(y) * W + x] = v.at(z, y, x);

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (before[size_t(y) * W + x] != 0) continue;
            std::vector<int> votes(size_t(v.num_classes), 0);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    const uint8_t lbl = before[size_t(ny) * W + nx];
                    if (lbl != 0) ++votes[lbl];
                }
            int best = 0, best_votes = 0;
            for (int c = 1; c < v.num_classes; ++c)
                if (votes[size_t(c)] > best_votes) {
                    best = c;
                    best_votes = votes[size_t(c)];
                }
            if (best_votes > 0) v.data[v.dims.index(z, y, x)] = uint8_t(best);
        }
}

std::vector<uint8_t> boundary_voxels(const LabelVolume& v) {
    std::vector<uint8_t> is_boundary(v.dims.voxels(), 0);
    for (int z = 0; z < v.dims.d; ++z)
        for (int y = 0; y < v.dims.h; ++y)
            for (int x = 0; x < v.dims.w; ++x) {
                const uint8_t own = v.at(z, y, x);
                bool mixed = false;
                for (int dz = -1; dz <= 1 && !mixed; ++dz)
                    for (int dy = -1; dy <= 1 && !mixed; ++dy)
                        for (int dx = -1; dx <= 1 && !mixed; ++dx) {
                            if (dz == 0 && dy == 0 && dx == 0) continue;
                            const int nz = z + dz, ny = y + dy, nx = x + dx;
                            if (!v.dims.contains(nz, ny, nx)) continue;
                            if (v.at(nz, ny, nx) != own) mixed = true;
                        }
                if (mixed) is_boundary[v.dims.index(z, y, x)] = 1;
            }
    return is_boundary;
}

} // namespace

SynthResult generate(const SynthSpec& spec) {
    spec.validate();
    SeededRng rng(spec.seed);

    SynthResult out;
    out.clean = rasterize(spec);
    out.corrupted = out.clean;

    // 1. slice-wise inconsistency: per foreground slice, flip a coin to
    //    erase or dilate with probability slice_flip_prob
    for (int z = 0; z < spec.dims.d; ++z) {
        if (!slice_has_foreground(out.clean, z)) continue;
        if (rng.uniform01() >= spec.slice_flip_prob) continue;
        if (rng.uniform01() < 0.5)
            erase_slice(out.corrupted, z);
        else
            dilate_slice(out.corrupted, z);
    }

    // 2. boundary jitter: voxels within Chebyshev distance < jitter of
    //    the clean boundary may take a random neighbor's clean label
    if (spec.boundary_jitter_voxels > 0) {
        const std::vector<uint8_t> boundary = boundary_voxels(out.clean);
        const int band = spec.boundary_jitter_voxels - 1;
        const Dims& dims = spec.dims;
        for (int z = 0; z < dims.d; ++z)
            for (int y = 0; y < dims.h; ++y)
                for (int x = 0; x < dims.w; ++x) {
                    bool in_band = false;
                    for (int dz = -band; dz <= band && !in_band; ++dz)
                        for (int dy = -band; dy <= band && !in_band; ++dy)
                            for (int dx = -band; dx <= band && !in_band; ++dx) {
                                const int nz = z + dz, ny = y + dy, nx = x + dx;
                                if (dims.contains(nz, ny, nx) &&
                                    boundary[dims.index(nz, ny, nx)])
                                    in_band = true;
                            }
                    if (!in_band) continue;
                    if (rng.uniform01() >= 0.5) continue;
                    // gather in-bounds 26-neighbors, pick one uniformly
                    int count = 0;
                    std::array<size_t, 26> idx;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dz == 0 && dy == 0 && dx == 0) continue;
                                const int nz = z + dz, ny = y + dy, nx = x + dx;
                                if (dims.contains(nz, ny, nx))
                                    idx[size_t(count++)] = dims.index(nz, ny, nx);
                            }
                    const size_t pick = idx[rng.below(uint64_t(count))];
                    out.corrupted.data[dims.index(z, y, x)] = out.clean.data[pick];
                }
    }

    // 3. intensity from the clean geometry plus seeded Gaussian noise
    out.intensity.dims = spec.dims;
    out.intensity.data.resize(spec.dims.voxels());
    for (size_t i = 0; i < out.intensity.data.size(); ++i)
        out.intensity.data[i] =
            spec.class_means[out.clean.data[i]] + spec.noise_sigma * rng.normal();

    return out;
}

SynthSpec spec_from_json(const json& j) {
    SynthSpec s;
    try {
        const auto& dims = j.at("dims");
        if (!dims.is_array() || dims.size() != 3) throw InvalidSpec("dims must be [d,h,w]");
        s.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
        s.num_classes = j.at("classes").get<int>();
        const std::string shape = j.value("shape", "sphere");
        if (shape == "sphere")
            s.shape = ShapeKind::Sphere;
        else if (shape == "cuboid")
            s.shape = ShapeKind::Cuboid;
        else if (shape == "two-blob")
            s.shape = ShapeKind::TwoBlob;
        else
            throw InvalidSpec("unknown shape kind: " + shape);

        if (s.shape == ShapeKind::Sphere) {
            const auto& c = j.at("center");
            s.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
            s.radius = j.at("radius").get<double>();
        } else if (s.shape == ShapeKind::Cuboid) {
            const auto& e = j.at("extent");
            for (size_t a = 0; a < 3; ++a)
                s.extent[a] = {e[a][0].get<int>(), e[a][1].get<int>()};
        } else {
            for (const auto& bj : j.at("blobs")) {
                Blob b;
                const auto& c = bj.at("center");
                b.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
                b.radius = bj.at("radius").get<double>();
                b.cls = bj.value("class", 1);
                s.blobs.push_back(b);
            }
        }

        if (j.contains("noise")) {
            s.slice_flip_prob = j["noise"].value("slice_flip_prob", 0.0);
            s.boundary_jitter_voxels = j["noise"].value("boundary_jitter_voxels", 0);
        }
        if (j.contains("intensity")) {
            s.class_means = j["intensity"].value("class_means", std::vector<double>{});
            s.noise_sigma = j["intensity"].value("sigma", 0.0);
        }
        if (s.class_means.empty()) {
            s.class_means.resize(size_t(s.num_classes));
            for (int c = 0; c < s.num_classes; ++c) s.class_means[size_t(c)] = double(c);
        }
        s.seed = j.value("seed", uint64_t(0));
    } catch (const json::exception& e) {
        throw InvalidSpec("invalid synth spec JSON: " + std::string(e.what()));
    }
    s.validate();
    return s;
}

json spec_to_json(const SynthSpec& s) {
    json j;
    j["dims"] = {s.dims.d, s.dims.h, s.dims.w};
    j["classes"] = s.num_classes;
    switch (s.shape) {
        case ShapeKind::Sphere:
            j["shape"] = "sphere";
            j["center"] = s.center;
            j["radius"] = s.radius;
            break;
        case ShapeKind::Cuboid:
            j["shape"] = "cuboid";
            j["extent"] = s.extent;
            break;
        case ShapeKind::TwoBlob: {
            j["shape"] = "two-blob";
            json blobs = json::array();
            for (const Blob& b : s.blobs)
                blobs.push_back({{"center", b.center}, {"radius", b.radius}, {"class", b.cls}});
            j["blobs"] = blobs;
            break;
        }
    }
    j["noise"] = {{"slice_flip_prob", s.slice_flip_prob},
                  {"boundary_jitter_voxels", s.boundary_jitter_voxels}};
    j["intensity"] = {{"class_means", s.class_means}, {"sigma", s.noise_sigma}};
    j["seed"] = s.seed;
    return j;
}

} // namespace ifl
