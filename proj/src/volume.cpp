// SPDX-License-Identifier: Apache-2.0

#include "ifl/volume.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ifl/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "FVOL IO assumes a little-endian host");

namespace ifl {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'V', 'O', 'L'};
constexpr double kSumTol = 1e-6;

void check_dims(const Dims& dims) {
    if (dims.d < 1 || dims.h < 1 || dims.w < 1)
        throw InvariantViolation("dims must be positive, got [" + std::to_string(dims.d) +
                                 "," + std::to_string(dims.h) + "," + std::to_string(dims.w) + "]");
}

void check_length(size_t actual, size_t expected, const char* what) {
    if (actual != expected)
        throw InvariantViolation(std::string(what) + " length " + std::to_string(actual) +
                                 " does not match dims product " + std::to_string(expected));
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw InvariantViolation(std::string(what) + " contains a non-finite value");
}

} // namespace

void LabelVolume::validate() const {
    check_dims(dims);
    if (num_classes < 2 || num_classes > 256)
        throw InvariantViolation("num_classes must be in [2,256], got " +
                                 std::to_string(num_classes));
    check_length(data.size(), dims.voxels(), "label data");
    for (uint8_t v : data)
        if (v >= num_classes)
            throw InvariantViolation("label value " + std::to_string(int(v)) +
                                     " >= num_classes " + std::to_string(num_classes));
}

void ScalarField::validate() const {
    check_dims(dims);
    check_length(data.size(), dims.voxels(), "scalar data");
    check_finite(data, "scalar field");
}

void ProbField::validate() const {
    check_dims(dims);
    if (num_classes < 1)
        throw InvariantViolation("ProbField needs at least one class");
    check_length(data.size(), dims.voxels() * num_classes, "probability data");
    const size_t n = dims.voxels();
    for (size_t v = 0; v < n; ++v) {
        double sum = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            const double p = at(v, c);
            if (!(p >= 0.0 && p <= 1.0))
                throw InvariantViolation("probability out of [0,1] at voxel " +
                                         std::to_string(v));
            sum += p;
        }
        if (std::fabs(sum - 1.0) > kSumTol)
            throw InvariantViolation("probability row sum " + format_g17(sum) +
                                     " deviates from 1 at voxel " + std::to_string(v));
    }
}

void LogitField::validate() const {
    check_dims(dims);
    if (num_classes < 1)
        throw InvariantViolation("LogitField needs at least one class");
    check_length(data.size(), dims.voxels() * num_classes, "logit data");
    check_finite(data, "logit field");
}

ProbField FuzzyLabelVolume::membership_field() const {
    ProbField f;
    f.dims = dims;
    f.num_classes = num_classes;
    f.data = mu;
    return f;
}

void FuzzyLabelVolume::validate() const {
    check_dims(dims);
    if (num_classes < 2)
        throw InvariantViolation("FuzzyLabelVolume needs at least two classes");
    if (neighborhood_radius < 1)
        throw InvariantViolation("neighborhood_radius must be >= 1");
    if (!(rho2_used > 0.0 && rho2_used <= 1.0))
        throw InvariantViolation("rho2_used must lie in (0,1]");
    const size_t n = dims.voxels() * num_classes;
    check_length(mu.size(), n, "mu");
    check_length(nu.size(), n, "nu");
    check_length(pi.size(), n, "pi");
    for (size_t i = 0; i < n; ++i) {
        const double m = mu[i], v = nu[i], p = pi[i];
        if (!(m >= 0.0 && m <= 1.0 && v >= 0.0 && v <= 1.0 && p >= 0.0 && p <= 1.0))
            throw InvariantViolation("fuzzy channel out of [0,1] at entry " + std::to_string(i));
        if (m + v > 1.0 + kSumTol)
            throw InvariantViolation("mu + nu exceeds 1 at entry " + std::to_string(i));
        if (std::fabs(p - (1.0 - m - v)) > kSumTol)
            throw InvariantViolation("pi != 1 - mu - nu at entry " + std::to_string(i));
        if (std::fabs(v - (1.0 - m) * rho2_used) > kSumTol)
            throw InvariantViolation("nu != (1 - mu) * rho2 at entry " + std::to_string(i));
    }
    // sum_c mu_c = 1 per voxel
    const size_t voxels = dims.voxels();
    for (size_t v = 0; v < voxels; ++v) {
        double sum = 0.0;
        for (int c = 0; c < num_classes; ++c) sum += mu[index(v, c)];
        if (std::fabs(sum - 1.0) > kSumTol)
            throw InvariantViolation("sum of memberships deviates from 1 at voxel " +
                                     std::to_string(v));
    }
}

namespace {

struct HeaderInfo {
    std::string kind;
    Dims dims;
    int classes = 0;
    std::string dtype;
    json raw;
};

json make_header(const std::string& kind, const Dims& dims, int classes,
                 const std::string& dtype) {
    json h;
    h["kind"] = kind;
    h["dims"] = {dims.d, dims.h, dims.w};
    if (kind != "scalar") h["classes"] = classes;
    h["dtype"] = dtype;
    return h;
}

void append_f32(std::string& out, const std::vector<double>& src) {
    const size_t base = out.size();
    out.resize(base + src.size() * 4);
    for (size_t i = 0; i < src.size(); ++i) {
        const float f = static_cast<float>(src[i]);
        std::memcpy(out.data() + base + i * 4, &f, 4);
    }
}

std::vector<double> parse_f32(const std::string& payload) {
    std::vector<double> out(payload.size() / 4);
    for (size_t i = 0; i < out.size(); ++i) {
        float f;
        std::memcpy(&f, payload.data() + i * 4, 4);
        out[i] = f;
    }
    return out;
}

struct Encoded {
    json header;
    std::string payload;
};

Encoded encode(const AnyVolume& vol) {
    Encoded e;
    if (const auto* lv = std::get_if<LabelVolume>(&vol)) {
        lv->validate();
        e.header = make_header("labels", lv->dims, lv->num_classes, "u8");
        e.payload.assign(lv->data.begin(), lv->data.end());
    } else if (const auto* sf = std::get_if<ScalarField>(&vol)) {
        sf->validate();
        e.header = make_header("scalar", sf->dims, 0, "f32");
        append_f32(e.payload, sf->data);
    } else if (const auto* pf = std::get_if<ProbField>(&vol)) {
        pf->validate();
        e.header = make_header("prob", pf->dims, pf->num_classes, "f32");
        append_f32(e.payload, pf->data);
    } else if (const auto* zf = std::get_if<LogitField>(&vol)) {
        zf->validate();
        e.header = make_header("logits", zf->dims, zf->num_classes, "f32");
        append_f32(e.payload, zf->data);
    } else {
        const auto& fz = std::get<FuzzyLabelVolume>(vol);
        fz.validate();
        e.header = make_header("fuzzy", fz.dims, fz.num_classes, "f32");
        e.header["radius"] = fz.neighborhood_radius;
        e.header["rho2"] = fz.rho2_used;
        // interleave (mu, nu, pi) per voxel-class
        const size_t n = fz.mu.size();
        std::vector<double> interleaved(n * 3);
        for (size_t i = 0; i < n; ++i) {
            interleaved[i * 3 + 0] = fz.mu[i];
            interleaved[i * 3 + 1] = fz.nu[i];
            interleaved[i * 3 + 2] = fz.pi[i];
        }
        append_f32(e.payload, interleaved);
    }
    return e;
}

} // namespace

void write_volume(const AnyVolume& vol, const std::filesystem::path& path) {
    write_volume(vol, path, json::object());
}

void write_volume(const AnyVolume& vol, const std::filesystem::path& path,
                  const json& extra_header) {
    Encoded e = encode(vol); // validates; throws before the file is touched
    for (const auto& [k, v] : extra_header.items()) e.header[k] = v;
    const std::string header_bytes = e.header.dump();
    if (header_bytes.size() > UINT32_MAX)
        throw InvalidParameter("FVOL header too large");
    const uint32_t n = static_cast<uint32_t>(header_bytes.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(header_bytes.data(), std::streamsize(header_bytes.size()));
    out.write(e.payload.data(), std::streamsize(e.payload.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

HeaderInfo read_header(std::ifstream& in, const std::filesystem::path& path) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("not an FVOL file: " + path.string());
    uint32_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&n), 4))
        throw ParseError("truncated FVOL header length: " + path.string());
    std::string header_bytes(n, '\0');
    if (!in.read(header_bytes.data(), n))
        throw ParseError("truncated FVOL header: " + path.string());

    json h;
    try {
        h = json::parse(header_bytes);
    } catch (const json::parse_error& e) {
        throw ParseError("malformed FVOL JSON header: " + std::string(e.what()));
    }

    HeaderInfo info;
    info.raw = h;
    try {
        info.kind = h.at("kind").get<std::string>();
        const auto& dims = h.at("dims");
        if (!dims.is_array() || dims.size() != 3)
            throw ParseError("dims must be a 3-element array");
        info.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
        info.dtype = h.at("dtype").get<std::string>();
        if (info.kind != "scalar") info.classes = h.at("classes").get<int>();
    } catch (const json::exception& e) {
        throw ParseError("FVOL header missing or mistyped key: " + std::string(e.what()));
    }

    static const char* kinds[] = {"labels", "fuzzy", "logits", "prob", "scalar"};
    bool known = false;
    for (const char* k : kinds) known |= info.kind == k;
    if (!known) throw ParseError("unknown FVOL kind: " + info.kind);
    const std::string want_dtype = info.kind == "labels" ? "u8" : "f32";
    if (info.dtype != want_dtype)
        throw ParseError("kind " + info.kind + " requires dtype " + want_dtype +
                         ", header says " + info.dtype);
    if (info.dims.d < 1 || info.dims.h < 1 || info.dims.w < 1)
        throw ParseError("non-positive dims in FVOL header");
    return info;
}

std::string read_payload(std::ifstream& in, size_t expected,
                         const std::filesystem::path& path) {
    std::string payload(expected, '\0');
    in.read(payload.data(), std::streamsize(expected));
    const size_t got = size_t(in.gcount());
    if (got != expected)
        throw CorruptPayload("payload holds " + std::to_string(got) + " bytes, header implies " +
                             std::to_string(expected) + ": " + path.string());
    char extra;
    if (in.read(&extra, 1))
        throw CorruptPayload("trailing bytes after payload: " + path.string());
    return payload;
}

} // namespace

AnyVolume read_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    const HeaderInfo info = read_header(in, path);
    const size_t voxels = info.dims.voxels();

    if (info.kind == "labels") {
        const std::string payload = read_payload(in, voxels, path);
        LabelVolume v;
        v.dims = info.dims;
        v.num_classes = info.classes;
        v.data.assign(payload.begin(), payload.end());
        v.validate();
        return v;
    }
    if (info.kind == "scalar") {
        const std::string payload = read_payload(in, voxels * 4, path);
        ScalarField v;
        v.dims = info.dims;
        v.data = parse_f32(payload);
        v.validate();
        return v;
    }
    if (info.kind == "prob") {
        const std::string payload = read_payload(in, voxels * size_t(info.classes) * 4, path);
        ProbField v;
        v.dims = info.dims;
        v.num_classes = info.classes;
        v.data = parse_f32(payload);
        v.validate();
        return v;
    }
    if (info.kind == "logits") {
        const std::string payload = read_payload(in, voxels * size_t(info.classes) * 4, path);
        LogitField v;
        v.dims = info.dims;
        v.num_classes = info.classes;
        v.data = parse_f32(payload);
        v.validate();
        return v;
    }

    // fuzzy
    const size_t n = voxels * size_t(info.classes);
    const std::string payload = read_payload(in, n * 3 * 4, path);
    const std::vector<double> interleaved = parse_f32(payload);
    FuzzyLabelVolume v;
    v.dims = info.dims;
    v.num_classes = info.classes;
    try {
        v.neighborhood_radius = info.raw.at("radius").get<int>();
        v.rho2_used = info.raw.at("rho2").get<double>();
    } catch (const json::exception& e) {
        throw ParseError("fuzzy FVOL header missing radius/rho2: " + std::string(e.what()));
    }
    v.mu.resize(n);
    v.nu.resize(n);
    v.pi.resize(n);
    for (size_t i = 0; i < n; ++i) {
        v.mu[i] = interleaved[i * 3 + 0];
        v.nu[i] = interleaved[i * 3 + 1];
        v.pi[i] = interleaved[i * 3 + 2];
    }
    v.validate();
    return v;
}

namespace {

template <typename T>
T read_typed(const std::filesystem::path& path, const char* kind) {
    AnyVolume v = read_volume(path);
    if (auto* p = std::get_if<T>(&v)) return std::move(*p);
    throw ParseError(std::string("expected FVOL kind \"") + kind + "\": " + path.string());
}

} // namespace

LabelVolume read_labels(const std::filesystem::path& path) {
    return read_typed<LabelVolume>(path, "labels");
}
ScalarField read_scalar(const std::filesystem::path& path) {
    return read_typed<ScalarField>(path, "scalar");
}
ProbField read_prob(const std::filesystem::path& path) {
    return read_typed<ProbField>(path, "prob");
}
LogitField read_logits(const std::filesystem::path& path) {
    return read_typed<LogitField>(path, "logits");
}
FuzzyLabelVolume read_fuzzy(const std::filesystem::path& path) {
    return read_typed<FuzzyLabelVolume>(path, "fuzzy");
}

} // namespace ifl
