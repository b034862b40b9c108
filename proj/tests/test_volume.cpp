// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ifl/fuzzy_label.hpp"
#include "ifl/volume.hpp"
#include "oracles.hpp"

using namespace ifl;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "ifl_volume_tests";
    fs::create_directories(dir);
    return dir / name;
}

LabelVolume make_labels(Dims dims, int classes, uint8_t fill = 0) {
    LabelVolume v;
    v.dims = dims;
    v.num_classes = classes;
    v.data.assign(dims.voxels(), fill);
    return v;
}

// random real data that is exactly f32-representable, as on disk
std::vector<double> random_f32(SeededRng& rng, size_t n, double lo, double hi) {
    std::vector<double> out(n);
    for (double& v : out) v = double(float(rng.uniform(lo, hi)));
    return out;
}

} // namespace

TEST_CASE("label volume round-trips bit-exactly") {
    const auto path = tmp_file("labels.fvol");
    LabelVolume v = make_labels({2, 2, 2}, 2);
    write_volume(v, path);
    CHECK(std::get<LabelVolume>(read_volume(path)) == v);
}

TEST_CASE("round-trip holds for random volumes of every kind") {
    SeededRng rng(99);
    const auto path = tmp_file("any.fvol");
    for (int i = 0; i < 30; ++i) {
        const Dims dims{1 + int(rng.below(4)), 1 + int(rng.below(4)), 1 + int(rng.below(4))};
        const int C = 2 + int(rng.below(3));
        switch (rng.below(5)) {
            case 0: {
                LabelVolume v = oracle::random_labels(rng, dims, C);
                write_volume(v, path);
                CHECK(std::get<LabelVolume>(read_volume(path)) == v);
                break;
            }
            case 1: {
                ScalarField v;
                v.dims = dims;
                v.data = random_f32(rng, dims.voxels(), -5.0, 5.0);
                write_volume(v, path);
                CHECK(std::get<ScalarField>(read_volume(path)) == v);
                break;
            }
            case 2: {
                LogitField v;
                v.dims = dims;
                v.num_classes = C;
                v.data = random_f32(rng, dims.voxels() * size_t(C), -5.0, 5.0);
                write_volume(v, path);
                CHECK(std::get<LogitField>(read_volume(path)) == v);
                break;
            }
            case 3: {
                // valid prob rows: normalize in float space
                ProbField v;
                v.dims = dims;
                v.num_classes = C;
                v.data.resize(dims.voxels() * size_t(C));
                for (size_t vo = 0; vo < dims.voxels(); ++vo) {
                    float sum = 0.0f;
                    std::vector<float> row(size_t(C), 0.0f);
                    for (auto& r : row) {
                        r = float(rng.uniform(0.05, 1.0));
                        sum += r;
                    }
                    for (int c = 0; c < C; ++c)
                        v.data[v.index(vo, c)] = double(float(row[size_t(c)] / sum));
                }
                write_volume(v, path);
                CHECK(std::get<ProbField>(read_volume(path)) == v);
                break;
            }
            case 4: {
                LabelVolume base = oracle::random_labels(
                    rng, {2 + int(rng.below(3)), 2 + int(rng.below(3)), 2}, C);
                FuzzyLabelVolume fz = fuzzify(base, 1, 0.5);
                // snap channels to f32 as the writer would
                for (auto* ch : {&fz.mu, &fz.nu, &fz.pi})
                    for (double& x : *ch) x = double(float(x));
                write_volume(fz, path);
                CHECK(std::get<FuzzyLabelVolume>(read_volume(path)) == fz);
                break;
            }
        }
    }
}

TEST_CASE("smallest label volume payload is one byte after the header") {
    const auto path = tmp_file("single.fvol");
    write_volume(make_labels({1, 1, 1}, 2), path);

    std::ifstream in(path, std::ios::binary);
    char magic[4];
    uint32_t n = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&n), 4);
    REQUIRE(in.good());
    CHECK(std::string(magic, 4) == "FVOL");
    const auto file_size = fs::file_size(path);
    CHECK(file_size == 8 + n + 1);
}

TEST_CASE("fuzzy payload is 3 float32 channels per voxel-class") {
    const auto path = tmp_file("fuzzy_layout.fvol");
    LabelVolume labels = make_labels({2, 2, 2}, 2);
    labels.data[0] = 1;
    const FuzzyLabelVolume fz = fuzzify(labels, 1, 0.5);
    write_volume(fz, path);

    std::ifstream in(path, std::ios::binary);
    char magic[4];
    uint32_t n = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&n), 4);
    REQUIRE(in.good());
    CHECK(fs::file_size(path) == 8 + n + 8u * 2u * 3u * 4u);
}

TEST_CASE("payload shorter than the header promises is CorruptPayload") {
    const auto path = tmp_file("truncated.fvol");
    write_volume(make_labels({2, 2, 2}, 2), path); // 8 voxels
    fs::resize_file(path, fs::file_size(path) - 1); // drop one payload byte
    CHECK_THROWS_AS(read_volume(path), CorruptPayload);
}

TEST_CASE("trailing bytes after the payload are CorruptPayload") {
    const auto path = tmp_file("trailing.fvol");
    write_volume(make_labels({2, 2, 2}, 2), path);
    std::ofstream app(path, std::ios::binary | std::ios::app);
    app << 'x';
    app.close();
    CHECK_THROWS_AS(read_volume(path), CorruptPayload);
}

TEST_CASE("label value equal to num_classes is InvariantViolation on read") {
    const auto path = tmp_file("badlabel.fvol");
    LabelVolume v = make_labels({2, 2, 2}, 2);
    write_volume(v, path);
    // patch the last payload byte to the out-of-range class id
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(-1, std::ios::end);
    const char two = 2;
    f.write(&two, 1);
    f.close();
    CHECK_THROWS_AS(read_volume(path), InvariantViolation);
}

TEST_CASE("writing an invalid ProbField fails before any bytes are written") {
    const auto path = tmp_file("never_created.fvol");
    std::error_code ec;
    fs::remove(path, ec);
    ProbField p;
    p.dims = {1, 1, 1};
    p.num_classes = 2;
    p.data = {0.9, 0.9}; // row sum 1.8
    CHECK_THROWS_AS(write_volume(p, path), InvariantViolation);
    CHECK_FALSE(fs::exists(path));
}

TEST_CASE("non-FVOL content is ParseError, missing file is IoError") {
    const auto path = tmp_file("not_fvol.bin");
    std::ofstream(path, std::ios::binary) << "definitely not a volume";
    CHECK_THROWS_AS(read_volume(path), ParseError);
    CHECK_THROWS_AS(read_volume(tmp_file("does_not_exist.fvol")), IoError);
}

TEST_CASE("header with unknown kind or wrong dtype is ParseError") {
    const auto path = tmp_file("badheader.fvol");
    const std::string header = R"({"kind":"labels","dims":[1,1,1],"classes":2,"dtype":"f32"})";
    std::ofstream out(path, std::ios::binary);
    out << "FVOL";
    const uint32_t n = uint32_t(header.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out << header << '\0';
    out.close();
    CHECK_THROWS_AS(read_volume(path), ParseError);
}

TEST_CASE("typed readers reject other kinds") {
    const auto path = tmp_file("typed.fvol");
    write_volume(make_labels({2, 2, 2}, 2), path);
    CHECK_THROWS_AS(read_scalar(path), ParseError);
    CHECK(read_labels(path).num_classes == 2);
}

TEST_CASE("extra header entries are accepted and ignored by the reader") {
    const auto path = tmp_file("extra.fvol");
    LabelVolume v = make_labels({2, 2, 2}, 3, 1);
    write_volume(v, path, nlohmann::json{{"config_hash", "deadbeef"}});
    CHECK(std::get<LabelVolume>(read_volume(path)) == v);
}
