// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ifl/cli.hpp"
#include "ifl/synth.hpp"
#include "ifl/trainer.hpp"
#include "ifl/volume.hpp"

using namespace ifl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path tmp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "ifl_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

json small_train_config(uint64_t seed, int64_t steps) {
    return json{
        {"synth",
         {{"dims", {8, 8, 8}},
          {"classes", 2},
          {"shape", "sphere"},
          {"center", {4.0, 4.0, 4.0}},
          {"radius", 2.5},
          {"noise", {{"slice_flip_prob", 0.2}, {"boundary_jitter_voxels", 1}}},
          {"intensity", {{"class_means", {0.0, 1.0}}, {"sigma", 0.1}}},
          {"seed", seed}}},
        {"fuzzify", {{"radius", 1}, {"rho2", 0.5}}},
        {"train", {{"steps", steps}, {"learning_rate", 0.5}, {"seed", seed}}},
    };
}

} // namespace

TEST_CASE("cmd_synth writes three matching volumes deterministically") {
    const fs::path dir = tmp_dir("synth");
    const json spec = spec_to_json(SynthSpec::default_benchmark(42));
    spill(dir / "spec.json", spec.dump());

    CHECK(cli::run({"synth", (dir / "spec.json").string(), (dir / "a").string()}) == 0);
    CHECK(cli::run({"synth", (dir / "spec.json").string(), (dir / "b").string()}) == 0);
    for (const char* name : {"clean.fvol", "corrupted.fvol", "intensity.fvol"}) {
        CHECK(fs::exists(dir / "a" / name));
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    const LabelVolume clean = read_labels(dir / "a" / "clean.fvol");
    CHECK(clean.dims == Dims{16, 16, 16});
}

TEST_CASE("cmd_synth rejects empty dims with exit 2") {
    const fs::path dir = tmp_dir("synth_bad");
    json spec = spec_to_json(SynthSpec::default_benchmark(1));
    spec["dims"] = {0, 0, 0};
    spill(dir / "spec.json", spec.dump());
    CHECK(cli::run({"synth", (dir / "spec.json").string(), (dir / "out").string()}) == 2);
}

TEST_CASE("cmd_fuzzify produces all-ones membership on a uniform volume") {
    const fs::path dir = tmp_dir("fuzzify");
    LabelVolume labels;
    labels.dims = {4, 4, 4};
    labels.num_classes = 2;
    labels.data.assign(64, 1);
    write_volume(labels, dir / "labels.fvol");

    CHECK(cli::run({"fuzzify", (dir / "labels.fvol").string(), (dir / "fz.fvol").string(),
                    "--radius", "1", "--rho2", "0.5"}) == 0);
    const FuzzyLabelVolume fz = read_fuzzy(dir / "fz.fvol");
    for (size_t v = 0; v < fz.dims.voxels(); ++v) CHECK(fz.mu[fz.index(v, 1)] == 1.0);

    CHECK(cli::run({"fuzzify", (dir / "labels.fvol").string(), (dir / "fz2.fvol").string(),
                    "--rho2", "1.5"}) == 2);
}

TEST_CASE("cmd_train writes the four outputs and reruns byte-identically") {
    const fs::path dir = tmp_dir("train");
    spill(dir / "config.json", small_train_config(5, 40).dump());

    CHECK(cli::run({"train", (dir / "config.json").string(), "--out",
                    (dir / "run1").string()}) == 0);
    CHECK(cli::run({"train", (dir / "config.json").string(), "--out",
                    (dir / "run2").string()}) == 0);

    for (const char* name : {"trajectory.csv", "pareto.csv", "model.fvol", "summary.json"}) {
        CHECK(fs::exists(dir / "run1" / name));
        CHECK(slurp(dir / "run1" / name) == slurp(dir / "run2" / name));
    }

    const json summary = json::parse(slurp(dir / "run1" / "summary.json"));
    CHECK(summary.at("rows").get<int>() == 40);
    CHECK(summary.at("config_hash").get<std::string>().size() == 16);
    const std::string csv = slurp(dir / "run1" / "trajectory.csv");
    CHECK(csv.rfind("# config_hash=" + summary["config_hash"].get<std::string>(), 0) == 0);

    // reordered JSON keys hash identically
    spill(dir / "reordered.json",
          json::parse(small_train_config(5, 40).dump()).dump(4));
    CHECK(cli::run({"train", (dir / "reordered.json").string(), "--out",
                    (dir / "run3").string()}) == 0);
    CHECK(slurp(dir / "run3" / "summary.json") == slurp(dir / "run1" / "summary.json"));
}

TEST_CASE("cmd_train with one step emits a single trajectory row") {
    const fs::path dir = tmp_dir("train_one");
    spill(dir / "config.json", small_train_config(6, 1).dump());
    CHECK(cli::run({"train", (dir / "config.json").string(), "--out",
                    (dir / "run").string()}) == 0);
    const TrainingTrajectory traj =
        TrainingTrajectory::from_csv(slurp(dir / "run" / "trajectory.csv"));
    CHECK(traj.rows.size() == 1);
    CHECK(traj.rows[0].t == 0);
}

TEST_CASE("clean lambda-zero training reaches near-perfect dice via the CLI") {
    const fs::path dir = tmp_dir("train_clean");
    json cfg = small_train_config(7, 150);
    cfg["synth"]["noise"] = {{"slice_flip_prob", 0.0}, {"boundary_jitter_voxels", 0}};
    cfg["schedule"] = {{"kind", "constant"}, {"lambda0", 0.0}};
    spill(dir / "config.json", cfg.dump());
    CHECK(cli::run({"train", (dir / "config.json").string(), "--out",
                    (dir / "run").string()}) == 0);
    const json summary = json::parse(slurp(dir / "run" / "summary.json"));
    CHECK(summary["final"]["dice_mean"].get<double>() > 0.99);
}

TEST_CASE("cmd_gradcheck passes clean, fails when perturbed, rejects zero samples") {
    CHECK(cli::run({"gradcheck", "--samples", "40", "--seed", "11"}) == 0);
    CHECK(cli::run({"gradcheck", "--samples", "40", "--seed", "11", "--perturb",
                    "1e-3"}) == 1);
    CHECK(cli::run({"gradcheck", "--samples", "0"}) == 2);
}

TEST_CASE("cmd_landscape degenerates to cross-entropy at mu=1, rho=1") {
    const fs::path dir = tmp_dir("landscape");
    CHECK(cli::run({"landscape", "--mu", "1.0", "--rho1", "1.0", "--rho2", "1.0",
                    "--grid", "25", "--out", (dir / "grid.csv").string()}) == 0);
    std::istringstream in(slurp(dir / "grid.csv"));
    std::string line;
    std::getline(in, line); // hash comment
    std::getline(in, line); // header
    CHECK(line == "p,fuzzy_loss,fuzzy_grad,fuzzy_curvature,ce_loss,ce_grad,ce_curvature");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::vector<double> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
        REQUIRE(cells.size() == 7);
        CHECK(cells[1] == doctest::Approx(cells[4]).epsilon(1e-12));
        CHECK(cells[2] == doctest::Approx(cells[5]).epsilon(1e-12));
        CHECK(cells[3] == doctest::Approx(cells[6]).epsilon(1e-12));
    }
    CHECK(rows == 25);
}

TEST_CASE("cmd_landscape locates the gradient zero crossing") {
    const fs::path dir = tmp_dir("landscape_cross");
    // mu = 0.65, rho2 = 0.5: p* = 0.65/0.825 = 0.7878..; grid of 99
    // points at p = i/100 must switch sign between 0.78 and 0.79
    CHECK(cli::run({"landscape", "--mu", "0.65", "--rho2", "0.5", "--rho1", "0.5",
                    "--grid", "99", "--out", (dir / "grid.csv").string()}) == 0);
    std::istringstream in(slurp(dir / "grid.csv"));
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    double prev_p = 0.0, prev_g = 0.0;
    double cross_lo = -1.0, cross_hi = -1.0;
    bool first = true;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
        if (!first && prev_g < 0.0 && cells[2] >= 0.0) {
            cross_lo = prev_p;
            cross_hi = cells[0];
        }
        prev_p = cells[0];
        prev_g = cells[2];
        first = false;
    }
    CHECK(cross_lo == doctest::Approx(0.78).epsilon(1e-12));
    CHECK(cross_hi == doctest::Approx(0.79).epsilon(1e-12));
}

TEST_CASE("cmd_landscape single-point grid lands at p = 0.5") {
    const fs::path dir = tmp_dir("landscape_one");
    CHECK(cli::run({"landscape", "--mu", "0.5", "--grid", "1", "--out",
                    (dir / "one.csv").string()}) == 0);
    std::istringstream in(slurp(dir / "one.csv"));
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(line.substr(0, line.find(',')) == "0.5");
    }
    CHECK(rows == 1);
}

TEST_CASE("cmd_analyze summarizes a run and flags non-monotone rho1") {
    const fs::path dir = tmp_dir("analyze");
    spill(dir / "config.json", small_train_config(9, 60).dump());
    REQUIRE(cli::run({"train", (dir / "config.json").string(), "--out",
                      (dir / "run").string()}) == 0);

    CHECK(cli::run({"analyze", (dir / "run" / "trajectory.csv").string(), "--out",
                    (dir / "summary.json").string()}) == 0);
    const json summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary["rho1"]["monotone_nondecreasing"].get<bool>());
    CHECK(summary["stability"].contains("loss_variance_tail"));

    // doctored trajectory with decreasing rho1 trips the flag
    TrainingTrajectory fake;
    fake.num_classes = 2;
    for (int i = 0; i < 30; ++i) {
        TrajectoryRow r;
        r.t = i;
        r.rho1 = 0.9 - 0.01 * i;
        r.rho2 = 0.5;
        r.loss_total = 1.0;
        r.dice_per_class = {0.5};
        fake.rows.push_back(r);
    }
    spill(dir / "fake.csv", fake.to_csv());
    CHECK(cli::run({"analyze", (dir / "fake.csv").string(), "--out",
                    (dir / "fake.json").string()}) == 0);
    CHECK_FALSE(json::parse(slurp(dir / "fake.json"))["rho1"]["monotone_nondecreasing"]
                    .get<bool>());

    // paired mode emits a variance ratio
    CHECK(cli::run({"analyze", (dir / "run" / "trajectory.csv").string(), "--baseline",
                    (dir / "fake.csv").string(), "--out",
                    (dir / "paired.json").string()}) == 0);
    CHECK(json::parse(slurp(dir / "paired.json")).contains("variance_ratio"));
}

TEST_CASE("missing files and unknown flags map to the documented exit codes") {
    CHECK(cli::run({"analyze", "/nonexistent/trajectory.csv"}) == 3);
    CHECK(cli::run({"train", "/nonexistent/config.json"}) == 3);
    CHECK(cli::run({"landscape", "--mu", "2.0"}) == 2);     // out of range
    CHECK(cli::run({"landscape"}) == 2);                    // missing required flag
    CHECK(cli::run({"definitely-not-a-command"}) == 2);
}
