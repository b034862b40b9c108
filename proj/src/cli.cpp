// SPDX-License-Identifier: Apache-2.0

#include "ifl/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ifl/fuzzy_label.hpp"
#include "ifl/gradcheck.hpp"
#include "ifl/synth.hpp"
#include "ifl/trainer.hpp"

namespace ifl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

json parse_json_file(const fs::path& path) {
    try {
        return json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw ParseError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::string config_hash(const json& canonical) { return fnv1a_hex(canonical.dump()); }

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

} // namespace

json analyze_trajectory(const TrainingTrajectory& traj) {
    const auto& rows = traj.rows;
    if (rows.empty()) throw InsufficientData("trajectory has no rows");
    const size_t n = rows.size();

    json out;
    out["rows"] = n;
    if (!traj.config_hash.empty()) out["trajectory_config_hash"] = traj.config_hash;

    const TrajectoryRow& last = rows.back();
    out["final"] = {{"t", last.t},
                    {"lambda", last.lambda},
                    {"loss_total", last.loss_total},
                    {"loss_dice", last.loss_dice},
                    {"loss_fuzzy", last.loss_fuzzy}};
    out["final"]["dice_per_class"] = last.dice_per_class;
    out["final"]["dice_mean"] = mean_of(last.dice_per_class);

    bool rho1_monotone = true;
    for (size_t i = 1; i < n; ++i)
        if (rows[i].rho1 < rows[i - 1].rho1) rho1_monotone = false;
    out["rho1"] = {{"initial", rows.front().rho1},
                   {"final", last.rho1},
                   {"monotone_nondecreasing", rho1_monotone},
                   {"net_increase", last.rho1 - rows.front().rho1}};

    std::vector<double> rho2_tail;
    for (size_t i = (3 * n) / 4; i < n; ++i) rho2_tail.push_back(rows[i].rho2);
    json rho2 = {{"initial", rows.front().rho2},
                 {"final", last.rho2},
                 {"net_decrease", last.rho2 < rows.front().rho2}};
    if (rho2_tail.size() >= 2) rho2["last_quartile_trend"] = linear_trend(rho2_tail);
    out["rho2"] = rho2;

    // quartile comparison of the Dice-loss column (curriculum handover)
    const size_t q = std::max<size_t>(1, n / 4);
    std::vector<double> dice_first, dice_last;
    for (size_t i = 0; i < q; ++i) dice_first.push_back(rows[i].loss_dice);
    for (size_t i = n - q; i < n; ++i) dice_last.push_back(rows[i].loss_dice);
    out["pareto"] = {{"dice_loss_first_quartile_mean", mean_of(dice_first)},
                     {"dice_loss_last_quartile_mean", mean_of(dice_last)},
                     {"last_le_first", mean_of(dice_last) <= mean_of(dice_first)}};

    std::vector<double> cos_first_decile;
    for (size_t i = 0; i < std::max<size_t>(1, n / 10); ++i)
        cos_first_decile.push_back(rows[i].grad_cos);
    out["grad_cos_first_decile_mean"] = mean_of(cos_first_decile);

    if (n >= 20) {
        const StabilityMetrics m = stability_metrics(traj);
        out["stability"] = {{"loss_variance_tail", m.loss_variance_tail},
                            {"max_step_jump", m.max_step_jump}};
    }
    return out;
}

namespace {

// --- train run configuration ---

struct RunConfig {
    json effective; ///< canonical config with defaults resolved
    std::string hash;

    bool use_synth = false;
    SynthSpec synth;
    fs::path labels_path, fuzzy_path, intensity_path, eval_labels_path;

    int fz_radius = 1;
    double fz_rho2 = 0.5;

    TrainConfig train;
    fs::path out_dir;
};

ScheduleKind schedule_kind_from(const std::string& s) {
    if (s == "exponential") return ScheduleKind::Exponential;
    if (s == "linear") return ScheduleKind::Linear;
    if (s == "constant") return ScheduleKind::Constant;
    if (s == "learnable-only") return ScheduleKind::LearnableOnly;
    throw InvalidParameter("unknown schedule kind: " + s);
}

const char* schedule_kind_name(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Exponential: return "exponential";
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::LearnableOnly: return "learnable-only";
    }
    return "?";
}

RunConfig parse_run_config(const json& j, const fs::path& cli_out_dir) {
    RunConfig cfg;
    try {
        if (j.contains("synth")) {
            cfg.use_synth = true;
            cfg.synth = spec_from_json(j.at("synth"));
        } else if (j.contains("data")) {
            const json& d = j.at("data");
            cfg.labels_path = d.at("labels").get<std::string>();
            if (d.contains("fuzzy")) cfg.fuzzy_path = d["fuzzy"].get<std::string>();
            if (d.contains("intensity"))
                cfg.intensity_path = d["intensity"].get<std::string>();
            if (d.contains("eval_labels"))
                cfg.eval_labels_path = d["eval_labels"].get<std::string>();
        } else {
            throw InvalidParameter("train config needs a \"synth\" or \"data\" section");
        }

        if (j.contains("fuzzify")) {
            cfg.fz_radius = j["fuzzify"].value("radius", 1);
            cfg.fz_rho2 = j["fuzzify"].value("rho2", 0.5);
        }

        TrainConfig& t = cfg.train;
        if (j.contains("train")) {
            const json& tj = j["train"];
            t.steps = tj.value("steps", t.steps);
            t.learning_rate = tj.value("learning_rate", t.learning_rate);
            const std::string model = tj.value("model", "per-voxel");
            if (model == "per-voxel")
                t.model = ModelKind::PerVoxel;
            else if (model == "tiny-conv")
                t.model = ModelKind::TinyConv;
            else
                throw InvalidParameter("unknown model kind: " + model);
            t.hidden_width = tj.value("hidden", t.hidden_width);
            t.seed = tj.value("seed", t.seed);
            t.record_every = tj.value("record_every", t.record_every);
            const std::string dice_target = tj.value("dice_target", "hard");
            if (dice_target == "hard")
                t.dice_soft_target = false;
            else if (dice_target == "soft")
                t.dice_soft_target = true;
            else
                throw InvalidParameter("dice_target must be \"hard\" or \"soft\"");
            t.dice_include_background =
                tj.value("dice_include_background", t.dice_include_background);
            t.dice_weight = tj.value("dice_weight", t.dice_weight);
            t.momentum = tj.value("momentum", t.momentum);
            if (tj.contains("rho_init")) {
                const auto& r = tj["rho_init"];
                t.rho_init1 = r.at(0).get<double>();
                t.rho_init2 = r.at(1).get<double>();
            }
        }

        CurriculumSchedule sched = CurriculumSchedule::default_exponential(t.steps);
        if (j.contains("schedule")) {
            const json& sj = j["schedule"];
            sched.kind = schedule_kind_from(sj.value("kind", "exponential"));
            sched.lambda0 = sj.value("lambda0", 1.0);
            if (sj.contains("alpha"))
                sched.alpha = sj["alpha"].get<double>();
            else
                sched.alpha = std::log(100.0) / double(t.steps);
            sched.t_end = sj.value("t_end", t.steps);
            sched.clamp_min = sj.value("clamp_min", 0.0);
        }
        t.schedule = sched;

        cfg.out_dir = !cli_out_dir.empty() ? cli_out_dir
                                           : fs::path(j.value("out_dir", "run_out"));
    } catch (const json::exception& e) {
        throw ParseError("invalid train config: " + std::string(e.what()));
    }

    // canonical effective config: every resolved knob, sorted keys
    json eff;
    if (cfg.use_synth)
        eff["synth"] = spec_to_json(cfg.synth);
    else {
        eff["data"] = {{"labels", cfg.labels_path.string()}};
        if (!cfg.fuzzy_path.empty()) eff["data"]["fuzzy"] = cfg.fuzzy_path.string();
        if (!cfg.intensity_path.empty())
            eff["data"]["intensity"] = cfg.intensity_path.string();
        if (!cfg.eval_labels_path.empty())
            eff["data"]["eval_labels"] = cfg.eval_labels_path.string();
    }
    eff["fuzzify"] = {{"radius", cfg.fz_radius}, {"rho2", cfg.fz_rho2}};
    const TrainConfig& t = cfg.train;
    eff["train"] = {
        {"steps", t.steps},
        {"learning_rate", t.learning_rate},
        {"model", t.model == ModelKind::PerVoxel ? "per-voxel" : "tiny-conv"},
        {"hidden", t.hidden_width},
        {"seed", t.seed},
        {"record_every", t.record_every},
        {"dice_target", t.dice_soft_target ? "soft" : "hard"},
        {"dice_include_background", t.dice_include_background},
        {"dice_weight", t.dice_weight},
        {"momentum", t.momentum},
        {"rho_init", {t.rho_init1, t.rho_init2}}};
    eff["schedule"] = {{"kind", schedule_kind_name(t.schedule.kind)},
                       {"lambda0", t.schedule.lambda0},
                       {"alpha", t.schedule.alpha},
                       {"t_end", t.schedule.t_end},
                       {"clamp_min", t.schedule.clamp_min}};
    cfg.effective = eff;
    cfg.hash = config_hash(eff);
    return cfg;
}

std::string pareto_csv(const TrainingTrajectory& traj, const std::string& hash) {
    std::ostringstream out;
    if (!hash.empty()) out << "# config_hash=" << hash << "\n";
    out << "t,loss_dice,loss_fuzzy\n";
    for (const ParetoPoint& p : pareto_trace(traj))
        out << p.t << ',' << format_g17(p.loss_dice) << ',' << format_g17(p.loss_fuzzy)
            << "\n";
    return out.str();
}

// --- commands ---

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
    const json spec_json = parse_json_file(spec_path);
    const SynthSpec spec = spec_from_json(spec_json);
    const std::string hash = config_hash(spec_to_json(spec));

    fs::create_directories(out_dir);
    const SynthResult res = generate(spec);
    const json extra = {{"config_hash", hash}};
    write_volume(res.clean, out_dir / "clean.fvol", extra);
    write_volume(res.corrupted, out_dir / "corrupted.fvol", extra);
    write_volume(res.intensity, out_dir / "intensity.fvol", extra);
    std::cout << "synth: wrote clean.fvol corrupted.fvol intensity.fvol to " << out_dir
              << " (config_hash=" << hash << ")\n";
    return 0;
}

int cmd_fuzzify(const fs::path& labels_path, const fs::path& out_path, int radius,
                double rho2) {
    const LabelVolume labels = read_labels(labels_path);
    const FuzzyLabelVolume fuzzy = fuzzify(labels, radius, rho2);
    const json eff = {{"command", "fuzzify"},
                      {"labels", labels_path.string()},
                      {"radius", radius},
                      {"rho2", rho2}};
    write_volume(fuzzy, out_path, json{{"config_hash", config_hash(eff)}});
    std::cout << "fuzzify: wrote " << out_path << "\n";
    return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& cli_out_dir) {
    const RunConfig cfg = parse_run_config(parse_json_file(config_path), cli_out_dir);

    LabelVolume labels;
    LabelVolume eval_labels;
    bool have_eval = false;
    ScalarField intensity;
    bool have_intensity = false;
    std::optional<FuzzyLabelVolume> fuzzy;

    if (cfg.use_synth) {
        SynthResult synth = generate(cfg.synth);
        labels = std::move(synth.corrupted);
        eval_labels = std::move(synth.clean);
        have_eval = true;
        intensity = std::move(synth.intensity);
        have_intensity = true;
    } else {
        labels = read_labels(cfg.labels_path);
        if (!cfg.fuzzy_path.empty()) fuzzy = read_fuzzy(cfg.fuzzy_path);
        if (!cfg.intensity_path.empty()) {
            intensity = read_scalar(cfg.intensity_path);
            have_intensity = true;
        }
        if (!cfg.eval_labels_path.empty()) {
            eval_labels = read_labels(cfg.eval_labels_path);
            have_eval = true;
        }
    }
    if (!fuzzy) fuzzy = fuzzify(labels, cfg.fz_radius, cfg.fz_rho2);

    TrainData data;
    data.labels = &labels;
    data.fuzzy = &*fuzzy;
    if (have_intensity) data.intensity = &intensity;
    if (have_eval) data.eval_labels = &eval_labels;

    TrainResult res = train(data, cfg.train);
    res.trajectory.config_hash = cfg.hash;

    fs::create_directories(cfg.out_dir);
    spill(cfg.out_dir / "trajectory.csv", res.trajectory.to_csv());
    spill(cfg.out_dir / "pareto.csv", pareto_csv(res.trajectory, cfg.hash));
    write_volume(res.logits, cfg.out_dir / "model.fvol", json{{"config_hash", cfg.hash}});

    json summary = analyze_trajectory(res.trajectory);
    summary["config_hash"] = cfg.hash;
    summary["config"] = cfg.effective;
    summary["rho_final"] = {res.rho.rho1(), res.rho.rho2()};
    spill(cfg.out_dir / "summary.json", summary.dump(2) + "\n");

    std::cout << "train: " << cfg.train.steps << " steps, final dice_mean="
              << format_g17(summary["final"]["dice_mean"].get<double>())
              << ", outputs in " << cfg.out_dir << " (config_hash=" << cfg.hash << ")\n";
    return 0;
}

int cmd_gradcheck(int samples, uint64_t seed, double perturb) {
    const GradCheckReport report = run_gradient_checks(samples, seed, perturb);
    std::cout << report.to_text();
    return report.all_pass() ? 0 : 1;
}

int cmd_landscape(double mu, double rho1, double rho2, int grid, const fs::path& out) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw InvalidParameter("mu must lie in [0,1]");
    if (!(rho1 > 0.0 && rho1 <= 1.0) || !(rho2 > 0.0 && rho2 <= 1.0))
        throw InvalidParameter("rho values must lie in (0,1]");
    if (grid < 1) throw InvalidParameter("grid must be >= 1");

    const json eff = {{"command", "landscape"},
                      {"mu", mu},
                      {"rho1", rho1},
                      {"rho2", rho2},
                      {"grid", grid}};
    std::ostringstream csv;
    csv << "# config_hash=" << config_hash(eff) << "\n";
    csv << "p,fuzzy_loss,fuzzy_grad,fuzzy_curvature,ce_loss,ce_grad,ce_curvature\n";
    for (int i = 0; i < grid; ++i) {
        const double p = double(i + 1) / double(grid + 1);
        csv << format_g17(p) << ',' << format_g17(fuzzy_term(p, mu, rho1, rho2)) << ','
            << format_g17(fuzzy_term_grad_p(p, mu, rho2)) << ','
            << format_g17(fuzzy_term_curvature(p, mu, rho2)) << ','
            << format_g17(ce_term(p, 1.0)) << ',' << format_g17(ce_term_grad(p, 1.0)) << ','
            << format_g17(ce_term_curvature(p, 1.0)) << "\n";
    }
    if (out.empty())
        std::cout << csv.str();
    else
        spill(out, csv.str());
    return 0;
}

int cmd_analyze(const fs::path& traj_path, const fs::path& baseline_path,
                const fs::path& out) {
    const TrainingTrajectory traj = TrainingTrajectory::from_csv(slurp(traj_path));
    json summary = analyze_trajectory(traj);
    json eff = {{"command", "analyze"}, {"trajectory", traj_path.string()}};
    if (!baseline_path.empty()) {
        eff["baseline"] = baseline_path.string();
        const TrainingTrajectory base = TrainingTrajectory::from_csv(slurp(baseline_path));
        summary["baseline"] = analyze_trajectory(base);
        if (traj.rows.size() >= 20 && base.rows.size() >= 20) {
            const double v_run = stability_metrics(traj).loss_variance_tail;
            const double v_base = stability_metrics(base).loss_variance_tail;
            summary["variance_ratio"] = v_base > 0.0
                                            ? v_run / v_base
                                            : std::numeric_limits<double>::infinity();
        }
    }
    summary["config_hash"] = config_hash(eff);
    const std::string text = summary.dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        spill(out, text);
    return 0;
}

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"intuitionistic fuzzy label workbench"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads (1 = bit-exact mode)")
        ->check(CLI::PositiveNumber);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark volume set");
    std::string synth_spec, synth_out;
    synth->add_option("spec", synth_spec, "synth spec JSON")->required();
    synth->add_option("out_dir", synth_out, "output directory for FVOL files")->required();

    // fuzzify
    auto* fz = app.add_subcommand("fuzzify", "build intuitionistic fuzzy labels");
    std::string fz_in, fz_out;
    int fz_radius = 1;
    double fz_rho2 = 0.5;
    fz->add_option("labels", fz_in, "crisp labels FVOL")->required();
    fz->add_option("out", fz_out, "output fuzzy FVOL")->required();
    fz->add_option("--radius", fz_radius, "Chebyshev neighborhood radius");
    fz->add_option("--rho2", fz_rho2, "non-membership scaling in (0,1]");

    // train
    auto* tr = app.add_subcommand("train", "run a curriculum training experiment");
    std::string tr_config, tr_out;
    tr->add_option("config", tr_config, "run config JSON")->required();
    tr->add_option("--out", tr_out, "output directory (overrides config out_dir)");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "verify analytic derivatives");
    int gc_samples = 200;
    uint64_t gc_seed = 7;
    double gc_perturb = 0.0;
    gc->add_option("--samples", gc_samples, "random instances per family");
    gc->add_option("--seed", gc_seed, "RNG seed");
    gc->add_option("--perturb", gc_perturb,
                   "test hook: bias analytic values to force failure");

    // landscape
    auto* ls = app.add_subcommand("landscape", "tabulate fuzzy vs CE loss landscape");
    double ls_mu = 0.5, ls_rho1 = 1.0, ls_rho2 = 1.0;
    int ls_grid = 99;
    std::string ls_out;
    ls->add_option("--mu", ls_mu, "membership degree")->required();
    ls->add_option("--rho1", ls_rho1, "logit-penalty scale in (0,1]");
    ls->add_option("--rho2", ls_rho2, "soft-label credibility in (0,1]");
    ls->add_option("--grid", ls_grid, "number of interior p samples");
    ls->add_option("--out", ls_out, "output CSV (stdout when absent)");

    // analyze
    auto* an = app.add_subcommand("analyze", "summarize a trajectory CSV");
    std::string an_traj, an_base, an_out;
    an->add_option("trajectory", an_traj, "trajectory CSV")->required();
    an->add_option("--baseline", an_base, "baseline trajectory CSV for paired metrics");
    an->add_option("--out", an_out, "output JSON (stdout when absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    set_threads(threads);

    if (*synth) return cmd_synth(synth_spec, synth_out);
    if (*fz) return cmd_fuzzify(fz_in, fz_out, fz_radius, fz_rho2);
    if (*tr) return cmd_train(tr_config, tr_out);
    if (*gc) return cmd_gradcheck(gc_samples, gc_seed, gc_perturb);
    if (*ls) return cmd_landscape(ls_mu, ls_rho1, ls_rho2, ls_grid, ls_out);
    if (*an) return cmd_analyze(an_traj, an_base, an_out);
    return 2;
}

} // namespace

int run(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const CorruptPayload& e) {
        std::cerr << "corrupt payload: " << e.what() << "\n";
        return 2;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 2;
    } catch (const InvalidParameter& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return 2;
    } catch (const InvalidSpec& e) {
        std::cerr << "invalid spec: " << e.what() << "\n";
        return 2;
    } catch (const ShapeMismatch& e) {
        std::cerr << "shape mismatch: " << e.what() << "\n";
        return 2;
    } catch (const NonFiniteInput& e) {
        std::cerr << "non-finite input: " << e.what() << "\n";
        return 2;
    } catch (const InvalidTarget& e) {
        std::cerr << "invalid target: " << e.what() << "\n";
        return 2;
    } catch (const InvalidStep& e) {
        std::cerr << "invalid step: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateVolume& e) {
        std::cerr << "degenerate volume: " << e.what() << "\n";
        return 2;
    } catch (const InsufficientData& e) {
        std::cerr << "insufficient data: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("iflab");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& a : full) argv.push_back(a.c_str());
    return run(int(argv.size()), argv.data());
}

} // namespace ifl::cli
