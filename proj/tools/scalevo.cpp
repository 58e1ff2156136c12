// Command-line front end: simulate, estimate, correct, evaluate.

#include "scalevo/drift_correction.hpp"
#include "scalevo/errors.hpp"
#include "scalevo/eval_io.hpp"
#include "scalevo/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace scalevo;

namespace {

AppConfig load_config(const std::string& path) {
    if (path.empty()) {
        std::istringstream empty;
        return parse_config(empty, "<defaults>");
    }
    return read_config(path);
}

// Writes to the file when a path is given, to stdout otherwise.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
    fn(out);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
    return in;
}

SpeedMode parse_speed(const std::string& s) {
    if (s == "low") return SpeedMode::Low;
    if (s == "high") return SpeedMode::High;
    throw Error(ErrorKind::Config, "speed must be low or high");
}

struct SimulateArgs {
    std::string mode = "sweep";
    std::vector<double> sigmas;
    int trials = 200;
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
    std::size_t frames = 1000;
    double drift = 1.001;
    std::string speed = "low";
    std::string out_dir = ".";
};

int run_simulate(const SimulateArgs& a) {
    const AppConfig cfg = load_config(a.config);
    const std::uint64_t seed = a.seed.value_or(cfg.seed);
    if (a.mode == "sweep") {
        SweepConfig sweep;
        if (!a.sigmas.empty()) sweep.sigmas = a.sigmas;
        sweep.trials = a.trials;
        sweep.seed = seed;
        sweep.base.K = cfg.camera();
        sweep.base.h_true = cfg.h_true;
        sweep.estimator = cfg.estimator;
        const auto rows = run_noise_sweep(sweep);
        emit(a.out, [&](std::ostream& os) { write_sweep_csv(os, rows); });
        return 0;
    }
    if (a.mode != "drift") throw Error(ErrorKind::Config, "mode must be sweep or drift");

    SynthConfig sc;
    sc.K = cfg.camera();
    sc.h_true = cfg.h_true;
    sc.noise_sigma = a.sigmas.empty() ? 0.5 : a.sigmas.front();
    sc.speed_mode = parse_speed(a.speed);
    sc.seed = seed;
    const auto traj = simulate_drifting_trajectory(a.frames, a.drift, sc);

    fs::create_directories(a.out_dir);
    write_kitti_poses(fs::path(a.out_dir) / "gt_poses.txt", {traj.ground_truth});
    write_kitti_poses(fs::path(a.out_dir) / "vo_poses.txt", {traj.vo});
    std::vector<FrameCorrespondences> frames;
    for (std::size_t k = 1; k < traj.pairs.size(); ++k) {
        FrameCorrespondences fc;
        fc.frame = static_cast<std::int64_t>(k);
        fc.roi = traj.pairs[k].corrs_roi;
        fc.all = traj.pairs[k].corrs_all;
        frames.push_back(std::move(fc));
    }
    std::ofstream corr(fs::path(a.out_dir) / "corrs.csv");
    if (!corr) throw Error(ErrorKind::InvalidInput, "cannot write corrs.csv");
    write_correspondences_csv(corr, frames);
    std::cerr << "wrote gt_poses.txt, vo_poses.txt, corrs.csv to " << a.out_dir << '\n';
    return 0;
}

int run_estimate(const std::string& corrs_path, const std::string& config, const std::string& out) {
    const AppConfig cfg = load_config(config);
    auto in = open_input(corrs_path);
    const auto frames = parse_correspondences_csv(in, corrs_path);
    const CameraIntrinsics K = cfg.camera();
    std::vector<FrameScale> scales;
    for (const auto& fc : frames) {
        EstimatorConfig est = cfg.estimator;
        est.essential.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(fc.frame), 1);
        est.homography.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(fc.frame), 2);
        FrameScale fs_;
        fs_.frame = fc.frame;
        if (!fc.roi.empty())
            fs_.estimate = gated_frame_estimate(fc.all, fc.roi, K, cfg.h_true, cfg.prior_n, est,
                                                cfg.gate);
        scales.push_back(fs_);
    }
    emit(out, [&](std::ostream& os) { write_scales_csv(os, scales); });
    return 0;
}

int run_correct(const std::string& poses_path, const std::string& scales_path,
                const std::string& config, const std::string& out, const std::string& log_path) {
    const AppConfig cfg = load_config(config);
    const Trajectory vo = read_kitti_poses(poses_path);
    auto in = open_input(scales_path);
    const auto scales = parse_scales_csv(in, scales_path);
    std::vector<FrameMeasurement> meas(vo.size());
    for (const auto& s : scales) {
        if (s.frame < 1 || static_cast<std::size_t>(s.frame) >= vo.size()) {
            throw Error(ErrorKind::Alignment,
                        "scale for frame " + std::to_string(s.frame) + " is outside the trajectory");
        }
        if (s.estimate) meas[static_cast<std::size_t>(s.frame)].plane = s.estimate->plane;
    }
    const auto result = run_correction_loop(vo.poses, meas, cfg.correction());
    emit(out, [&](std::ostream& os) { write_kitti_poses(os, {result.trajectory}); });
    emit(log_path, [&](std::ostream& os) { write_trigger_log(os, result.log); });
    return 0;
}

int run_evaluate(const std::string& est_path, const std::string& gt_path,
                 const std::string& scales_path, const std::vector<double>& lengths,
                 const std::string& out) {
    const Trajectory est = read_kitti_poses(est_path);
    const Trajectory gt = read_kitti_poses(gt_path);
    const auto seg = kitti_segment_errors(est, gt, lengths);
    std::optional<ScaleErrorStats> stats;
    if (!scales_path.empty()) {
        auto in = open_input(scales_path);
        const auto scales = parse_scales_csv(in, scales_path);
        const auto gt_scales = ground_truth_scales(gt);
        std::vector<std::optional<double>> aligned(gt_scales.size());
        for (const auto& s : scales) {
            if (s.frame < 1 || static_cast<std::size_t>(s.frame) > gt_scales.size()) {
                throw Error(ErrorKind::Alignment, "scale for frame " + std::to_string(s.frame) +
                                                      " is outside the trajectory");
            }
            if (s.estimate) aligned[static_cast<std::size_t>(s.frame) - 1] = s.estimate->s;
        }
        stats = scale_error_stats(aligned, gt_scales);
    }
    emit(out, [&](std::ostream& os) { os << evaluation_report_json(seg, stats, gt.size()) << '\n'; });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ground-plane absolute scale estimation and drift correction for monocular VO"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "noise sweep or drifting trajectory");
    simulate->add_option("--mode", sim.mode, "sweep or drift")->check(CLI::IsMember({"sweep", "drift"}));
    simulate->add_option("--sigma", sim.sigmas, "ground noise levels in pixels (drift uses the first)");
    simulate->add_option("--trials", sim.trials, "trials per sweep cell")->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim.seed, "base seed (default: config seed)");
    simulate->add_option("--config", sim.config, "key=value config file")->check(CLI::ExistingFile);
    simulate->add_option("--out", sim.out, "sweep CSV path (default stdout)");
    simulate->add_option("--frames", sim.frames, "drift: number of frame steps");
    simulate->add_option("--drift", sim.drift, "drift: multiplicative scale drift per frame");
    simulate->add_option("--speed", sim.speed, "drift: low or high")->check(CLI::IsMember({"low", "high"}));
    simulate->add_option("--out-dir", sim.out_dir, "drift: output directory");

    std::string corrs, config_e, out_e;
    auto* estimate = app.add_subcommand("estimate", "per-frame scales from correspondences");
    estimate->add_option("--corrs", corrs, "correspondence CSV")->required()->check(CLI::ExistingFile);
    estimate->add_option("--config", config_e, "key=value config file")->check(CLI::ExistingFile);
    estimate->add_option("--out", out_e, "scales CSV path (default stdout)");

    std::string poses, scales_c, config_c, out_c, log_c;
    auto* correct = app.add_subcommand("correct", "drift correction of a VO trajectory");
    correct->add_option("--poses", poses, "VO poses, KITTI format")->required()->check(CLI::ExistingFile);
    correct->add_option("--scales", scales_c, "scales CSV from estimate")->required()->check(CLI::ExistingFile);
    correct->add_option("--config", config_c, "key=value config file")->check(CLI::ExistingFile);
    correct->add_option("--out", out_c, "corrected poses (default stdout)");
    correct->add_option("--log", log_c, "trigger log path (default stdout)");

    std::string est_path, gt_path, scales_v, out_v;
    std::vector<double> lengths = kKittiSegmentLengths;
    auto* evaluate = app.add_subcommand("evaluate", "segment and scale errors as JSON");
    evaluate->add_option("--est", est_path, "estimated poses")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--gt", gt_path, "ground-truth poses")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--scales", scales_v, "scales CSV to score against ground truth")->check(CLI::ExistingFile);
    evaluate->add_option("--lengths", lengths, "segment lengths in meters")->delimiter(',');
    evaluate->add_option("--out", out_v, "report path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) return run_simulate(sim);
        if (*estimate) return run_estimate(corrs, config_e, out_e);
        if (*correct) return run_correct(poses, scales_c, config_c, out_c, log_c);
        if (*evaluate) return run_evaluate(est_path, gt_path, scales_v, lengths, out_v);
    } catch (const Error& e) {
        std::cerr << "scalevo: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "scalevo: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
