#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "cf3d/config.hpp"
#include "cf3d/image_io.hpp"
#include "cf3d/metrics.hpp"
#include "cf3d/path_fit.hpp"
#include "cf3d/pipeline.hpp"
#include "cf3d/ply.hpp"
#include "cf3d/synth.hpp"
#include "cf3d/trajectory_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cf3d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Dataset {
    CameraIntrinsics k;
    std::vector<int> indices;
    std::vector<Image> frames;
    std::vector<Image> depths;
    Trajectory gt;  // may be empty
};

CameraIntrinsics load_intrinsics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("missing intrinsics file: " + path.string());
    json j;
    in >> j;
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    if (!k.valid()) throw std::invalid_argument("invalid intrinsics in " + path.string());
    return k;
}

Dataset load_dataset(const std::string& dir) {
    Dataset ds;
    ds.k = load_intrinsics(fs::path(dir) / "intrinsics.json");
    fs::path frames_dir = fs::path(dir) / "frames";
    if (!fs::is_directory(frames_dir))
        throw std::invalid_argument("malformed dataset: missing " + frames_dir.string());
    std::vector<int> indices;
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
        if (entry.path().extension() != ".png") continue;
        indices.push_back(std::stoi(entry.path().stem().string()));
    }
    std::sort(indices.begin(), indices.end());
    if (indices.size() < 2)
        throw std::invalid_argument("malformed dataset: need at least 2 frames in " + dir);
    char name[32];
    for (int i : indices) {
        std::snprintf(name, sizeof(name), "%04d.png", i);
        ds.frames.push_back(read_png((frames_dir / name).string()));
        std::snprintf(name, sizeof(name), "%04d.pfm", i);
        fs::path dpath = fs::path(dir) / "depth" / name;
        if (!fs::exists(dpath))
            throw std::invalid_argument("malformed dataset: missing " + dpath.string());
        ds.depths.push_back(read_pfm(dpath.string()));
        ds.indices.push_back(i);
    }
    fs::path gt = fs::path(dir) / "gt_trajectory.txt";
    if (fs::exists(gt)) ds.gt = load_trajectory_tum(gt.string());
    return ds;
}

// Every-8th split held out, starting at the 5th image (index offset 4).
bool is_test_frame(int position, const std::string& split) {
    if (split == "none") return false;
    if (split == "every8") return position >= 4 && (position - 4) % 8 == 0;
    throw std::invalid_argument("unknown --split value: " + split);
}

struct SplitDataset {
    std::vector<Image> frames, depths;
    std::vector<int> indices;
    std::vector<size_t> train_rows, test_rows;
};

SplitDataset apply_split(const Dataset& ds, const std::string& split) {
    SplitDataset out;
    for (size_t row = 0; row < ds.indices.size(); ++row) {
        if (is_test_frame(int(row), split)) {
            out.test_rows.push_back(row);
        } else {
            out.train_rows.push_back(row);
            out.frames.push_back(ds.frames[row]);
            out.depths.push_back(ds.depths[row]);
            out.indices.push_back(ds.indices[row]);
        }
    }
    return out;
}

SE3 nearest_training_pose(const SceneState& st, const Vec3d& position) {
    double best = std::numeric_limits<double>::infinity();
    SE3 init = SE3::identity();
    for (size_t j = 0; j < st.trajectory.size(); ++j) {
        double d = (st.trajectory[j].cam_to_world.t - position).norm();
        if (d < best) {
            best = d;
            init = st.world_to_cam[j];
        }
    }
    return init;
}

int run_synth(const RunConfig& cfg, const std::string& out_dir) {
    GaussianCloud scene = make_scene(cfg.synth.scene, cfg.synth.n_gaussians, cfg.synth.seed);
    Trajectory traj =
        make_trajectory(cfg.synth.trajectory, cfg.synth.n_frames, cfg.synth.traj);
    CameraIntrinsics k = CameraIntrinsics::from_fov(
        cfg.synth.width, cfg.synth.height, cfg.synth.fov_x_deg * 3.14159265358979323846 / 180.0);
    BakedSequence baked =
        bake_frames(scene, traj, k, cfg.synth.depth_noise_sigma, cfg.synth.seed);
    for (const std::string& w : baked.warnings) std::cerr << "warning: " << w << "\n";
    write_dataset(out_dir, scene, traj, k, baked);
    save_config((fs::path(out_dir) / "config.json").string(), cfg);
    std::cerr << "wrote " << baked.frames.size() << " frames to " << out_dir << "\n";
    return kExitOk;
}

int run_fit(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir,
            const std::string& resume, const std::string& split) {
    Dataset ds = load_dataset(data_dir);
    SplitDataset sp = apply_split(ds, split);
    fs::create_directories(out_dir);
    fs::path pose_log_path = fs::path(out_dir) / "pose_logs.csv";
    std::ofstream pose_log(pose_log_path);
    pose_log << "iteration,loss,dq,dt\n";

    RunResult run = run_sequence(sp.frames, sp.depths, sp.indices, ds.k, cfg.pipeline, out_dir,
                                 resume, &pose_log);
    for (const std::string& w : run.warnings) std::cerr << "warning: " << w << "\n";

    json report;
    report["config"] = to_json(cfg);
    report["split"] = split;
    report["gaussians"] = run.state.global_cloud.size();
    report["warnings"] = run.warnings;
    json frames = json::array();
    for (const FrameReport& r : run.state.reports) {
        frames.push_back({{"frame", r.frame_index},
                          {"pose_flag", int(r.pose_flag)},
                          {"pose_loss", r.pose_loss},
                          {"pose_iterations", r.pose_iterations},
                          {"global_loss", r.global_loss},
                          {"gaussians", r.gaussians},
                          {"seconds", r.seconds}});
        std::cerr << "frame " << r.frame_index << ": pose_loss " << r.pose_loss << " gaussians "
                  << r.gaussians << " (" << r.seconds << "s)\n";
    }
    report["frames"] = frames;
    std::ofstream(fs::path(out_dir) / "report.json") << report.dump(2) << "\n";
    save_config((fs::path(out_dir) / "config.json").string(), cfg);
    save_checkpoint(run.state, (fs::path(out_dir) / "final_checkpoint").string());
    return kExitOk;
}

int run_eval(const RunConfig& cfg, const std::string& data_dir, const std::string& run_dir,
             const std::string& split, const std::string& out_path) {
    Dataset ds = load_dataset(data_dir);
    if (ds.gt.empty()) throw std::invalid_argument("eval: dataset has no gt_trajectory.txt");
    SplitDataset sp = apply_split(ds, split);

    Trajectory est = load_trajectory_tum((fs::path(run_dir) / "trajectory.txt").string());
    GaussianCloud cloud = load_ply((fs::path(run_dir) / "scene.ply").string());
    if (est.size() != sp.train_rows.size())
        throw std::invalid_argument("eval: trajectory length does not match the training split");

    Trajectory gt_train;
    for (size_t row : sp.train_rows) gt_train.push_back(ds.gt[row]);

    Alignment al = umeyama_align(est, gt_train);
    double ate_val = ate(al.aligned, gt_train);
    RpeResult rp = rpe(est, gt_train);

    SceneState view_state;
    view_state.trajectory = est;
    for (const TrajectoryEntry& e : est) view_state.world_to_cam.push_back(inverse(e.cam_to_world));

    json views = json::array();
    double psnr_sum = 0, ssim_sum = 0;
    for (size_t row : sp.test_rows) {
        SE3 init = nearest_training_pose(view_state, ds.gt[row].cam_to_world.t);
        PoseEstimate est_pose =
            fit_test_pose(cloud, ds.frames[row], init, ds.k, cfg.pipeline.local);
        RenderOptions ro;
        ro.background = cfg.pipeline.local.background;
        RenderOutput out = render(cloud, est_pose.relative, ds.k, ro);
        double p = psnr(out.color, ds.frames[row]);
        double s = ssim(out.color, ds.frames[row]);
        psnr_sum += p;
        ssim_sum += s;
        views.push_back({{"frame", ds.indices[row]},
                         {"PSNR", p},
                         {"SSIM", s},
                         {"pose_loss", est_pose.final_loss},
                         {"diverged", est_pose.diverged}});
        std::cerr << "test frame " << ds.indices[row] << ": PSNR " << p << " SSIM " << s << "\n";
    }

    json report;
    report["ATE"] = ate_val;
    report["RPE_t"] = rp.rpe_trans;
    report["RPE_r"] = rp.rpe_rot;
    report["alignment_scale"] = al.scale;
    if (!sp.test_rows.empty()) {
        report["PSNR"] = psnr_sum / double(sp.test_rows.size());
        report["SSIM"] = ssim_sum / double(sp.test_rows.size());
    }
    report["views"] = views;
    std::ofstream(out_path) << report.dump(2) << "\n";
    std::cerr << "ATE " << ate_val << " RPE_t " << rp.rpe_trans << " RPE_r " << rp.rpe_rot
              << "\n";
    return kExitOk;
}

int run_render_path(const RunConfig& cfg, const std::string& run_dir,
                    const std::string& data_dir, int samples, const std::string& out_dir) {
    Trajectory est = load_trajectory_tum((fs::path(run_dir) / "trajectory.txt").string());
    GaussianCloud cloud = load_ply((fs::path(run_dir) / "scene.ply").string());
    CameraIntrinsics k = load_intrinsics(fs::path(data_dir) / "intrinsics.json");
    PathFitResult path = fit_trajectory_path(est, samples);
    if (path.linear_fallback)
        std::cerr << "warning: fewer than 4 poses, falling back to linear interpolation\n";
    fs::create_directories(out_dir);
    RenderOptions ro;
    ro.background = cfg.pipeline.local.background;
    char name[32];
    for (size_t i = 0; i < path.poses.size(); ++i) {
        RenderOutput out = render(cloud, inverse(path.poses[i]), k, ro);
        std::snprintf(name, sizeof(name), "%04zu.png", i);
        write_png((fs::path(out_dir) / name).string(), out.color);
    }
    std::cerr << "rendered " << path.poses.size() << " path views to " << out_dir << "\n";
    return kExitOk;
}

int run_render(const RunConfig& cfg, const std::string& ply_path,
               const std::string& trajectory_path, int index, const std::string& intrinsics_path,
               const std::string& out_png, const std::string& out_pfm,
               const std::string& out_depth) {
    GaussianCloud cloud = load_ply(ply_path);
    CameraIntrinsics k = load_intrinsics(intrinsics_path);
    Trajectory traj = load_trajectory_tum(trajectory_path);
    const TrajectoryEntry* entry = nullptr;
    for (const TrajectoryEntry& e : traj)
        if (e.frame_index == index) entry = &e;
    if (!entry) throw std::invalid_argument("render: frame index not in trajectory");
    RenderOptions ro;
    ro.background = cfg.pipeline.local.background;
    RenderOutput out = render(cloud, inverse(entry->cam_to_world), k, ro);
    if (!out_png.empty()) write_png(out_png, out.color);
    if (!out_pfm.empty()) write_pfm(out_pfm, out.color);
    if (!out_depth.empty()) write_pfm(out_depth, out.depth);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Progressive gaussian-splatting reconstruction without precomputed poses"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, run_dir, resume, split = "none";
    std::string ply_path, trajectory_path, intrinsics_path, out_png, out_pfm, out_depth;
    std::string out_report = "eval.json";
    int threads = 0, samples = 60, frame_index = 0;
    uint64_t seed = 0;
    bool seed_set = false, depth_loss = false;
    int synth_frames = 0, synth_gaussians = 0;
    std::string synth_kind;

    app.add_option("--config", config_path, "JSON config file")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (0 = auto)");
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed override");

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--kind", synth_kind, "orbit | forward");
    synth->add_option("--frames", synth_frames, "number of frames");
    synth->add_option("--gaussians", synth_gaussians, "scene gaussian count");
    synth->add_option("--out", out_dir, "output dataset directory")->required();

    CLI::App* fit = app.add_subcommand("fit", "fit a scene from an ordered image sequence");
    fit->add_option("--data", data_dir, "dataset directory")->required();
    fit->add_option("--out", out_dir, "output directory")->required();
    fit->add_option("--resume", resume, "checkpoint directory to resume from");
    fit->add_option("--split", split, "none | every8");
    fit->add_flag("--depth-loss", depth_loss, "enable the depth-loss ablation");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a fitted run against ground truth");
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--run", run_dir, "fitted output directory")->required();
    eval->add_option("--split", split, "none | every8");
    eval->add_option("--out", out_report, "report JSON path");

    CLI::App* rpath = app.add_subcommand("render-path", "render along a fitted Bezier path");
    rpath->add_option("--run", run_dir, "fitted output directory")->required();
    rpath->add_option("--data", data_dir, "dataset directory (intrinsics)")->required();
    rpath->add_option("--samples", samples, "number of path samples");
    rpath->add_option("--out", out_dir, "output image directory")->required();

    CLI::App* rend = app.add_subcommand("render", "render a single trajectory pose");
    rend->add_option("--ply", ply_path, "gaussian cloud PLY")->required();
    rend->add_option("--trajectory", trajectory_path, "TUM trajectory file")->required();
    rend->add_option("--index", frame_index, "frame index within the trajectory");
    rend->add_option("--intrinsics", intrinsics_path, "intrinsics JSON")->required();
    rend->add_option("--out", out_png, "output PNG");
    rend->add_option("--pfm", out_pfm, "lossless PFM color output");
    rend->add_option("--depth", out_depth, "PFM depth output");

    try {
        app.parse(argc, argv);
        seed_set = seed_opt->count() > 0;

        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (threads > 0) {
            cfg.threads = threads;
            set_thread_count(threads);
        } else if (cfg.threads > 0) {
            set_thread_count(cfg.threads);
        }
        if (seed_set) {
            cfg.seed = seed;
            cfg.pipeline.seed = seed;
            cfg.synth.seed = seed;
            cfg.synth.traj.seed = seed;
        }
        if (depth_loss) cfg.pipeline.depth_loss_enabled = true;
        if (synth->parsed()) {
            if (!synth_kind.empty()) {
                if (synth_kind == "orbit") {
                    cfg.synth.scene = SceneKind::kObjectOrbit;
                    cfg.synth.trajectory = TrajectoryKind::kOrbit;
                } else if (synth_kind == "forward") {
                    cfg.synth.scene = SceneKind::kRoom;
                    cfg.synth.trajectory = TrajectoryKind::kForward;
                } else {
                    throw CLI::ValidationError("--kind must be orbit or forward");
                }
            }
            if (synth_frames > 0) cfg.synth.n_frames = synth_frames;
            if (synth_gaussians > 0) cfg.synth.n_gaussians = synth_gaussians;
            return run_synth(cfg, out_dir);
        }
        if (fit->parsed()) return run_fit(cfg, data_dir, out_dir, resume, split);
        if (eval->parsed()) return run_eval(cfg, data_dir, run_dir, split, out_report);
        if (rpath->parsed()) return run_render_path(cfg, run_dir, data_dir, samples, out_dir);
        if (rend->parsed())
            return run_render(cfg, ply_path, trajectory_path, frame_index, intrinsics_path,
                              out_png, out_pfm, out_depth);
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::string what = e.what();
        std::cerr << "error: " << what << "\n";
        bool numeric = what.find("non-finite") != std::string::npos ||
                       what.find("degenerate") != std::string::npos;
        return numeric ? kExitNumeric : kExitUsage;
    }
}
