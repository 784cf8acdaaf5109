#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "cf3d/named_arrays.hpp"
#include "cf3d/ply.hpp"
#include "cf3d/pose_estimation.hpp"
#include "cf3d/rng.hpp"
#include "cf3d/trajectory_io.hpp"

namespace cf3d {

struct PipelineConfig {
    int steps_per_frame = 300;  // N: global steps per ingested frame
    double densify_grad_threshold = 2e-4;
    double densify_size_frac = 0.01;  // of scene extent: clone below, split above
    double prune_opacity_threshold = 0.005;
    double prune_screen_frac = 0.6;  // of the larger image dimension
    int opacity_reset_interval = 3000;
    double opacity_reset_cap = 0.01;
    bool depth_loss_enabled = false;
    double depth_loss_weight = 0.1;
    int checkpoint_every = 0;  // frames between checkpoints; 0 disables
    size_t max_gaussians = 400000;
    uint64_t seed = 0;
    bool progressive_growing = true;
    LocalFitConfig local;
};

enum class PoseFlag { kOk = 0, kRetried = 1, kDiverged = 2 };

struct FrameReport {
    int frame_index = 0;
    PoseFlag pose_flag = PoseFlag::kOk;
    double pose_loss = 0;
    int pose_iterations = 0;
    double global_loss = 0;  // mean over the frame's optimization block
    size_t gaussians = 0;
    double seconds = 0;
};

// Densification statistics gathered across one optimization block.
struct DensifyStats {
    std::vector<double> grad_sum;   // view-space position-gradient norms
    std::vector<int> hits;
    std::vector<double> max_radius;
    std::vector<Vec3d> position_grad;  // accumulated 3D position gradients

    void resize(size_t n) {
        grad_sum.assign(n, 0.0);
        hits.assign(n, 0);
        max_radius.assign(n, 0.0);
        position_grad.assign(n, {});
    }
    void remap(const std::vector<int>& kept, size_t appended) {
        DensifyStats out;
        out.resize(kept.size() + appended);
        for (size_t i = 0; i < kept.size(); ++i) {
            out.grad_sum[i] = grad_sum[size_t(kept[i])];
            out.hits[i] = hits[size_t(kept[i])];
            out.max_radius[i] = max_radius[size_t(kept[i])];
            out.position_grad[i] = position_grad[size_t(kept[i])];
        }
        *this = std::move(out);
    }
};

struct SceneState {
    GaussianCloud global_cloud;
    Trajectory trajectory;           // camera-to-world, one entry per ingested frame
    std::vector<SE3> world_to_cam;   // render poses, same order
    std::vector<int> frames_observed;
    std::vector<Image> frames;
    std::vector<Image> depths;
    std::vector<FrameReport> reports;
    int64_t step = 0;
    int64_t resets_applied = 0;
    bool reset_pending = false;
    double scene_extent = 1.0;
    Rng rng{0};
    CloudOptimizer optimizer;
    DensifyStats stats;
};

struct DensifyOutcome {
    GaussianCloud cloud;
    std::vector<int> kept_rows;  // original indices surviving, in output order
    size_t cloned = 0;
    size_t split = 0;
};

// Clone-or-split growth driven by averaged view-space position gradients.
inline DensifyOutcome densify(const GaussianCloud& cloud, const DensifyStats& stats,
                              const PipelineConfig& cfg, double scene_extent, Rng& rng) {
    DensifyOutcome out;
    out.cloud = cloud;
    out.kept_rows.resize(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) out.kept_rows[i] = int(i);
    if (cloud.size() >= cfg.max_gaussians) return out;

    double size_limit = cfg.densify_size_frac * scene_extent;
    std::vector<size_t> to_clone, to_split;
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (stats.hits[i] == 0) continue;
        double mean_grad = stats.grad_sum[i] / double(stats.hits[i]);
        if (mean_grad <= cfg.densify_grad_threshold) continue;
        Vec3d s = cloud.activated_scale(i);
        double max_scale = std::max({s.x, s.y, s.z});
        if (max_scale < size_limit)
            to_clone.push_back(i);
        else
            to_split.push_back(i);
    }
    if (to_clone.empty() && to_split.empty()) return out;

    // Split parents are dropped from the survivor set.
    std::vector<char> drop(cloud.size(), 0);
    for (size_t i : to_split) drop[i] = 1;
    GaussianCloud next;
    next.sh_degree = cloud.sh_degree;
    out.kept_rows.clear();
    auto append_from = [&](const GaussianCloud& src, size_t i) {
        next.positions.push_back(src.positions[i]);
        next.rotations_raw.push_back(src.rotations_raw[i]);
        next.scales_raw.push_back(src.scales_raw[i]);
        next.opacities_raw.push_back(src.opacities_raw[i]);
        auto sh = src.sh_of(i);
        next.sh_coeffs.insert(next.sh_coeffs.end(), sh.begin(), sh.end());
    };
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (drop[i]) continue;
        append_from(cloud, i);
        out.kept_rows.push_back(int(i));
    }

    for (size_t i : to_clone) {
        size_t row = next.size();
        append_from(cloud, i);
        // The copy shifts along the accumulated position gradient's descent
        // direction by a fraction of the parent's footprint.
        Vec3d g = stats.position_grad[i];
        double gn = g.norm();
        if (gn > 0) {
            Vec3d s = cloud.activated_scale(i);
            double step = 0.5 * std::max({s.x, s.y, s.z});
            next.positions[row] -= g * (step / gn);
        }
        ++out.cloned;
    }
    for (size_t i : to_split) {
        Mat3d rot = quat_to_mat(quat_normalize(cloud.rotations_raw[i]));
        Vec3d s = cloud.activated_scale(i);
        for (int child = 0; child < 2; ++child) {
            size_t row = next.size();
            append_from(cloud, i);
            // Sampled within the parent: draws truncated so the children's
            // 3-sigma support stays inside the parent's 3 * 1.6 sigma extent.
            Vec3d n{rng.normal(), rng.normal(), rng.normal()};
            double len = n.norm();
            if (len > 2.9) n *= 2.9 / len;
            Vec3d sample{n.x * s.x, n.y * s.y, n.z * s.z};
            next.positions[row] = cloud.positions[i] + rot * sample;
            next.scales_raw[row] = cloud.scales_raw[i] - Vec3d{1, 1, 1} * std::log(1.6);
        }
        ++out.split;
    }
    out.cloud = std::move(next);
    return out;
}

struct PruneOutcome {
    GaussianCloud cloud;
    std::vector<int> kept_rows;
    size_t removed = 0;
};

// Drops Gaussians that went transparent or grew past the screen-extent cap.
// Survivor order is stable.
inline PruneOutcome prune(const GaussianCloud& cloud, const PipelineConfig& cfg,
                          std::span<const double> max_radius_px, int image_max_dim) {
    PruneOutcome out;
    out.cloud.sh_degree = cloud.sh_degree;
    double radius_cap = cfg.prune_screen_frac * double(image_max_dim);
    for (size_t i = 0; i < cloud.size(); ++i) {
        bool dead = cloud.activated_opacity(i) < cfg.prune_opacity_threshold;
        if (!dead && i < max_radius_px.size() && max_radius_px[i] > radius_cap) dead = true;
        if (dead) {
            ++out.removed;
            continue;
        }
        out.cloud.positions.push_back(cloud.positions[i]);
        out.cloud.rotations_raw.push_back(cloud.rotations_raw[i]);
        out.cloud.scales_raw.push_back(cloud.scales_raw[i]);
        out.cloud.opacities_raw.push_back(cloud.opacities_raw[i]);
        auto sh = cloud.sh_of(i);
        out.cloud.sh_coeffs.insert(out.cloud.sh_coeffs.end(), sh.begin(), sh.end());
        out.kept_rows.push_back(int(i));
    }
    if (out.cloud.size() == 0 && cloud.size() > 0)
        throw std::runtime_error("prune: every gaussian removed (degenerate scene)");
    return out;
}

// Caps activated opacities so newly observed content can reclaim space.
inline GaussianCloud reset_opacity(const GaussianCloud& cloud, double cap) {
    GaussianCloud out = cloud;
    for (double& o : out.opacities_raw) {
        double a = sigmoid(o);
        if (a > cap) o = inverse_sigmoid(cap);
    }
    return out;
}

namespace detail {

inline void global_optimization_block(SceneState& st, const CameraIntrinsics& k,
                                      const PipelineConfig& cfg, int steps,
                                      double* mean_loss_out) {
    if (st.reset_pending) {
        st.global_cloud = reset_opacity(st.global_cloud, cfg.opacity_reset_cap);
        st.reset_pending = false;
        ++st.resets_applied;
    }
    if (st.stats.grad_sum.size() != st.global_cloud.size())
        st.stats.resize(st.global_cloud.size());

    RenderOptions ro;
    ro.background = cfg.local.background;
    CloudGradients grad;
    PoseGradient pose_grad;
    double loss_sum = 0;
    for (int s = 0; s < steps; ++s) {
        size_t j = size_t(st.rng.uniform_index(st.frames_observed.size()));
        RenderContext ctx = build_render_context(st.global_cloud, st.world_to_cam[j], k, ro);
        RenderOutput out = render(ctx, st.global_cloud);
        LossResult loss = loss_rgb(out.color, st.frames[j]);
        Image* depth_grad = nullptr;
        LossResult dloss;
        if (cfg.depth_loss_enabled) {
            Image mask(k.width, k.height, 1, 0.0);
            for (size_t i = 0; i < mask.size(); ++i)
                mask.data[i] = st.depths[j].data[i] > 0 ? 1.0 : 0.0;
            dloss = loss_depth(out.depth, st.depths[j], mask);
            for (double& g : dloss.gradient.data) g *= cfg.depth_loss_weight;
            depth_grad = &dloss.gradient;
        }
        if (!std::isfinite(loss.value))
            throw std::runtime_error("pipeline: non-finite loss in global block");
        render_backward(ctx, st.global_cloud, loss.gradient, depth_grad, grad, pose_grad, &out);
        st.optimizer.step(st.global_cloud, grad);
        loss_sum += loss.value + (cfg.depth_loss_enabled ? cfg.depth_loss_weight * dloss.value : 0.0);

        for (size_t i = 0; i < st.global_cloud.size(); ++i) {
            if (out.screen_hits[i]) {
                st.stats.grad_sum[i] += out.screen_grad_sum[i];
                st.stats.hits[i] += 1;
                st.stats.position_grad[i] += grad.positions[i];
            }
            st.stats.max_radius[i] = std::max(st.stats.max_radius[i], out.radii[i]);
        }
        ++st.step;
        if (cfg.opacity_reset_interval > 0 && st.step % cfg.opacity_reset_interval == 0)
            st.reset_pending = true;
    }
    if (mean_loss_out) *mean_loss_out = steps > 0 ? loss_sum / steps : 0.0;
}

inline void densify_and_prune(SceneState& st, const CameraIntrinsics& k,
                              const PipelineConfig& cfg) {
    DensifyOutcome grown = densify(st.global_cloud, st.stats, cfg, st.scene_extent, st.rng);
    size_t appended = grown.cloud.size() - grown.kept_rows.size();
    st.optimizer.remap_rows(grown.kept_rows, appended, grown.cloud.sh_count());
    st.stats.remap(grown.kept_rows, appended);
    st.global_cloud = std::move(grown.cloud);

    PruneOutcome trimmed = prune(st.global_cloud, cfg, st.stats.max_radius,
                                 std::max(k.width, k.height));
    st.optimizer.remap_rows(trimmed.kept_rows, 0, trimmed.cloud.sh_count());
    st.stats.remap(trimmed.kept_rows, 0);
    st.global_cloud = std::move(trimmed.cloud);

    st.stats.resize(st.global_cloud.size());  // accumulators restart each block
}

}  // namespace detail

// Ingests the next frame in sequence: estimates its pose from a local fit of
// the previous frame, then runs one optimization block of the global model
// followed by densification and pruning.
inline void ingest_frame(SceneState& st, int frame_index, const Image& frame,
                         const Image& depth, const CameraIntrinsics& k,
                         const PipelineConfig& cfg, std::ostream* pose_log = nullptr) {
    FrameReport report;
    report.frame_index = frame_index;
    auto t0 = std::chrono::steady_clock::now();

    if (st.frames_observed.empty()) {
        st.global_cloud = init_cloud_from_depth(frame, depth, k, cfg.local);
        st.scene_extent = cloud_extent(st.global_cloud);
        st.optimizer = CloudOptimizer{};
        st.optimizer.lrs = cfg.local.lrs;
        st.optimizer.scene_extent = st.scene_extent;
        st.stats.resize(st.global_cloud.size());
        st.rng = Rng(cfg.seed);
        st.world_to_cam.push_back(SE3::identity());
        TrajectoryEntry e;
        e.frame_index = frame_index;
        st.trajectory.push_back(e);
    } else {
        GaussianCloud local = fit_local(st.frames.back(), st.depths.back(), k, cfg.local);
        PoseEstimate est = estimate_relative_pose(local, frame, k, cfg.local, pose_log);
        if (est.diverged) {
            LocalFitConfig retry = cfg.local;
            retry.pose_iterations *= 2;
            PoseEstimate second = estimate_relative_pose(local, frame, k, retry, pose_log);
            if (second.final_loss < est.final_loss) est = second;
            report.pose_flag = est.diverged ? PoseFlag::kDiverged : PoseFlag::kRetried;
        }
        report.pose_loss = est.final_loss;
        report.pose_iterations = est.iterations_used;

        SE3 w2c = compose(est.relative, st.world_to_cam.back());
        st.world_to_cam.push_back(w2c);
        TrajectoryEntry e;
        e.frame_index = frame_index;
        e.cam_to_world = inverse(w2c);
        st.trajectory.push_back(e);
    }

    st.frames_observed.push_back(frame_index);
    st.frames.push_back(frame);
    st.depths.push_back(depth);

    if (st.frames_observed.size() > 1) {
        detail::global_optimization_block(st, k, cfg, cfg.steps_per_frame, &report.global_loss);
        if (cfg.progressive_growing) detail::densify_and_prune(st, k, cfg);
    }

    report.gaussians = st.global_cloud.size();
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.reports.push_back(report);
}

// ---- checkpointing ----

inline void save_checkpoint(const SceneState& st, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    NamedArrays na;
    auto put_vec3 = [&](const std::string& name, const std::vector<Vec3d>& v) {
        std::vector<double> flatv(v.size() * 3);
        for (size_t i = 0; i < v.size(); ++i) {
            flatv[i * 3] = v[i].x;
            flatv[i * 3 + 1] = v[i].y;
            flatv[i * 3 + 2] = v[i].z;
        }
        na.set(name, std::move(flatv));
    };
    auto put_vec4 = [&](const std::string& name, const std::vector<Vec4d>& v) {
        std::vector<double> flatv(v.size() * 4);
        for (size_t i = 0; i < v.size(); ++i) {
            flatv[i * 4] = v[i].w;
            flatv[i * 4 + 1] = v[i].x;
            flatv[i * 4 + 2] = v[i].y;
            flatv[i * 4 + 3] = v[i].z;
        }
        na.set(name, std::move(flatv));
    };
    put_vec3("positions", st.global_cloud.positions);
    put_vec3("sh_coeffs", st.global_cloud.sh_coeffs);
    put_vec4("rotations_raw", st.global_cloud.rotations_raw);
    put_vec3("scales_raw", st.global_cloud.scales_raw);
    na.set("opacities_raw", st.global_cloud.opacities_raw);
    na.set("sh_degree", {double(st.global_cloud.sh_degree)});

    std::vector<double> poses;
    for (size_t i = 0; i < st.world_to_cam.size(); ++i) {
        const SE3& p = st.world_to_cam[i];
        for (double v : {p.q.w, p.q.x, p.q.y, p.q.z, p.t.x, p.t.y, p.t.z}) poses.push_back(v);
    }
    na.set("world_to_cam", std::move(poses));
    std::vector<double> c2w;
    for (const TrajectoryEntry& e : st.trajectory) {
        const SE3& p = e.cam_to_world;
        for (double v : {p.q.w, p.q.x, p.q.y, p.q.z, p.t.x, p.t.y, p.t.z}) c2w.push_back(v);
    }
    na.set("cam_to_world", std::move(c2w));
    std::vector<double> frames_idx;
    for (int i : st.frames_observed) frames_idx.push_back(double(i));
    na.set("frames_observed", std::move(frames_idx));

    auto put_adam = [&](const std::string& name, const AdamState& a) {
        na.set(name + "_m", a.m);
        na.set(name + "_v", a.v);
        na.set(name + "_step", {double(a.step)});
    };
    put_adam("adam_positions", st.optimizer.positions);
    put_adam("adam_sh", st.optimizer.sh);
    put_adam("adam_rotation", st.optimizer.rotation);
    put_adam("adam_scale", st.optimizer.scale);
    put_adam("adam_opacity", st.optimizer.opacity);

    std::vector<double> flags;
    for (const FrameReport& r : st.reports) {
        flags.push_back(double(r.frame_index));
        flags.push_back(double(int(r.pose_flag)));
        flags.push_back(r.pose_loss);
        flags.push_back(double(r.pose_iterations));
        flags.push_back(r.global_loss);
        flags.push_back(double(r.gaussians));
    }
    na.set("frame_reports", std::move(flags));

    na.set("scalars", {double(st.step), bits_to_double(st.rng.state), st.scene_extent,
                       double(st.reset_pending ? 1 : 0), double(st.resets_applied)});

    na.save((fs::path(dir) / "state.bin").string());
    save_ply((fs::path(dir) / "scene.ply").string(), st.global_cloud);
    save_trajectory_tum((fs::path(dir) / "trajectory.txt").string(), st.trajectory);
}

inline SceneState load_checkpoint(const std::string& dir) {
    namespace fs = std::filesystem;
    NamedArrays na = NamedArrays::load((fs::path(dir) / "state.bin").string());
    SceneState st;
    auto get_vec3 = [&](const std::string& name, std::vector<Vec3d>& v) {
        const std::vector<double>& flatv = na.get(name);
        v.resize(flatv.size() / 3);
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = {flatv[i * 3], flatv[i * 3 + 1], flatv[i * 3 + 2]};
    };
    auto get_vec4 = [&](const std::string& name, std::vector<Vec4d>& v) {
        const std::vector<double>& flatv = na.get(name);
        v.resize(flatv.size() / 4);
        for (size_t i = 0; i < v.size(); ++i)
            v[i] = {flatv[i * 4], flatv[i * 4 + 1], flatv[i * 4 + 2], flatv[i * 4 + 3]};
    };
    st.global_cloud.sh_degree = int(na.get("sh_degree")[0]);
    get_vec3("positions", st.global_cloud.positions);
    get_vec3("sh_coeffs", st.global_cloud.sh_coeffs);
    get_vec4("rotations_raw", st.global_cloud.rotations_raw);
    get_vec3("scales_raw", st.global_cloud.scales_raw);
    st.global_cloud.opacities_raw = na.get("opacities_raw");

    const std::vector<double>& poses = na.get("world_to_cam");
    for (size_t i = 0; i + 6 < poses.size(); i += 7) {
        SE3 p;
        p.q = {poses[i], poses[i + 1], poses[i + 2], poses[i + 3]};
        p.t = {poses[i + 4], poses[i + 5], poses[i + 6]};
        st.world_to_cam.push_back(p);
    }
    for (double v : na.get("frames_observed")) st.frames_observed.push_back(int(v));
    const std::vector<double>& c2w = na.get("cam_to_world");
    for (size_t i = 0; i + 6 < c2w.size(); i += 7) {
        TrajectoryEntry e;
        e.frame_index = st.frames_observed[i / 7];
        e.cam_to_world.q = {c2w[i], c2w[i + 1], c2w[i + 2], c2w[i + 3]};
        e.cam_to_world.t = {c2w[i + 4], c2w[i + 5], c2w[i + 6]};
        st.trajectory.push_back(e);
    }

    auto get_adam = [&](const std::string& name, AdamState& a) {
        a.m = na.get(name + "_m");
        a.v = na.get(name + "_v");
        a.step = int64_t(na.get(name + "_step")[0]);
    };
    get_adam("adam_positions", st.optimizer.positions);
    get_adam("adam_sh", st.optimizer.sh);
    get_adam("adam_rotation", st.optimizer.rotation);
    get_adam("adam_scale", st.optimizer.scale);
    get_adam("adam_opacity", st.optimizer.opacity);

    const std::vector<double>& flags = na.get("frame_reports");
    for (size_t i = 0; i + 5 < flags.size(); i += 6) {
        FrameReport r;
        r.frame_index = int(flags[i]);
        r.pose_flag = PoseFlag(int(flags[i + 1]));
        r.pose_loss = flags[i + 2];
        r.pose_iterations = int(flags[i + 3]);
        r.global_loss = flags[i + 4];
        r.gaussians = size_t(flags[i + 5]);
        st.reports.push_back(r);
    }

    const std::vector<double>& scalars = na.get("scalars");
    st.step = int64_t(scalars[0]);
    st.rng.state = double_to_bits(scalars[1]);
    st.scene_extent = scalars[2];
    st.reset_pending = scalars[3] != 0;
    st.resets_applied = int64_t(scalars[4]);
    st.stats.resize(st.global_cloud.size());
    return st;
}

struct RunResult {
    SceneState state;
    std::vector<std::string> warnings;
};

// Runs the full progressive pipeline over an ordered frame sequence. When
// `resume_from` is set, the state is restored and ingestion continues after
// the checkpointed frame. The non-growing ablation estimates every pose
// against a static first-frame model, then optimizes that single cloud.
inline RunResult run_sequence(const std::vector<Image>& frames, const std::vector<Image>& depths,
                              const std::vector<int>& frame_indices, const CameraIntrinsics& k,
                              const PipelineConfig& cfg, const std::string& out_dir = "",
                              const std::string& resume_from = "",
                              std::ostream* pose_log = nullptr) {
    namespace fs = std::filesystem;
    if (frames.size() < 2) throw std::invalid_argument("run_sequence: need at least 2 frames");
    if (frames.size() != depths.size() || frames.size() != frame_indices.size())
        throw std::invalid_argument("run_sequence: frame/depth/index count mismatch");

    RunResult result;
    SceneState& st = result.state;
    size_t start = 0;

    if (!cfg.progressive_growing) {
        // Two-stage ablation: sequential pose estimation against the static
        // first-frame model, then one optimization run of that cloud.
        GaussianCloud base = fit_local(frames[0], depths[0], k, cfg.local);
        st.global_cloud = init_cloud_from_depth(frames[0], depths[0], k, cfg.local);
        st.scene_extent = cloud_extent(st.global_cloud);
        st.optimizer.lrs = cfg.local.lrs;
        st.optimizer.scene_extent = st.scene_extent;
        st.stats.resize(st.global_cloud.size());
        st.rng = Rng(cfg.seed);
        SE3 w2c = SE3::identity();
        for (size_t i = 0; i < frames.size(); ++i) {
            if (i > 0) {
                PoseEstimate est = fit_test_pose(base, frames[i], w2c, k, cfg.local);
                w2c = est.relative;
                FrameReport r;
                r.frame_index = frame_indices[i];
                r.pose_loss = est.final_loss;
                r.pose_iterations = est.iterations_used;
                r.pose_flag = est.diverged ? PoseFlag::kDiverged : PoseFlag::kOk;
                st.reports.push_back(r);
            } else {
                st.reports.push_back({frame_indices[0]});
            }
            st.world_to_cam.push_back(w2c);
            TrajectoryEntry e;
            e.frame_index = frame_indices[i];
            e.cam_to_world = inverse(w2c);
            st.trajectory.push_back(e);
            st.frames_observed.push_back(frame_indices[i]);
            st.frames.push_back(frames[i]);
            st.depths.push_back(depths[i]);
        }
        int total_steps = cfg.steps_per_frame * int(frames.size() - 1);
        detail::global_optimization_block(st, k, cfg, total_steps, nullptr);
        st.reports.back().gaussians = st.global_cloud.size();
    } else {
        if (!resume_from.empty()) {
            st = load_checkpoint(resume_from);
            st.optimizer.lrs = cfg.local.lrs;
            st.optimizer.scene_extent = st.scene_extent;
            start = st.frames_observed.size();
            for (size_t i = 0; i < start; ++i) {
                st.frames.push_back(frames[i]);
                st.depths.push_back(depths[i]);
            }
        }
        for (size_t i = start; i < frames.size(); ++i) {
            ingest_frame(st, frame_indices[i], frames[i], depths[i], k, cfg, pose_log);
            bool diverged = st.reports.back().pose_flag == PoseFlag::kDiverged;
            if (diverged)
                result.warnings.push_back("pose divergence at frame " +
                                          std::to_string(frame_indices[i]));
            if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
                st.frames_observed.size() % size_t(cfg.checkpoint_every) == 0 &&
                i + 1 < frames.size()) {
                save_checkpoint(st, (fs::path(out_dir) / ("checkpoint_" +
                                                          std::to_string(frame_indices[i])))
                                        .string());
            }
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        save_trajectory_tum((fs::path(out_dir) / "trajectory.txt").string(), st.trajectory);
        save_ply((fs::path(out_dir) / "scene.ply").string(), st.global_cloud);
    }
    return result;
}

}  // namespace cf3d
