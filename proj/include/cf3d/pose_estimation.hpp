#pragma once

#include <cmath>
#include <limits>
#include <ostream>

#include "cf3d/losses.hpp"
#include "cf3d/rasterizer.hpp"
#include "cf3d/trainer.hpp"

namespace cf3d {

struct LocalFitConfig {
    int fit_iterations = 500;
    int pose_iterations = 300;
    int stride = 0;          // 0: derived from max_points
    int max_points = 100000;
    bool early_stop = true;
    double early_stop_tol = 1e-7;
    int early_stop_window = 20;
    int sh_degree = 1;
    double init_opacity = 0.1;
    Vec3d background{0, 0, 0};
    // Coarse-to-fine pose alignment: image downsampling factors, finishing
    // at full resolution. The iteration budget is split across levels.
    std::vector<int> pose_pyramid{4, 2, 1};
    OptimLrs lrs;
};

struct PoseEstimate {
    SE3 relative;            // frame t -> t+1 camera motion (world-to-camera step)
    double final_loss = 0;
    double initial_loss = 0;
    int iterations_used = 0;
    bool diverged = false;
};

inline int auto_stride(int width, int height, int max_points) {
    int stride = 1;
    while ((size_t((height + stride - 1) / stride)) * size_t((width + stride - 1) / stride) >
           size_t(max_points))
        ++stride;
    return stride;
}

// Single-view initialization: one Gaussian per valid depth sample, colored
// from the frame, isotropic scale of about one sample footprint.
inline GaussianCloud init_cloud_from_depth(const Image& frame, const Image& depth,
                                           const CameraIntrinsics& k,
                                           const LocalFitConfig& cfg) {
    int stride = cfg.stride > 0 ? cfg.stride : auto_stride(k.width, k.height, cfg.max_points);
    std::vector<Vec3d> points = lift_depth(depth, k, stride);

    GaussianCloud cloud;
    cloud.sh_degree = cfg.sh_degree;
    cloud.resize(points.size());
    double opacity_raw = inverse_sigmoid(cfg.init_opacity);
    for (size_t i = 0; i < points.size(); ++i) {
        const Vec3d& p = points[i];
        cloud.positions[i] = p;
        int u = int(std::lround(k.fx * p.x / p.z + k.cx));
        int v = int(std::lround(k.fy * p.y / p.z + k.cy));
        u = std::clamp(u, 0, k.width - 1);
        v = std::clamp(v, 0, k.height - 1);
        Vec3d rgb{frame.at(u, v, 0), frame.at(u, v, 1), frame.at(u, v, 2)};
        cloud.sh_of(i)[0] = (rgb - Vec3d{0.5, 0.5, 0.5}) / kSH0;
        cloud.scales_raw[i] = Vec3d{1, 1, 1} * std::log(p.z / k.fx * stride);
        cloud.opacities_raw[i] = opacity_raw;
        cloud.rotations_raw[i] = quat_identity<double>();
    }
    return cloud;
}

inline double cloud_extent(const GaussianCloud& cloud) {
    if (cloud.size() == 0) return 1.0;
    Vec3d lo = cloud.positions[0], hi = cloud.positions[0];
    for (const Vec3d& p : cloud.positions) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    double d = (hi - lo).norm();
    return d > 1e-9 ? 0.5 * d : 1.0;
}

// Fits a fresh Gaussian set to one frame from its depth map (identity pose),
// optimizing every attribute photometrically.
inline GaussianCloud fit_local(const Image& frame, const Image& depth,
                               const CameraIntrinsics& k, const LocalFitConfig& cfg,
                               std::ostream* log = nullptr) {
    GaussianCloud cloud = init_cloud_from_depth(frame, depth, k, cfg);
    CloudOptimizer opt;
    opt.lrs = cfg.lrs;
    opt.scene_extent = cloud_extent(cloud);

    RenderOptions ro;
    ro.background = cfg.background;
    CloudGradients grad;
    PoseGradient pose_grad;
    for (int it = 0; it < cfg.fit_iterations; ++it) {
        RenderContext ctx = build_render_context(cloud, SE3::identity(), k, ro);
        RenderOutput out = render(ctx, cloud);
        LossResult loss = loss_rgb(out.color, frame);
        if (!std::isfinite(loss.value))
            throw std::runtime_error("fit_local: non-finite loss at iteration " +
                                     std::to_string(it));
        render_backward(ctx, cloud, loss.gradient, nullptr, grad, pose_grad);
        opt.step(cloud, grad);
        if (log) (*log) << it << "," << loss.value << ",0,0\n";
    }
    return cloud;
}

namespace detail {

// Block-average downsample by an integer factor (partial edge blocks allowed).
inline Image downsample(const Image& img, int factor) {
    if (factor <= 1) return img;
    int w = (img.width + factor - 1) / factor;
    int h = (img.height + factor - 1) / factor;
    Image out(w, h, img.channels);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double sum = 0;
                int count = 0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) {
                        int sx = x * factor + dx, sy = y * factor + dy;
                        if (sx >= img.width || sy >= img.height) continue;
                        sum += img.at(sx, sy, c);
                        ++count;
                    }
                out.at(x, y, c) = sum / count;
            }
    return out;
}

inline CameraIntrinsics scale_intrinsics(const CameraIntrinsics& k, int factor) {
    if (factor <= 1) return k;
    CameraIntrinsics s = k;
    s.fx /= factor;
    s.fy /= factor;
    s.cx /= factor;
    s.cy /= factor;
    s.width = (k.width + factor - 1) / factor;
    s.height = (k.height + factor - 1) / factor;
    return s;
}

}  // namespace detail

// Photometric pose alignment of a frozen cloud against a target frame.
// Optimizes the 7 raw pose parameters only, coarse-to-fine over the image
// pyramid; returns the best full-resolution pose seen.
inline PoseEstimate align_pose_photometric(const GaussianCloud& frozen, const Image& target,
                                           const CameraIntrinsics& k, const SE3& init,
                                           const LocalFitConfig& cfg,
                                           std::ostream* log = nullptr) {
    std::vector<int> levels = cfg.pose_pyramid;
    if (levels.empty()) levels = {1};
    if (levels.back() != 1) levels.push_back(1);

    SE3 pose = init;
    PoseEstimate best;
    best.relative = init;
    best.final_loss = std::numeric_limits<double>::infinity();
    best.initial_loss = std::numeric_limits<double>::quiet_NaN();

    CloudGradients grad;
    PoseGradient pose_grad;
    int total_used = 0;
    int per_level = std::max(1, cfg.pose_iterations / int(levels.size()));
    for (size_t li = 0; li < levels.size(); ++li) {
        int factor = levels[li];
        bool finest = li + 1 == levels.size();
        int budget = finest ? cfg.pose_iterations - per_level * int(levels.size() - 1)
                            : per_level;
        CameraIntrinsics lk = detail::scale_intrinsics(k, factor);
        Image ltarget = detail::downsample(target, factor);
        RenderOptions ro;
        ro.background = cfg.background;

        OptimLrs lrs = cfg.lrs;
        lrs.pose_decay_steps = budget;
        PoseOptimizer opt(lrs);
        double window_best = std::numeric_limits<double>::infinity();
        int since_improvement = 0;
        for (int it = 0; it < budget; ++it) {
            RenderContext ctx = build_render_context(frozen, pose, lk, ro);
            RenderOutput out = render(ctx, frozen);
            LossResult loss = loss_rgb(out.color, ltarget);
            if (!std::isfinite(loss.value))
                throw std::runtime_error("align_pose_photometric: non-finite loss");
            if (finest && loss.value < best.final_loss) {
                best.final_loss = loss.value;
                best.relative = pose.normalized();
            }

            render_backward(ctx, frozen, loss.gradient, nullptr, grad, pose_grad);
            SE3 before = pose;
            opt.step(pose, pose_grad);
            ++total_used;
            if (log)
                (*log) << total_used << "," << loss.value << "," << (pose.q - before.q).norm()
                       << "," << (pose.t - before.t).norm() << "\n";

            if (cfg.early_stop) {
                if (loss.value < window_best - cfg.early_stop_tol) {
                    window_best = loss.value;
                    since_improvement = 0;
                } else if (++since_improvement >= cfg.early_stop_window) {
                    break;
                }
            }
        }
    }
    // Initial loss at full resolution for the divergence check.
    {
        RenderOptions ro;
        ro.background = cfg.background;
        RenderOutput out0 = render(frozen, init, k, ro);
        best.initial_loss = loss_rgb(out0.color, target).value;
        if (!(best.final_loss < std::numeric_limits<double>::infinity())) {
            best.final_loss = best.initial_loss;
            best.relative = init;
        }
    }
    best.iterations_used = total_used;
    best.diverged = best.final_loss > 10.0 * best.initial_loss;
    return best;
}

// Relative camera motion between the frame the local set was fitted on and
// the next frame. The cloud is frozen; only the transform moves.
inline PoseEstimate estimate_relative_pose(const GaussianCloud& local, const Image& next_frame,
                                           const CameraIntrinsics& k, const LocalFitConfig& cfg,
                                           std::ostream* log = nullptr) {
    return align_pose_photometric(local, next_frame, k, SE3::identity(), cfg, log);
}

// Test-view registration against the frozen global model, starting from the
// nearest training pose.
inline PoseEstimate fit_test_pose(const GaussianCloud& global_cloud, const Image& test_frame,
                                  const SE3& init_w2c, const CameraIntrinsics& k,
                                  const LocalFitConfig& cfg, std::ostream* log = nullptr) {
    return align_pose_photometric(global_cloud, test_frame, k, init_w2c, cfg, log);
}

// Chains per-pair relative motions into camera-to-world absolute poses;
// frame 0 is the identity.
inline Trajectory chain_poses(const std::vector<SE3>& relatives) {
    Trajectory traj;
    SE3 w2c = SE3::identity();
    TrajectoryEntry first;
    first.frame_index = 0;
    traj.push_back(first);
    for (size_t i = 0; i < relatives.size(); ++i) {
        w2c = compose(relatives[i], w2c);
        TrajectoryEntry e;
        e.frame_index = int(i) + 1;
        e.cam_to_world = inverse(w2c);
        traj.push_back(e);
    }
    return traj;
}

}  // namespace cf3d
