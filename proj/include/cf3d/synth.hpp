#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cf3d/image_io.hpp"
#include "cf3d/ply.hpp"
#include "cf3d/rasterizer.hpp"
#include "cf3d/rng.hpp"
#include "cf3d/trajectory_io.hpp"

namespace cf3d {

enum class SceneKind { kRoom, kObjectOrbit };
enum class TrajectoryKind { kForward, kOrbit };

struct TrajectoryParams {
    double orbit_radius = 2.0;
    double orbit_sweep_deg = 180.0;
    double forward_step = 0.12;
    double forward_jitter_deg = 2.0;
    uint64_t seed = 0;
};

struct SynthConfig {
    SceneKind scene = SceneKind::kObjectOrbit;
    TrajectoryKind trajectory = TrajectoryKind::kOrbit;
    int n_gaussians = 2000;
    int n_frames = 20;
    int width = 128, height = 128;
    double fov_x_deg = 90.0;
    TrajectoryParams traj;
    uint64_t seed = 0;
    double depth_noise_sigma = 0.0;  // multiplicative log-normal; 0 disables
};

// Procedural ground-truth cloud. Object-orbit packs opaque Gaussians into the
// unit ball; room scatters them over the walls of a box. Colors sample a
// smooth random band-0 field so the rendered texture carries structure at
// several spatial scales.
inline GaussianCloud make_scene(SceneKind kind, int n_gaussians, uint64_t seed) {
    if (n_gaussians < 1) throw std::invalid_argument("make_scene: need n >= 1");
    Rng rng(seed ^ 0x5ce9e5u);
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    cloud.resize(size_t(n_gaussians));

    struct ColorWave {
        Vec3d dir;
        double freq, phase;
        Vec3d amp;
    };
    std::vector<ColorWave> waves;
    for (int w = 0; w < 6; ++w) {
        ColorWave cw;
        cw.dir = Vec3d{rng.normal(), rng.normal(), rng.normal()}.normalized();
        cw.freq = rng.uniform(0.8, w < 3 ? 2.0 : 4.5);
        cw.phase = rng.uniform(0, 6.283185307179586);
        cw.amp = {rng.uniform(-0.16, 0.16), rng.uniform(-0.16, 0.16),
                  rng.uniform(-0.16, 0.16)};
        waves.push_back(cw);
    }
    auto field_color = [&](const Vec3d& p) {
        Vec3d c{0.5, 0.5, 0.5};
        for (const ColorWave& w : waves)
            c += w.amp * std::sin(w.freq * w.dir.dot(p) + w.phase);
        return Vec3d{std::clamp(c.x, 0.08, 0.92), std::clamp(c.y, 0.08, 0.92),
                     std::clamp(c.z, 0.08, 0.92)};
    };

    for (size_t i = 0; i < cloud.size(); ++i) {
        Vec3d p;
        double scale_lo = 0.06, scale_hi = 0.14;
        if (kind == SceneKind::kObjectOrbit) {
            do {
                p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            } while (p.norm() > 1.0);
        } else {
            // Box walls: floor, ceiling and four sides of a 4x4x3 room.
            int wall = int(rng.uniform_index(6));
            double u = rng.uniform(-2, 2), v = rng.uniform(-2, 2);
            double h = rng.uniform(0, 3);
            switch (wall) {
                case 0: p = {u, v, 0.0}; break;
                case 1: p = {u, v, 3.0}; break;
                case 2: p = {-2.0, u, h}; break;
                case 3: p = {2.0, u, h}; break;
                case 4: p = {u, -2.0, h}; break;
                default: p = {u, 2.0, h}; break;
            }
            scale_lo = 0.10;
            scale_hi = 0.22;
        }
        cloud.positions[i] = p;
        Vec4d q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-6) q.w = 1;
        cloud.rotations_raw[i] = quat_normalize(q);
        cloud.scales_raw[i] = {std::log(rng.uniform(scale_lo, scale_hi)),
                               std::log(rng.uniform(scale_lo, scale_hi)),
                               std::log(rng.uniform(scale_lo, scale_hi))};
        cloud.opacities_raw[i] = inverse_sigmoid(rng.uniform(0.82, 0.98));
        cloud.sh_of(i)[0] = (field_color(p) - Vec3d{0.5, 0.5, 0.5}) / kSH0;
    }
    return cloud;
}

// Camera-to-world pose looking from `eye` toward `target`, world up +z.
inline SE3 look_at(const Vec3d& eye, const Vec3d& target, const Vec3d& up = {0, 0, 1}) {
    Vec3d fwd = (target - eye).normalized();
    Vec3d right = fwd.cross(up);
    if (right.norm() < 1e-9) right = fwd.cross(Vec3d{0, 1, 0});
    right = right.normalized();
    Vec3d down = fwd.cross(right);
    // Camera basis: x right, y down, z forward (columns of cam-to-world R).
    Mat3d r;
    r.m = {right.x, down.x, fwd.x, right.y, down.y, fwd.y, right.z, down.z, fwd.z};
    SE3 c2w;
    c2w.q = quat_from_mat(r);
    c2w.t = eye;
    return c2w;
}

// Orbit: evenly spaced cameras on a circle looking at the origin; sweep/n
// degrees apart. Forward: small steps along +y with bounded rotation jitter.
inline Trajectory make_trajectory(TrajectoryKind kind, int n_frames,
                                  const TrajectoryParams& params) {
    if (n_frames < 2) throw std::invalid_argument("make_trajectory: need >= 2 frames");
    Trajectory traj;
    Rng rng(params.seed ^ 0x7ca3e1u);
    for (int i = 0; i < n_frames; ++i) {
        TrajectoryEntry e;
        e.frame_index = i;
        if (kind == TrajectoryKind::kOrbit) {
            double theta = params.orbit_sweep_deg * (3.14159265358979323846 / 180.0) *
                           double(i) / double(n_frames);
            Vec3d eye{params.orbit_radius * std::cos(theta),
                      params.orbit_radius * std::sin(theta), 0.0};
            e.cam_to_world = look_at(eye, {0, 0, 0});
        } else {
            double jitter = params.forward_jitter_deg * (3.14159265358979323846 / 180.0);
            Vec3d eye{0.15 * std::sin(0.7 * i), params.forward_step * i, 1.5};
            Vec3d axis{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            if (axis.norm() < 1e-6) axis.z = 1;
            SE3 base = look_at(eye, eye + Vec3d{0, 1, 0}, {0, 0, 1});
            SE3 wiggle;
            wiggle.q = quat_from_axis_angle(axis, rng.uniform(-jitter, jitter));
            e.cam_to_world = compose(base, wiggle);
        }
        traj.push_back(e);
    }
    return traj;
}

struct BakedSequence {
    std::vector<Image> frames;
    std::vector<Image> depths;
    std::vector<std::string> warnings;
};

// Renders each trajectory pose; the depth channel doubles as the stand-in
// for monocular depth input.
inline BakedSequence bake_frames(const GaussianCloud& cloud, const Trajectory& traj,
                                 const CameraIntrinsics& k, double depth_noise_sigma = 0.0,
                                 uint64_t noise_seed = 0) {
    BakedSequence baked;
    Rng noise(noise_seed ^ 0xba4edULL);
    for (const TrajectoryEntry& e : traj) {
        RenderOutput out = render(cloud, inverse(e.cam_to_world), k);
        double covered = 0;
        for (double a : out.alpha.data) covered += a > 0.5 ? 1.0 : 0.0;
        if (covered < 0.5 * double(out.alpha.size()))
            baked.warnings.push_back("frame " + std::to_string(e.frame_index) +
                                     ": alpha coverage below 50%");
        // Alpha-normalized expected depth; weakly covered pixels become holes.
        for (size_t i = 0; i < out.depth.size(); ++i) {
            double a = out.alpha.data[i];
            out.depth.data[i] = a >= 0.5 ? out.depth.data[i] / a : 0.0;
        }
        if (depth_noise_sigma > 0)
            for (double& d : out.depth.data)
                if (d > 0) d *= std::exp(depth_noise_sigma * noise.normal());
        baked.frames.push_back(std::move(out.color));
        baked.depths.push_back(std::move(out.depth));
    }
    return baked;
}

// Dataset directory layout consumed by the fitting pipeline.
inline void write_dataset(const std::string& dir, const GaussianCloud& cloud,
                          const Trajectory& traj, const CameraIntrinsics& k,
                          const BakedSequence& baked) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "frames");
    fs::create_directories(fs::path(dir) / "depth");
    char name[32];
    for (size_t i = 0; i < baked.frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "%04d.png", traj[i].frame_index);
        write_png((fs::path(dir) / "frames" / name).string(), baked.frames[i]);
        std::snprintf(name, sizeof(name), "%04d.pfm", traj[i].frame_index);
        write_pfm((fs::path(dir) / "depth" / name).string(), baked.depths[i]);
    }
    save_trajectory_tum((fs::path(dir) / "gt_trajectory.txt").string(), traj);
    save_ply((fs::path(dir) / "scene_gt.ply").string(), cloud);

    FILE* f = std::fopen((fs::path(dir) / "intrinsics.json").string().c_str(), "w");
    if (!f) throw std::runtime_error("write_dataset: cannot write intrinsics.json");
    std::fprintf(f,
                 "{\n  \"fx\": %.17g,\n  \"fy\": %.17g,\n  \"cx\": %.17g,\n  \"cy\": %.17g,\n"
                 "  \"width\": %d,\n  \"height\": %d\n}\n",
                 k.fx, k.fy, k.cx, k.cy, k.width, k.height);
    std::fclose(f);
}

}  // namespace cf3d
