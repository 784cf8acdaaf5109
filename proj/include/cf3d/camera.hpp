#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cf3d/image.hpp"
#include "cf3d/vecmath.hpp"

namespace cf3d {

inline constexpr double kZNear = 0.01;

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    bool valid() const {
        return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
    }
    static CameraIntrinsics from_fov(int width, int height, double fov_x_rad) {
        CameraIntrinsics k;
        k.width = width;
        k.height = height;
        k.fx = 0.5 * width / std::tan(0.5 * fov_x_rad);
        k.fy = k.fx;
        k.cx = 0.5 * width;
        k.cy = 0.5 * height;
        return k;
    }
};

// Rigid transform as unit quaternion + translation: p' = R(q) p + t.
// Rendering poses are world-to-camera; trajectories store camera-to-world.
struct SE3 {
    Quatd q = quat_identity<double>();
    Vec3d t{0, 0, 0};

    static SE3 identity() { return {}; }

    Vec3d apply(const Vec3d& p) const { return quat_to_mat(q) * p + t; }
    Mat3d rotation() const { return quat_to_mat(q); }

    SE3 normalized() const { return {quat_normalize(q), t}; }
};

// compose(a, b): apply b first, then a.
inline SE3 compose(const SE3& a, const SE3& b) {
    SE3 r;
    r.q = quat_normalize(quat_mul(a.q, b.q));
    r.t = quat_to_mat(a.q) * b.t + a.t;
    return r;
}

inline SE3 inverse(const SE3& s) {
    SE3 r;
    r.q = quat_conjugate(s.q);
    r.t = -(quat_to_mat(r.q) * s.t);
    return r;
}

inline std::array<double, 16> to_matrix(const SE3& s) {
    Mat3d r = quat_to_mat(s.q);
    return {r(0, 0), r(0, 1), r(0, 2), s.t.x,
            r(1, 0), r(1, 1), r(1, 2), s.t.y,
            r(2, 0), r(2, 1), r(2, 2), s.t.z,
            0,       0,       0,       1};
}

struct TrajectoryEntry {
    int frame_index = 0;
    SE3 cam_to_world;
};

using Trajectory = std::vector<TrajectoryEntry>;

struct ProjectedPoint {
    Vec2d pixel;
    double depth = 0;
    bool in_front = false;  // depth > z_near
};

// Pinhole projection of a world point through a world-to-camera pose.
inline ProjectedPoint project_point(const Vec3d& mu, const SE3& w2c,
                                    const CameraIntrinsics& k, double z_near = kZNear) {
    Vec3d p = w2c.apply(mu);
    ProjectedPoint r;
    r.depth = p.z;
    r.in_front = p.z > z_near;
    if (r.in_front) r.pixel = {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
    return r;
}

// Back-projects valid depth pixels on a stride grid into camera-space points.
// Depth values <= 0 are holes and are skipped.
inline std::vector<Vec3d> lift_depth(const Image& depth, const CameraIntrinsics& k,
                                     int stride = 1) {
    if (stride < 1) throw std::invalid_argument("lift_depth: stride must be >= 1");
    if (depth.channels != 1) throw std::invalid_argument("lift_depth: depth must be 1-channel");
    std::vector<Vec3d> points;
    points.reserve((size_t(depth.height) / stride + 1) * (size_t(depth.width) / stride + 1));
    for (int v = 0; v < depth.height; v += stride) {
        for (int u = 0; u < depth.width; u += stride) {
            double d = depth.at(u, v, 0);
            if (d <= 0) continue;
            points.push_back({(u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d});
        }
    }
    if (points.empty()) throw std::runtime_error("lift_depth: no valid depth pixels");
    return points;
}

}  // namespace cf3d
