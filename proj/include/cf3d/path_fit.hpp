#pragma once

#include <vector>

#include "cf3d/camera.hpp"

namespace cf3d {

struct PathFitResult {
    std::vector<SE3> poses;  // camera-to-world samples
    bool linear_fallback = false;
};

namespace detail {

struct CubicBezier {
    Vec3d p0, p1, p2, p3;
    Vec3d eval(double t) const {
        double u = 1 - t;
        return p0 * (u * u * u) + p1 * (3 * u * u * t) + p2 * (3 * u * t * t) + p3 * (t * t * t);
    }
};

// Least-squares cubic through fixed endpoints; interior control points solve
// a 2x2 normal system per dimension over the chord-parameterized samples.
inline CubicBezier fit_segment(const std::vector<Vec3d>& pts, size_t lo, size_t hi) {
    CubicBezier c;
    c.p0 = pts[lo];
    c.p3 = pts[hi];
    size_t m = hi - lo;
    if (m < 3) {
        c.p1 = c.p0 + (c.p3 - c.p0) * (1.0 / 3.0);
        c.p2 = c.p0 + (c.p3 - c.p0) * (2.0 / 3.0);
        return c;
    }
    double a11 = 0, a12 = 0, a22 = 0;
    Vec3d b1{0, 0, 0}, b2{0, 0, 0};
    for (size_t i = lo + 1; i < hi; ++i) {
        double t = double(i - lo) / double(m);
        double u = 1 - t;
        double f1 = 3 * u * u * t, f2 = 3 * u * t * t;
        Vec3d r = pts[i] - c.p0 * (u * u * u) - c.p3 * (t * t * t);
        a11 += f1 * f1;
        a12 += f1 * f2;
        a22 += f2 * f2;
        b1 += r * f1;
        b2 += r * f2;
    }
    double det = a11 * a22 - a12 * a12;
    if (std::abs(det) < 1e-12) {
        c.p1 = c.p0 + (c.p3 - c.p0) * (1.0 / 3.0);
        c.p2 = c.p0 + (c.p3 - c.p0) * (2.0 / 3.0);
        return c;
    }
    c.p1 = (b1 * a22 - b2 * a12) * (1.0 / det);
    c.p2 = (b2 * a11 - b1 * a12) * (1.0 / det);
    return c;
}

}  // namespace detail

// Fits the trajectory positions with piecewise least-squares cubic Bezier
// segments (rotations slerp between the nearest key poses) and samples
// n_samples poses at uniform curve parameters. Under 4 poses the curve
// degenerates to linear interpolation.
inline PathFitResult fit_trajectory_path(const Trajectory& traj, int n_samples) {
    if (traj.size() < 2) throw std::invalid_argument("fit_trajectory_path: need >= 2 poses");
    if (n_samples < 1) throw std::invalid_argument("fit_trajectory_path: need >= 1 sample");
    PathFitResult out;

    std::vector<Vec3d> pts;
    for (const TrajectoryEntry& e : traj) pts.push_back(e.cam_to_world.t);
    size_t n = pts.size();

    std::vector<detail::CubicBezier> segments;
    std::vector<size_t> seg_lo, seg_hi;
    if (n < 4) {
        out.linear_fallback = true;
    } else {
        const size_t span = 7;  // up to 8 knots per segment
        for (size_t lo = 0; lo + 1 < n; lo += span) {
            size_t hi = std::min(n - 1, lo + span);
            segments.push_back(detail::fit_segment(pts, lo, hi));
            seg_lo.push_back(lo);
            seg_hi.push_back(hi);
            if (hi == n - 1) break;
        }
    }

    for (int si = 0; si < n_samples; ++si) {
        double t_global = n_samples == 1 ? 0.5 : double(si) / double(n_samples - 1);
        double u = t_global * double(n - 1);  // fractional knot index
        size_t k = std::min(n - 2, size_t(u));
        double frac = u - double(k);

        SE3 pose;
        if (out.linear_fallback) {
            pose.t = pts[k] + (pts[k + 1] - pts[k]) * frac;
        } else {
            size_t seg = 0;
            while (seg + 1 < segments.size() && size_t(u) >= seg_hi[seg]) ++seg;
            double local = (u - double(seg_lo[seg])) / double(seg_hi[seg] - seg_lo[seg]);
            local = std::clamp(local, 0.0, 1.0);
            pose.t = segments[seg].eval(local);
        }
        pose.q = quat_slerp(traj[k].cam_to_world.q, traj[k + 1].cam_to_world.q, frac);
        out.poses.push_back(pose);
    }
    return out;
}

}  // namespace cf3d
