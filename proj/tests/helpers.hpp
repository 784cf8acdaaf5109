#pragma once

#include <random>

#include "cf3d/rasterizer.hpp"

namespace cf3d::testutil {

inline GaussianCloud random_scene(std::mt19937& gen, size_t n, int sh_degree = 0,
                                  double z_lo = 2.0, double z_hi = 6.0) {
    auto u = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    };
    GaussianCloud c;
    c.sh_degree = sh_degree;
    c.resize(n);
    for (size_t i = 0; i < n; ++i) {
        c.positions[i] = {u(-1.2, 1.2), u(-1.2, 1.2), u(z_lo, z_hi)};
        Vec4d q{u(-1, 1), u(-1, 1), u(-1, 1), u(-1, 1)};
        if (q.norm() < 1e-3) q.w += 1;
        c.rotations_raw[i] = q;
        c.scales_raw[i] = {u(-3.2, -1.2), u(-3.2, -1.2), u(-3.2, -1.2)};
        c.opacities_raw[i] = u(-1.5, 1.5);
        auto sh = c.sh_of(i);
        sh[0] = {u(-1, 1), u(-1, 1), u(-1, 1)};
        for (size_t j = 1; j < sh.size(); ++j)
            sh[j] = {u(-0.25, 0.25), u(-0.25, 0.25), u(-0.25, 0.25)};
    }
    return c;
}

inline SE3 small_random_pose(std::mt19937& gen, double max_angle_rad, double max_trans) {
    auto u = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    };
    Vec3d axis{u(-1, 1), u(-1, 1), u(-1, 1)};
    if (axis.norm() < 1e-6) axis.z = 1;
    SE3 t;
    t.q = quat_from_axis_angle(axis, u(-max_angle_rad, max_angle_rad));
    t.t = {u(-max_trans, max_trans), u(-max_trans, max_trans), u(-max_trans, max_trans)};
    return t;
}

// Reference compositor: walks every splat per pixel in depth order, no tiling
// and no early termination. Shares only the projection stage with the
// implementation under test.
inline Image oracle_render(const std::vector<Splat2D>& splats, const CameraIntrinsics& k,
                           const Vec3d& background, Image* weight_sum = nullptr,
                           Image* residual_t = nullptr, double alpha_skip = kAlphaSkip) {
    Image out(k.width, k.height, 3);
    if (weight_sum) *weight_sum = Image(k.width, k.height, 1);
    if (residual_t) *residual_t = Image(k.width, k.height, 1);
    for (int py = 0; py < k.height; ++py) {
        for (int px = 0; px < k.width; ++px) {
            double t = 1.0;
            Vec3d c{0, 0, 0};
            double wsum = 0;
            for (const Splat2D& s : splats) {
                double dx = px - s.center.x, dy = py - s.center.y;
                SymMat2d conic = s.cov2d.inverse();
                double power = -0.5 * (conic.xx * dx * dx + 2 * conic.xy * dx * dy +
                                       conic.yy * dy * dy);
                if (power > 0) continue;
                double a = std::min(kAlphaClip, s.opacity * std::exp(power));
                if (a < alpha_skip) continue;
                c += s.rgb * (a * t);
                wsum += a * t;
                t *= 1 - a;
            }
            c += background * t;
            out.at(px, py, 0) = c.x;
            out.at(px, py, 1) = c.y;
            out.at(px, py, 2) = c.z;
            if (weight_sum) weight_sum->at(px, py, 0) = wsum;
            if (residual_t) residual_t->at(px, py, 0) = t;
        }
    }
    return out;
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace cf3d::testutil
