#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "cf3d/camera.hpp"
#include "cf3d/sh.hpp"
#include "cf3d/vecmath.hpp"

namespace cf3d {

// Structure-of-arrays Gaussian set. Raw parameters are unconstrained; scales
// activate through exp, opacities through sigmoid, and quaternions are
// normalized wherever a rotation is built.
struct GaussianCloud {
    std::vector<Vec3d> positions;
    std::vector<Vec3d> sh_coeffs;  // n * sh_count(), gaussian-major
    std::vector<Vec4d> rotations_raw;
    std::vector<Vec3d> scales_raw;
    std::vector<double> opacities_raw;
    int sh_degree = 0;

    size_t size() const { return positions.size(); }
    int sh_count() const { return sh_coeff_count(sh_degree); }

    std::span<const Vec3d> sh_of(size_t i) const {
        return {sh_coeffs.data() + i * size_t(sh_count()), size_t(sh_count())};
    }
    std::span<Vec3d> sh_of(size_t i) {
        return {sh_coeffs.data() + i * size_t(sh_count()), size_t(sh_count())};
    }

    void resize(size_t n) {
        positions.resize(n);
        sh_coeffs.resize(n * size_t(sh_count()));
        rotations_raw.resize(n, quat_identity<double>());
        scales_raw.resize(n);
        opacities_raw.resize(n);
    }

    bool consistent() const {
        size_t n = positions.size();
        return rotations_raw.size() == n && scales_raw.size() == n &&
               opacities_raw.size() == n && sh_coeffs.size() == n * size_t(sh_count());
    }

    Vec3d activated_scale(size_t i) const {
        const Vec3d& s = scales_raw[i];
        return {std::exp(s.x), std::exp(s.y), std::exp(s.z)};
    }
    double activated_opacity(size_t i) const { return sigmoid(opacities_raw[i]); }
};

// Sigma = R S S^T R^T from a raw quaternion and log-scales.
inline SymMat3d build_covariance(const Vec4d& rotation_raw, const Vec3d& scale_raw) {
    if (rotation_raw.dot(rotation_raw) == 0)
        throw std::invalid_argument("build_covariance: zero quaternion");
    Mat3d r = quat_to_mat(quat_normalize(rotation_raw));
    Vec3d s2{std::exp(2 * scale_raw.x), std::exp(2 * scale_raw.y), std::exp(2 * scale_raw.z)};
    // R diag(s^2) R^T, expanded per unique entry.
    SymMat3d c;
    auto row = [&](int i) { return Vec3d{r(i, 0) * s2.x, r(i, 1) * s2.y, r(i, 2) * s2.z}; };
    Vec3d r0 = row(0), r1 = row(1), r2 = row(2);
    c.xx = r0.x * r(0, 0) + r0.y * r(0, 1) + r0.z * r(0, 2);
    c.xy = r0.x * r(1, 0) + r0.y * r(1, 1) + r0.z * r(1, 2);
    c.xz = r0.x * r(2, 0) + r0.y * r(2, 1) + r0.z * r(2, 2);
    c.yy = r1.x * r(1, 0) + r1.y * r(1, 1) + r1.z * r(1, 2);
    c.yz = r1.x * r(2, 0) + r1.y * r(2, 1) + r1.z * r(2, 2);
    c.zz = r2.x * r(2, 0) + r2.y * r(2, 1) + r2.z * r(2, 2);
    return c;
}

// Unnormalized density of the Gaussian at x. Diagonal is regularized by
// 1e-9 before inversion so collapsed scales stay evaluable.
inline double eval_gaussian(const Vec3d& x, const Vec3d& mu, const SymMat3d& cov) {
    constexpr double eps = 1e-9;
    Mat3d a = cov.full();
    a(0, 0) += eps;
    a(1, 1) += eps;
    a(2, 2) += eps;
    // Cholesky solve of a * y = d.
    double l00 = std::sqrt(a(0, 0));
    double l10 = a(1, 0) / l00;
    double l20 = a(2, 0) / l00;
    double l11s = a(1, 1) - l10 * l10;
    double l22_pre = a(2, 2) - l20 * l20;
    if (!(l00 > 0) || !(l11s > 0)) throw std::runtime_error("eval_gaussian: singular covariance");
    double l11 = std::sqrt(l11s);
    double l21 = (a(2, 1) - l20 * l10) / l11;
    double l22s = l22_pre - l21 * l21;
    if (!(l22s > 0)) throw std::runtime_error("eval_gaussian: singular covariance");
    double l22 = std::sqrt(l22s);
    Vec3d d = x - mu;
    double y0 = d.x / l00;
    double y1 = (d.y - l10 * y0) / l11;
    double y2 = (d.z - l20 * y0 - l21 * y1) / l22;
    double quad = y0 * y0 + y1 * y1 + y2 * y2;
    return std::exp(-0.5 * quad);
}

// Rigidly transforms every Gaussian: positions are mapped, orientations are
// composed with the transform's rotation, everything else is copied.
inline GaussianCloud transform_cloud(const GaussianCloud& cloud, const SE3& transform) {
    GaussianCloud out = cloud;
    Quatd tq = quat_normalize(transform.q);
    Mat3d rot = quat_to_mat(tq);
    for (size_t i = 0; i < cloud.size(); ++i) {
        out.positions[i] = rot * cloud.positions[i] + transform.t;
        out.rotations_raw[i] = quat_mul(tq, cloud.rotations_raw[i]);
    }
    return out;
}

// Max pixel deviation between projecting through the pose and projecting the
// rigidly pre-transformed cloud through the identity pose.
inline double pose_equivalence_check(const GaussianCloud& cloud, const SE3& w2c,
                                     const CameraIntrinsics& k) {
    if (cloud.size() == 0) throw std::invalid_argument("pose_equivalence_check: empty cloud");
    GaussianCloud moved = transform_cloud(cloud, w2c);
    double worst = 0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        ProjectedPoint a = project_point(cloud.positions[i], w2c, k);
        ProjectedPoint b = project_point(moved.positions[i], SE3::identity(), k);
        if (!a.in_front || !b.in_front)
            throw std::invalid_argument("pose_equivalence_check: point behind camera");
        worst = std::max(worst, (a.pixel - b.pixel).norm());
    }
    return worst;
}

}  // namespace cf3d
