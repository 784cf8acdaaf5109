#pragma once

#include <span>
#include <stdexcept>

#include "cf3d/vecmath.hpp"

namespace cf3d {

// Real spherical-harmonics basis constants, bands 0-3.
inline constexpr double kSH0 = 0.28209479177387814;
inline constexpr double kSH1 = 0.4886025119029199;
inline constexpr double kSH2[5] = {1.0925484305920792, -1.0925484305920792,
                                   0.31539156525252005, -1.0925484305920792,
                                   0.5462742152960396};
inline constexpr double kSH3[7] = {-0.5900435899266435, 2.890611442640554,
                                   -0.4570457994644658, 0.3731763325901154,
                                   -0.4570457994644658, 1.445305721320277,
                                   -0.5900435899266435};

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Fills basis[0..(degree+1)^2) with the SH basis evaluated at a unit direction.
inline void sh_basis(const Vec3d& dir, int degree, double* basis) {
    basis[0] = kSH0;
    if (degree < 1) return;
    double x = dir.x, y = dir.y, z = dir.z;
    basis[1] = -kSH1 * y;
    basis[2] = kSH1 * z;
    basis[3] = -kSH1 * x;
    if (degree < 2) return;
    double xx = x * x, yy = y * y, zz = z * z;
    double xy = x * y, yz = y * z, xz = x * z;
    basis[4] = kSH2[0] * xy;
    basis[5] = kSH2[1] * yz;
    basis[6] = kSH2[2] * (2 * zz - xx - yy);
    basis[7] = kSH2[3] * xz;
    basis[8] = kSH2[4] * (xx - yy);
    if (degree < 3) return;
    basis[9] = kSH3[0] * y * (3 * xx - yy);
    basis[10] = kSH3[1] * xy * z;
    basis[11] = kSH3[2] * y * (4 * zz - xx - yy);
    basis[12] = kSH3[3] * z * (2 * zz - 3 * xx - 3 * yy);
    basis[13] = kSH3[4] * x * (4 * zz - xx - yy);
    basis[14] = kSH3[5] * z * (xx - yy);
    basis[15] = kSH3[6] * x * (xx - 3 * yy);
}

// View-dependent color: basis-contracted coefficients plus the conventional
// +0.5 offset, clamped at zero from below.
inline Vec3d eval_sh_color(std::span<const Vec3d> sh_coeffs, const Vec3d& view_dir,
                           int degree) {
    if (degree < 0 || degree > 3) throw std::invalid_argument("eval_sh_color: degree in 0..3");
    int n = sh_coeff_count(degree);
    if (int(sh_coeffs.size()) < n)
        throw std::invalid_argument("eval_sh_color: too few coefficients");
    double basis[16];
    sh_basis(view_dir, degree, basis);
    Vec3d c{0.5, 0.5, 0.5};
    for (int i = 0; i < n; ++i) c += sh_coeffs[i] * basis[i];
    return {std::max(0.0, c.x), std::max(0.0, c.y), std::max(0.0, c.z)};
}

// Backward of eval_sh_color. d_color is dL/d(output); accumulates dL/dcoeffs
// into d_sh (length >= coeff count) and returns dL/d(view_dir) (w.r.t. the
// unit direction, not yet through any normalization).
inline Vec3d eval_sh_color_backward(std::span<const Vec3d> sh_coeffs, const Vec3d& dir,
                                    int degree, const Vec3d& d_color_in, Vec3d* d_sh) {
    int n = sh_coeff_count(degree);
    double basis[16];
    sh_basis(dir, degree, basis);
    // Zero out channels clamped at 0.
    Vec3d pre{0.5, 0.5, 0.5};
    for (int i = 0; i < n; ++i) pre += sh_coeffs[i] * basis[i];
    Vec3d d_color = d_color_in;
    if (pre.x < 0) d_color.x = 0;
    if (pre.y < 0) d_color.y = 0;
    if (pre.z < 0) d_color.z = 0;

    for (int i = 0; i < n; ++i) d_sh[i] += d_color * basis[i];

    if (degree < 1) return {0, 0, 0};
    double x = dir.x, y = dir.y, z = dir.z;
    // dL/ddir = sum over coeffs of (d basis_i / d dir) * (sh_i . d_color).
    auto w = [&](int i) { return sh_coeffs[i].dot(d_color); };
    Vec3d g{0, 0, 0};
    g.x += -kSH1 * w(3);
    g.y += -kSH1 * w(1);
    g.z += kSH1 * w(2);
    if (degree >= 2) {
        double xx = x * x, yy = y * y, zz = z * z;
        g.x += kSH2[0] * y * w(4) + kSH2[2] * (-2 * x) * w(6) + kSH2[3] * z * w(7) +
               kSH2[4] * 2 * x * w(8);
        g.y += kSH2[0] * x * w(4) + kSH2[1] * z * w(5) + kSH2[2] * (-2 * y) * w(6) +
               kSH2[4] * (-2 * y) * w(8);
        g.z += kSH2[1] * y * w(5) + kSH2[2] * 4 * z * w(6) + kSH2[3] * x * w(7);
        if (degree >= 3) {
            g.x += kSH3[0] * 6 * x * y * w(9) + kSH3[1] * y * z * w(10) +
                   kSH3[2] * (-2 * x * y) * w(11) + kSH3[3] * (-6 * x * z) * w(12) +
                   kSH3[4] * (4 * zz - 3 * xx - yy) * w(13) + kSH3[5] * 2 * x * z * w(14) +
                   kSH3[6] * 3 * (xx - yy) * w(15);
            g.y += kSH3[0] * 3 * (xx - yy) * w(9) + kSH3[1] * x * z * w(10) +
                   kSH3[2] * (4 * zz - xx - 3 * yy) * w(11) + kSH3[3] * (-6 * y * z) * w(12) +
                   kSH3[4] * (-2 * x * y) * w(13) + kSH3[5] * (-2 * y * z) * w(14) +
                   kSH3[6] * (-6 * x * y) * w(15);
            g.z += kSH3[1] * x * y * w(10) + kSH3[2] * 8 * y * z * w(11) +
                   kSH3[3] * (6 * zz - 3 * xx - 3 * yy) * w(12) + kSH3[4] * 8 * x * z * w(13) +
                   kSH3[5] * (xx - yy) * w(14);
        }
    }
    return g;
}

}  // namespace cf3d
