#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cf3d/camera.hpp"
#include "cf3d/image.hpp"
#include "cf3d/ssim.hpp"

namespace cf3d {

inline constexpr double kPsnrCap = 99.99;

struct PoseMetrics {
    double ate_rmse = 0;   // world units, after alignment
    double rpe_trans = 0;  // x100 per the reporting convention
    double rpe_rot = 0;    // degrees
};

// 10 log10(1 / MSE) for [0,1] images, capped at the table sentinel.
inline double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= double(a.size());
    if (mse <= 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

// Cyclic Jacobi eigensolver for small symmetric matrices.
template <int N>
void jacobi_eigen(std::array<std::array<double, N>, N> a,
                  std::array<double, N>& eigvals,
                  std::array<std::array<double, N>, N>& eigvecs) {
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) eigvecs[i][j] = (i == j) ? 1.0 : 0.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1));
                double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (int i = 0; i < N; ++i) {
                    double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (int i = 0; i < N; ++i) {
                    double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (int i = 0; i < N; ++i) {
                    double vip = eigvecs[i][p], viq = eigvecs[i][q];
                    eigvecs[i][p] = c * vip - s * viq;
                    eigvecs[i][q] = s * vip + c * viq;
                }
            }
    }
    for (int i = 0; i < N; ++i) eigvals[i] = a[i][i];
}

}  // namespace detail

struct Alignment {
    double scale = 1;
    SE3 transform;  // p_aligned = scale * R p + t
    Trajectory aligned;
};

// Closed-form least-squares similarity (scale, rotation, translation) mapping
// the estimated camera positions onto ground truth; rotation solved by the
// quaternion formulation, which stays proper for planar trajectories.
inline Alignment umeyama_align(const Trajectory& est, const Trajectory& gt) {
    size_t n = est.size();
    if (n != gt.size()) throw std::invalid_argument("umeyama_align: length mismatch");
    if (n < 3) throw std::invalid_argument("umeyama_align: need at least 3 poses");

    Vec3d mean_e{0, 0, 0}, mean_g{0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
        mean_e += est[i].cam_to_world.t;
        mean_g += gt[i].cam_to_world.t;
    }
    mean_e *= 1.0 / double(n);
    mean_g *= 1.0 / double(n);

    // Cross moments S_ab = sum est_a * gt_b, plus est scatter for the
    // degeneracy check and the scale denominator.
    Mat3d s = Mat3d::zero();
    std::array<std::array<double, 3>, 3> scatter{};
    double var_e = 0;
    for (size_t i = 0; i < n; ++i) {
        Vec3d a = est[i].cam_to_world.t - mean_e;
        Vec3d b = gt[i].cam_to_world.t - mean_g;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                s(r, c) += a[r] * b[c];
                scatter[size_t(r)][size_t(c)] += a[r] * a[c];
            }
        var_e += a.squared_norm();
    }
    {
        std::array<double, 3> ev{};
        std::array<std::array<double, 3>, 3> vecs{};
        detail::jacobi_eigen<3>(scatter, ev, vecs);
        std::sort(ev.begin(), ev.end());
        if (!(ev[1] > 1e-12 * std::max(ev[2], 1e-300)))
            throw std::invalid_argument("umeyama_align: degenerate (collinear) trajectory");
    }

    double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2);
    double syx = s(1, 0), syy = s(1, 1), syz = s(1, 2);
    double szx = s(2, 0), szy = s(2, 1), szz = s(2, 2);
    std::array<std::array<double, 4>, 4> nmat = {{
        {sxx + syy + szz, syz - szy, szx - sxz, sxy - syx},
        {syz - szy, sxx - syy - szz, sxy + syx, szx + sxz},
        {szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy},
        {sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz},
    }};
    std::array<double, 4> ev{};
    std::array<std::array<double, 4>, 4> vecs{};
    detail::jacobi_eigen<4>(nmat, ev, vecs);
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (ev[size_t(i)] > ev[size_t(best)]) best = i;
    Quatd q{vecs[0][size_t(best)], vecs[1][size_t(best)], vecs[2][size_t(best)],
            vecs[3][size_t(best)]};
    q = quat_normalize(q);
    Mat3d rot = quat_to_mat(q);

    double num = 0;
    for (size_t i = 0; i < n; ++i) {
        Vec3d a = est[i].cam_to_world.t - mean_e;
        Vec3d b = gt[i].cam_to_world.t - mean_g;
        num += b.dot(rot * a);
    }
    Alignment out;
    out.scale = var_e > 0 ? num / var_e : 1.0;
    out.transform.q = q;
    out.transform.t = mean_g - rot * mean_e * out.scale;
    out.aligned = est;
    for (auto& e : out.aligned) {
        e.cam_to_world.t = rot * e.cam_to_world.t * out.scale + out.transform.t;
        e.cam_to_world.q = quat_normalize(quat_mul(q, e.cam_to_world.q));
    }
    return out;
}

// RMSE of camera position residuals; apply umeyama_align first.
inline double ate(const Trajectory& aligned, const Trajectory& gt) {
    if (aligned.size() != gt.size()) throw std::invalid_argument("ate: length mismatch");
    double acc = 0;
    for (size_t i = 0; i < aligned.size(); ++i)
        acc += (aligned[i].cam_to_world.t - gt[i].cam_to_world.t).squared_norm();
    return std::sqrt(acc / double(aligned.size()));
}

struct RpeResult {
    double rpe_trans = 0;  // RMSE of relative translation error norms, x100
    double rpe_rot = 0;    // RMSE of relative rotation errors, degrees
};

// Relative pose error over frame pairs (i, i+delta):
// E = (gt_i^-1 gt_{i+d})^-1 (est_i^-1 est_{i+d}).
inline RpeResult rpe(const Trajectory& est, const Trajectory& gt, int delta = 1) {
    if (est.size() != gt.size()) throw std::invalid_argument("rpe: length mismatch");
    if (delta < 1 || est.size() <= size_t(delta))
        throw std::invalid_argument("rpe: need more poses than delta");
    double sum_t2 = 0, sum_r2 = 0;
    size_t pairs = est.size() - size_t(delta);
    for (size_t i = 0; i < pairs; ++i) {
        SE3 rel_est = compose(inverse(est[i].cam_to_world), est[i + size_t(delta)].cam_to_world);
        SE3 rel_gt = compose(inverse(gt[i].cam_to_world), gt[i + size_t(delta)].cam_to_world);
        SE3 err = compose(inverse(rel_gt), rel_est);
        sum_t2 += err.t.squared_norm();
        double ang = quat_angle(err.q);
        sum_r2 += ang * ang;
    }
    RpeResult r;
    r.rpe_trans = 100.0 * std::sqrt(sum_t2 / double(pairs));
    r.rpe_rot = std::sqrt(sum_r2 / double(pairs)) * 180.0 / 3.14159265358979323846;
    return r;
}

}  // namespace cf3d
