#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <random>

#include "cf3d/metrics.hpp"

using namespace cf3d;

namespace {

std::mt19937 gen(99);
double urand(double lo = -1, double hi = 1) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
}

Image random_image(int w, int h, int c) {
    Image img(w, h, c);
    for (auto& v : img.data) v = std::uniform_real_distribution<double>(0, 1)(gen);
    return img;
}

Trajectory random_trajectory(size_t n) {
    Trajectory t;
    for (size_t i = 0; i < n; ++i) {
        TrajectoryEntry e;
        e.frame_index = int(i);
        Vec4d q{urand(), urand(), urand(), urand()};
        if (q.norm() < 1e-3) q.w += 1;
        e.cam_to_world.q = quat_normalize(q);
        e.cam_to_world.t = {urand(-3, 3), urand(-3, 3), urand(-3, 3)};
        t.push_back(e);
    }
    return t;
}

Trajectory apply_similarity(const Trajectory& t, double s, const SE3& g) {
    Trajectory out = t;
    Mat3d r = quat_to_mat(g.q);
    for (auto& e : out) {
        e.cam_to_world.t = r * e.cam_to_world.t * s + g.t;
        e.cam_to_world.q = quat_normalize(quat_mul(g.q, e.cam_to_world.q));
    }
    return out;
}

}  // namespace

TEST_CASE("psnr basics and oracle") {
    Image a = random_image(24, 24, 3);
    CHECK(psnr(a, a) == doctest::Approx(kPsnrCap));

    Image zeros(8, 8, 3, 0.0), ones(8, 8, 3, 1.0);
    CHECK(psnr(zeros, ones) == doctest::Approx(0.0).epsilon(1e-12));

    Image b = random_image(24, 24, 3);
    double mse = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                double d = a.at(x, y, c) - b.at(x, y, c);
                mse += d * d;
            }
    mse /= 24.0 * 24.0 * 3.0;
    CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(1 / mse)).epsilon(1e-10));
    CHECK(psnr(a, b) == psnr(b, a));

    Image odd(23, 24, 3);
    CHECK_THROWS(psnr(a, odd));
}

TEST_CASE("ssim: identity, anti-correlation, direct-formula oracle") {
    Image a = random_image(24, 20, 3);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Structured image vs its 0.5-centered negation.
    Image grad_img(24, 20, 1);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 24; ++x) grad_img.at(x, y, 0) = (x + y) % 7 / 7.0;
    Image neg = grad_img;
    for (auto& v : neg.data) v = 1.0 - v;
    CHECK(ssim(grad_img, neg) < 0.0);

    // Full 2D windowed direct formula, written independently of the
    // separable implementation.
    Image b = random_image(24, 20, 3);
    double kernel[11][11];
    double ksum = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            double dx = i - 5, dy = j - 5;
            kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return i;
    };
    double total = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 24; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int i = -5; i <= 5; ++i)
                    for (int j = -5; j <= 5; ++j) {
                        double w = kernel[j + 5][i + 5];
                        double va = a.at(reflect(x + i, 24), reflect(y + j, 20), c);
                        double vb = b.at(reflect(x + i, 24), reflect(y + j, 20), c);
                        mx += w * va;
                        my += w * vb;
                        mxx += w * va * va;
                        myy += w * vb * vb;
                        mxy += w * va * vb;
                    }
                double sxx = mxx - mx * mx, syy = myy - my * my, sxy = mxy - mx * my;
                total += ((2 * mx * my + kSsimC1) * (2 * sxy + kSsimC2)) /
                         ((mx * mx + my * my + kSsimC1) * (sxx + syy + kSsimC2));
            }
    total /= 24.0 * 20.0 * 3.0;
    CHECK(ssim(a, b) == doctest::Approx(total).epsilon(1e-8));
}

TEST_CASE("umeyama recovers identity on equal trajectories") {
    Trajectory t = random_trajectory(12);
    Alignment al = umeyama_align(t, t);
    CHECK(al.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(al.transform.t.norm() < 1e-9);
    CHECK(std::abs(std::abs(al.transform.q.w) - 1.0) < 1e-9);
    CHECK(ate(al.aligned, t) < 1e-12);
}

TEST_CASE("umeyama recovers a planted similarity to 1e-9") {
    for (int it = 0; it < 20; ++it) {
        Trajectory gt = random_trajectory(15);
        SE3 g;
        Vec4d q{urand(), urand(), urand(), urand()};
        if (q.norm() < 1e-3) q.w += 1;
        g.q = quat_normalize(q);
        g.t = {urand(-5, 5), urand(-5, 5), urand(-5, 5)};
        double s = 2.5;
        // est = similarity(gt); aligning est onto gt must undo it.
        Trajectory est = apply_similarity(gt, s, g);
        Alignment al = umeyama_align(est, gt);
        CHECK(al.scale == doctest::Approx(1.0 / s).epsilon(1e-9));
        CHECK(ate(al.aligned, gt) < 1e-9);
    }
}

TEST_CASE("umeyama matches Eigen::umeyama") {
    Trajectory est = random_trajectory(20);
    Trajectory gt = random_trajectory(20);
    Alignment al = umeyama_align(est, gt);

    Eigen::MatrixXd src(3, 20), dst(3, 20);
    for (int i = 0; i < 20; ++i) {
        src.col(i) << est[size_t(i)].cam_to_world.t.x, est[size_t(i)].cam_to_world.t.y,
            est[size_t(i)].cam_to_world.t.z;
        dst.col(i) << gt[size_t(i)].cam_to_world.t.x, gt[size_t(i)].cam_to_world.t.y,
            gt[size_t(i)].cam_to_world.t.z;
    }
    Eigen::Matrix4d m = Eigen::umeyama(src, dst, true);
    double scale = std::cbrt(m.topLeftCorner<3, 3>().determinant());
    CHECK(al.scale == doctest::Approx(scale).epsilon(1e-9));
    Eigen::Matrix3d r = m.topLeftCorner<3, 3>() / scale;
    Mat3d mine = quat_to_mat(al.transform.q);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) CHECK(mine(a, b) == doctest::Approx(r(a, b)).epsilon(1e-8));
    CHECK(al.transform.t.x == doctest::Approx(m(0, 3)).epsilon(1e-8));
}

TEST_CASE("alignment beats a 1000-sample random similarity search") {
    Trajectory est = random_trajectory(15);
    Trajectory gt = random_trajectory(15);
    Alignment al = umeyama_align(est, gt);
    double best = ate(al.aligned, gt);
    for (int it = 0; it < 1000; ++it) {
        SE3 g;
        Vec4d q{urand(), urand(), urand(), urand()};
        if (q.norm() < 1e-3) q.w += 1;
        g.q = quat_normalize(q);
        g.t = {urand(-3, 3), urand(-3, 3), urand(-3, 3)};
        double s = std::exp(urand(-1.5, 1.5));
        CHECK(ate(apply_similarity(est, s, g), gt) >= best - 1e-12);
    }
}

TEST_CASE("umeyama rejects degenerate input") {
    Trajectory line;
    for (int i = 0; i < 6; ++i) {
        TrajectoryEntry e;
        e.frame_index = i;
        e.cam_to_world.t = {double(i), 2.0 * i, -1.0 * i};
        line.push_back(e);
    }
    CHECK_THROWS(umeyama_align(line, line));
    Trajectory two = random_trajectory(2);
    CHECK_THROWS(umeyama_align(two, two));
}

TEST_CASE("ate: hand-computed three-pose case and offset removal") {
    Trajectory gt = random_trajectory(3);
    Trajectory est = gt;
    est[0].cam_to_world.t += Vec3d{0.3, 0, 0};
    est[1].cam_to_world.t += Vec3d{0, -0.4, 0};
    est[2].cam_to_world.t += Vec3d{0, 0, 1.2};
    double want = std::sqrt((0.09 + 0.16 + 1.44) / 3.0);
    CHECK(ate(est, gt) == doctest::Approx(want).epsilon(1e-12));

    // A constant offset is absorbed by alignment.
    Trajectory base = random_trajectory(8);
    Trajectory moved = base;
    for (auto& e : moved) e.cam_to_world.t += Vec3d{1.5, -0.75, 3.0};
    Alignment al = umeyama_align(moved, base);
    CHECK(ate(al.aligned, base) < 1e-9);
}

TEST_CASE("rpe: zero on equal, hand-derivable single perturbation, offset invariance") {
    Trajectory gt = random_trajectory(10);
    RpeResult zero = rpe(gt, gt);
    CHECK(zero.rpe_trans == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(zero.rpe_rot == doctest::Approx(0.0).epsilon(1e-9));

    // Perturb one interior pose by a 1-degree rotation: exactly 2 pairs see it.
    Trajectory est = gt;
    double deg = 3.14159265358979323846 / 180.0;
    size_t k = 4;
    est[k].cam_to_world.q =
        quat_normalize(quat_mul(est[k].cam_to_world.q, quat_from_axis_angle(Vec3d{0, 0, 1}, deg)));
    RpeResult r = rpe(est, gt);
    double want_rot = std::sqrt(2.0 * 1.0 / 9.0);  // RMSE over 9 pairs, two 1-degree errors
    CHECK(r.rpe_rot == doctest::Approx(want_rot).epsilon(1e-6));

    // Global rigid transform of the estimate leaves RPE unchanged.
    SE3 g;
    g.q = quat_normalize(Vec4d{0.9, 0.2, -0.3, 0.1});
    g.t = {5, -2, 7};
    Trajectory moved = apply_similarity(est, 1.0, g);
    RpeResult r2 = rpe(moved, gt);
    CHECK(r2.rpe_rot == doctest::Approx(r.rpe_rot).epsilon(1e-10));
    CHECK(r2.rpe_trans == doctest::Approx(r.rpe_trans).epsilon(1e-10));

    CHECK_THROWS(rpe(gt, gt, 10));
}
