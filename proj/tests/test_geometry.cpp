#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstring>
#include <random>

#include "cf3d/camera.hpp"
#include "cf3d/gaussian_cloud.hpp"
#include "cf3d/sh.hpp"

using namespace cf3d;

namespace {

std::mt19937 rng(12345);

double urand(double lo = -1, double hi = 1) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec4d random_quat_raw() {
    Vec4d q{urand(), urand(), urand(), urand()};
    if (q.norm() < 1e-3) q.w += 1;
    return q;
}

SE3 random_pose() {
    SE3 t;
    t.q = quat_normalize(random_quat_raw());
    t.t = {urand(-2, 2), urand(-2, 2), urand(-2, 2)};
    return t;
}

Eigen::Matrix3d to_eigen(const Mat3d& m) {
    Eigen::Matrix3d e;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) e(r, c) = m(r, c);
    return e;
}

GaussianCloud random_cloud(size_t n, int degree = 0) {
    GaussianCloud c;
    c.sh_degree = degree;
    c.resize(n);
    for (size_t i = 0; i < n; ++i) {
        c.positions[i] = {urand(-2, 2), urand(-2, 2), urand(2, 6)};
        c.rotations_raw[i] = random_quat_raw();
        c.scales_raw[i] = {urand(-3, -1), urand(-3, -1), urand(-3, -1)};
        c.opacities_raw[i] = urand(-2, 2);
        for (auto& s : c.sh_of(i)) s = {urand(), urand(), urand()};
    }
    return c;
}

}  // namespace

TEST_CASE("build_covariance: unit quaternion and unit scales give identity") {
    SymMat3d c = build_covariance({1, 0, 0, 0}, {0, 0, 0});
    CHECK(c.xx == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.yy == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.zz == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(c.xy) < 1e-15);
    CHECK(std::abs(c.xz) < 1e-15);
    CHECK(std::abs(c.yz) < 1e-15);
}

TEST_CASE("build_covariance: axis-aligned log-scale squares to diag(4,1,1)") {
    SymMat3d c = build_covariance({1, 0, 0, 0}, {std::log(2.0), 0, 0});
    CHECK(c.xx == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(c.yy == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.zz == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("build_covariance matches dense R S S^T R^T oracle") {
    for (int it = 0; it < 200; ++it) {
        Vec4d q = random_quat_raw();
        Vec3d s{urand(-2, 1), urand(-2, 1), urand(-2, 1)};
        SymMat3d c = build_covariance(q, s);

        Quatd qn = quat_normalize(q);
        Eigen::Quaterniond eq(qn.w, qn.x, qn.y, qn.z);
        Eigen::Matrix3d r = eq.toRotationMatrix();
        Eigen::Matrix3d sd = Eigen::Vector3d(std::exp(s.x), std::exp(s.y), std::exp(s.z)).asDiagonal();
        Eigen::Matrix3d ref = r * sd * sd.transpose() * r.transpose();
        Eigen::Matrix3d got = to_eigen(c.full());
        CHECK((ref - got).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("build_covariance stays PSD over 10^4 random draws") {
    for (int it = 0; it < 10000; ++it) {
        Vec4d q = random_quat_raw();
        Vec3d s{urand(-4, 2), urand(-4, 2), urand(-4, 2)};
        SymMat3d c = build_covariance(q, s);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(to_eigen(c.full()));
        CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
}

TEST_CASE("build_covariance rejects the zero quaternion") {
    CHECK_THROWS(build_covariance({0, 0, 0, 0}, {0, 0, 0}));
}

TEST_CASE("eval_gaussian: value 1 at the mean, unit case, range (0,1]") {
    SymMat3d eye = build_covariance({1, 0, 0, 0}, {0, 0, 0});
    Vec3d mu{0.3, -0.4, 1.7};
    CHECK(eval_gaussian(mu, mu, eye) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eval_gaussian({mu.x + 1, mu.y, mu.z}, mu, eye) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
    for (int it = 0; it < 100; ++it) {
        SymMat3d c = build_covariance(random_quat_raw(), {urand(-2, 1), urand(-2, 1), urand(-2, 1)});
        double v = eval_gaussian({urand(), urand(), urand()}, {urand(), urand(), urand()}, c);
        CHECK(v > 0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("eval_gaussian matches an Eigen Cholesky-solve oracle") {
    for (int it = 0; it < 100; ++it) {
        SymMat3d c = build_covariance(random_quat_raw(), {urand(-1.5, 1), urand(-1.5, 1), urand(-1.5, 1)});
        Vec3d mu{urand(), urand(), urand()};
        Vec3d x{urand(), urand(), urand()};
        Eigen::Matrix3d a = to_eigen(c.full());
        a.diagonal().array() += 1e-9;
        Eigen::Vector3d d(x.x - mu.x, x.y - mu.y, x.z - mu.z);
        double quad = d.dot(a.llt().solve(d));
        double ref = std::exp(-0.5 * quad);
        CHECK(eval_gaussian(x, mu, c) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("eval_sh_color: band 0 only") {
    double g = 0.37;
    std::vector<Vec3d> sh{{g, g, g}};
    Vec3d c = eval_sh_color(sh, Vec3d{0, 0, 1}, 0);
    CHECK(c.x == doctest::Approx(g * 0.28209479177387814 + 0.5).epsilon(1e-12));
    CHECK(c.y == c.x);
    CHECK(c.z == c.x);

    Vec3d c2 = eval_sh_color(sh, Vec3d{1, 0, 0}, 0);
    CHECK(c.x == c2.x);  // exact view independence at degree 0
    CHECK(c.y == c2.y);
    CHECK(c.z == c2.z);
}

TEST_CASE("eval_sh_color rejects short coefficient arrays") {
    std::vector<Vec3d> sh(4);
    CHECK_THROWS(eval_sh_color(sh, Vec3d{0, 0, 1}, 2));
}

// Independent table of the canonical real spherical harmonics, mapped onto
// the renderer's ordering/sign convention ((-1)^m on odd-m terms).
TEST_CASE("eval_sh_color degree 3 matches a canonical-table oracle") {
    const double pi = 3.14159265358979323846;
    auto oracle_basis = [&](const Vec3d& d, double* b) {
        double x = d.x, y = d.y, z = d.z;
        b[0] = 0.5 * std::sqrt(1 / pi);
        b[1] = -(std::sqrt(3 / (4 * pi)) * y);
        b[2] = std::sqrt(3 / (4 * pi)) * z;
        b[3] = -(std::sqrt(3 / (4 * pi)) * x);
        b[4] = 0.5 * std::sqrt(15 / pi) * x * y;
        b[5] = -(0.5 * std::sqrt(15 / pi) * y * z);
        b[6] = 0.25 * std::sqrt(5 / pi) * (3 * z * z - 1);
        b[7] = -(0.5 * std::sqrt(15 / pi) * x * z);
        b[8] = 0.25 * std::sqrt(15 / pi) * (x * x - y * y);
        b[9] = -(0.25 * std::sqrt(35 / (2 * pi)) * y * (3 * x * x - y * y));
        b[10] = 0.5 * std::sqrt(105 / pi) * x * y * z;
        b[11] = -(0.25 * std::sqrt(21 / (2 * pi)) * y * (5 * z * z - 1));
        b[12] = 0.25 * std::sqrt(7 / pi) * z * (5 * z * z - 3);
        b[13] = -(0.25 * std::sqrt(21 / (2 * pi)) * x * (5 * z * z - 1));
        b[14] = 0.25 * std::sqrt(105 / pi) * 0.5 * z * (x * x - y * y) * 2;
        b[15] = -(0.25 * std::sqrt(35 / (2 * pi)) * x * (x * x - 3 * y * y));
    };
    for (int it = 0; it < 50; ++it) {
        std::vector<Vec3d> sh(16);
        for (auto& s : sh) s = {urand(), urand(), urand()};
        Vec3d dir = Vec3d{urand(), urand(), urand()}.normalized();
        double b[16];
        oracle_basis(dir, b);
        Vec3d want{0.5, 0.5, 0.5};
        for (int i = 0; i < 16; ++i) want += sh[size_t(i)] * b[i];
        want = {std::max(0.0, want.x), std::max(0.0, want.y), std::max(0.0, want.z)};
        Vec3d got = eval_sh_color(sh, dir, 3);
        CHECK(std::abs(got.x - want.x) < 1e-10);
        CHECK(std::abs(got.y - want.y) < 1e-10);
        CHECK(std::abs(got.z - want.z) < 1e-10);
    }
}

TEST_CASE("quaternion normalization is idempotent bitwise") {
    for (int it = 0; it < 100; ++it) {
        Quatd q = quat_normalize(random_quat_raw());
        Quatd q2 = quat_normalize(q);
        CHECK(std::memcmp(&q, &q2, sizeof(q)) == 0);
    }
}

TEST_CASE("transform_cloud: identity leaves the cloud intact") {
    GaussianCloud c = random_cloud(20, 1);
    GaussianCloud t = transform_cloud(c, SE3::identity());
    CHECK(t.size() == c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        CHECK((t.positions[i] - c.positions[i]).norm() < 1e-15);
        CHECK((t.rotations_raw[i] - c.rotations_raw[i]).norm() < 1e-15);
        CHECK(t.scales_raw[i].x == c.scales_raw[i].x);
        CHECK(t.opacities_raw[i] == c.opacities_raw[i]);
    }
    CHECK(t.sh_coeffs.size() == c.sh_coeffs.size());
}

TEST_CASE("transform_cloud composed with its inverse restores positions") {
    GaussianCloud c = random_cloud(30);
    SE3 t = random_pose();
    GaussianCloud back = transform_cloud(transform_cloud(c, t), inverse(t));
    for (size_t i = 0; i < c.size(); ++i)
        CHECK((back.positions[i] - c.positions[i]).norm() < 1e-12);
}

TEST_CASE("transform_cloud rotates covariance as R Sigma R^T") {
    for (int it = 0; it < 50; ++it) {
        GaussianCloud c = random_cloud(1);
        SE3 t = random_pose();
        GaussianCloud moved = transform_cloud(c, t);
        Eigen::Matrix3d sigma = to_eigen(build_covariance(c.rotations_raw[0], c.scales_raw[0]).full());
        Eigen::Matrix3d got = to_eigen(build_covariance(moved.rotations_raw[0], moved.scales_raw[0]).full());
        Eigen::Matrix3d r = to_eigen(t.rotation());
        Eigen::Matrix3d want = r * sigma * r.transpose();
        CHECK((want - got).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("transform_cloud preserves count and invariants") {
    GaussianCloud c = random_cloud(25, 2);
    SE3 t = random_pose();
    GaussianCloud m = transform_cloud(c, t);
    CHECK(m.size() == c.size());
    CHECK(m.consistent());
    for (size_t i = 0; i < m.size(); ++i) {
        Vec3d s = m.activated_scale(i);
        CHECK(s.x > 0);
        CHECK(std::isfinite(s.x));
        double o = m.activated_opacity(i);
        CHECK(o > 0);
        CHECK(o < 1);
        CHECK(std::abs(quat_normalize(m.rotations_raw[i]).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("project_point: optical axis hits the principal point") {
    CameraIntrinsics k{100, 100, 50, 50, 100, 100};
    ProjectedPoint p = project_point({0, 0, 1}, SE3::identity(), k);
    CHECK(p.in_front);
    CHECK(p.pixel.x == doctest::Approx(50.0));
    CHECK(p.pixel.y == doctest::Approx(50.0));
    CHECK(p.depth == doctest::Approx(1.0));

    ProjectedPoint q = project_point({0.5, 0, 1}, SE3::identity(), k);
    CHECK(q.pixel.x == doctest::Approx(100.0));
    CHECK(q.pixel.y == doctest::Approx(50.0));
}

TEST_CASE("project_point flags points behind the near plane") {
    CameraIntrinsics k{100, 100, 50, 50, 100, 100};
    CHECK_FALSE(project_point({0, 0, -1}, SE3::identity(), k).in_front);
    CHECK_FALSE(project_point({0, 0, 0.005}, SE3::identity(), k).in_front);
}

TEST_CASE("project_point matches a homogeneous-matrix pipeline oracle") {
    CameraIntrinsics k{240, 260, 63, 70, 128, 144};
    for (int it = 0; it < 200; ++it) {
        SE3 w2c = random_pose();
        Vec3d mu{urand(-3, 3), urand(-3, 3), urand(-3, 3)};
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        Quatd qn = quat_normalize(w2c.q);
        m.topLeftCorner<3, 3>() = Eigen::Quaterniond(qn.w, qn.x, qn.y, qn.z).toRotationMatrix();
        m.topRightCorner<3, 1>() = Eigen::Vector3d(w2c.t.x, w2c.t.y, w2c.t.z);
        Eigen::Vector4d hom = m * Eigen::Vector4d(mu.x, mu.y, mu.z, 1);
        if (hom.z() <= kZNear) continue;
        Eigen::Matrix3d km;
        km << k.fx, 0, k.cx, 0, k.fy, k.cy, 0, 0, 1;
        Eigen::Vector3d px = km * hom.head<3>() / hom.z();
        if (std::abs(px.x()) > 2000 || std::abs(px.y()) > 2000) continue;
        ProjectedPoint p = project_point(mu, w2c, k);
        REQUIRE(p.in_front);
        CHECK(std::abs(p.pixel.x - px.x()) < 1e-12);
        CHECK(std::abs(p.pixel.y - px.y()) < 1e-12);
        CHECK(std::abs(p.depth - hom.z()) < 1e-12);
    }
}

TEST_CASE("pose equivalence: both readings of the projection identity agree") {
    CameraIntrinsics k{110, 110, 64, 64, 128, 128};

    GaussianCloud c = random_cloud(10);
    CHECK(pose_equivalence_check(c, SE3::identity(), k) == 0.0);

    int done = 0;
    while (done < 100) {
        GaussianCloud cloud = random_cloud(40);
        SE3 w2c = random_pose();
        w2c.t.z += 6;  // keep the cloud in front
        bool ok = true;
        for (auto& mu : cloud.positions)
            if (w2c.apply(mu).z <= kZNear) ok = false;
        if (!ok) continue;
        CHECK(pose_equivalence_check(cloud, w2c, k) < 1e-10);
        ++done;
    }

    GaussianCloud single = random_cloud(1);
    single.positions[0] = {0, 0, 2};
    SE3 push;
    push.t = {0, 0, 1};
    GaussianCloud moved = transform_cloud(single, push);
    ProjectedPoint a = project_point(single.positions[0], push, k);
    ProjectedPoint b = project_point(moved.positions[0], SE3::identity(), k);
    CHECK(a.depth == doctest::Approx(3.0));
    CHECK(b.depth == doctest::Approx(3.0));
}

TEST_CASE("lift_depth: constant plane, principal ray, holes, errors") {
    CameraIntrinsics k{100, 100, 32, 32, 64, 64};
    Image depth(64, 64, 1, 1.0);
    std::vector<Vec3d> pts = lift_depth(depth, k, 1);
    CHECK(pts.size() == 64u * 64u);
    for (auto& p : pts) CHECK(p.z == doctest::Approx(1.0));
    // Frustum span at z=1: x in [(0-32)/100, (63-32)/100].
    double min_x = 1e9, max_x = -1e9;
    for (auto& p : pts) { min_x = std::min(min_x, p.x); max_x = std::max(max_x, p.x); }
    CHECK(min_x == doctest::Approx(-0.32));
    CHECK(max_x == doctest::Approx(0.31));

    Image d2(64, 64, 1, 0.0);
    d2.at(32, 32, 0) = 2.5;
    std::vector<Vec3d> one = lift_depth(d2, k, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].x == doctest::Approx(0.0));
    CHECK(one[0].y == doctest::Approx(0.0));
    CHECK(one[0].z == doctest::Approx(2.5));

    Image holes(64, 64, 1, 0.0);
    CHECK_THROWS(lift_depth(holes, k, 1));
    CHECK_THROWS(lift_depth(depth, k, 0));

    std::vector<Vec3d> strided = lift_depth(depth, k, 3);
    CHECK(strided.size() <= size_t((64 + 2) / 3) * size_t((64 + 2) / 3));
}

TEST_CASE("SE3 compose/inverse/to_matrix against matrix oracles") {
    SE3 t = random_pose();
    SE3 tid = compose(t, SE3::identity());
    CHECK((tid.t - t.t).norm() < 1e-14);
    CHECK(std::min((tid.q - t.q).norm(), (tid.q + t.q).norm()) < 1e-14);

    // Chain of 10 vs homogeneous products.
    std::vector<SE3> chain;
    for (int i = 0; i < 10; ++i) chain.push_back(random_pose());
    SE3 acc = SE3::identity();
    Eigen::Matrix4d macc = Eigen::Matrix4d::Identity();
    for (const SE3& s : chain) {
        acc = compose(acc, s);
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = to_eigen(s.rotation());
        m.topRightCorner<3, 1>() = Eigen::Vector3d(s.t.x, s.t.y, s.t.z);
        macc = macc * m;
    }
    std::array<double, 16> got = to_matrix(acc);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(std::abs(got[size_t(r) * 4 + size_t(c)] - macc(r, c)) < 1e-10);

    // inverse(inverse(t)) == t up to quaternion sign.
    SE3 tt = inverse(inverse(t));
    CHECK((tt.t - t.t).norm() < 1e-12);
    CHECK(std::min((tt.q - t.q).norm(), (tt.q + t.q).norm()) < 1e-12);

    // compose(t, inverse(t)) == identity.
    SE3 e = compose(t, inverse(t));
    CHECK(e.t.norm() < 1e-9);
    CHECK(std::abs(std::abs(e.q.w) - 1) < 1e-9);

    // Associativity on random triples.
    for (int it = 0; it < 50; ++it) {
        SE3 a = random_pose(), b = random_pose(), c = random_pose();
        SE3 ab_c = compose(compose(a, b), c);
        SE3 a_bc = compose(a, compose(b, c));
        CHECK((ab_c.t - a_bc.t).norm() < 1e-10);
        CHECK(std::min((ab_c.q - a_bc.q).norm(), (ab_c.q + a_bc.q).norm()) < 1e-10);
    }
}

TEST_CASE("quat_from_mat round trips") {
    for (int it = 0; it < 200; ++it) {
        Quatd q = quat_normalize(random_quat_raw());
        Quatd r = quat_from_mat(quat_to_mat(q));
        CHECK(std::min((r - q).norm(), (r + q).norm()) < 1e-12);
    }
}

TEST_CASE("quaternion derivative helpers agree with finite differences") {
    const double h = 1e-6;
    for (int it = 0; it < 20; ++it) {
        Quatd q = random_quat_raw();
        Mat3d dR;
        for (int i = 0; i < 9; ++i) dR.m[size_t(i)] = urand();

        // d/dq of <dR, R(normalize(q))>.
        Quatd analytic = quat_normalize_backward(q, quat_to_mat_backward(quat_normalize(q), dR));
        for (int i = 0; i < 4; ++i) {
            Quatd qp = q, qm = q;
            qp[i] += h;
            qm[i] -= h;
            double fp = 0, fm = 0;
            Mat3d rp = quat_to_mat(quat_normalize(qp)), rm = quat_to_mat(quat_normalize(qm));
            for (int j = 0; j < 9; ++j) {
                fp += dR.m[size_t(j)] * rp.m[size_t(j)];
                fm += dR.m[size_t(j)] * rm.m[size_t(j)];
            }
            CHECK(analytic[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
        }

        // Product rule adjoints.
        Quatd a = random_quat_raw(), b = random_quat_raw();
        Quatd dc{urand(), urand(), urand(), urand()};
        Quatd da = quat_mul_backward_a(b, dc);
        Quatd db = quat_mul_backward_b(a, dc);
        for (int i = 0; i < 4; ++i) {
            Quatd ap = a, am = a;
            ap[i] += h;
            am[i] -= h;
            double fp = quat_mul(ap, b).dot(dc), fm = quat_mul(am, b).dot(dc);
            CHECK(da[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
            Quatd bp = b, bm = b;
            bp[i] += h;
            bm[i] -= h;
            fp = quat_mul(a, bp).dot(dc);
            fm = quat_mul(a, bm).dot(dc);
            CHECK(db[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
        }
    }
}
