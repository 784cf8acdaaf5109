#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

namespace cf3d {

template <typename T>
struct Vec2 {
    T x{}, y{};

    Vec2() = default;
    Vec2(T x_, T y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(T s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    T dot(const Vec2& o) const { return x * o.x + y * o.y; }
    T norm() const { return std::sqrt(x * x + y * y); }
};

template <typename T>
struct Vec3 {
    T x{}, y{}, z{};

    Vec3() = default;
    Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(T s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(T s) { x *= s; y *= s; z *= s; return *this; }

    T dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    T squared_norm() const { return dot(*this); }
    T norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const { T n = norm(); return {x / n, y / n, z / n}; }
    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

template <typename T>
Vec3<T> operator*(T s, const Vec3<T>& v) { return v * s; }

template <typename T>
struct Vec4 {
    T w{}, x{}, y{}, z{};

    Vec4() = default;
    Vec4(T w_, T x_, T y_, T z_) : w(w_), x(x_), y(y_), z(z_) {}

    Vec4 operator+(const Vec4& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
    Vec4 operator-(const Vec4& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
    Vec4 operator*(T s) const { return {w * s, x * s, y * s, z * s}; }
    Vec4& operator+=(const Vec4& o) { w += o.w; x += o.x; y += o.y; z += o.z; return *this; }
    T dot(const Vec4& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    T norm() const { return std::sqrt(dot(*this)); }
    T& operator[](int i) { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }
    T operator[](int i) const { return i == 0 ? w : (i == 1 ? x : (i == 2 ? y : z)); }
};

// Row-major 3x3.
template <typename T>
struct Mat3 {
    std::array<T, 9> m{};

    static Mat3 identity() {
        Mat3 r;
        r.m = {T(1), 0, 0, 0, T(1), 0, 0, 0, T(1)};
        return r;
    }
    static Mat3 zero() { return Mat3{}; }

    T& operator()(int r, int c) { return m[size_t(r) * 3 + size_t(c)]; }
    T operator()(int r, int c) const { return m[size_t(r) * 3 + size_t(c)]; }

    Vec3<T> operator*(const Vec3<T>& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                T s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
    Mat3 operator+(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] + o.m[i];
        return r;
    }
    Mat3 operator*(T s) const {
        Mat3 r;
        for (int i = 0; i < 9; ++i) r.m[i] = m[i] * s;
        return r;
    }
    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }
    // Multiplies a transposed copy on the left: R^T * v.
    Vec3<T> transposed_mul(const Vec3<T>& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
                m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }
};

// Symmetric 3x3 stored as its six unique entries.
template <typename T>
struct SymMat3 {
    T xx{}, xy{}, xz{}, yy{}, yz{}, zz{};

    Mat3<T> full() const {
        Mat3<T> r;
        r.m = {xx, xy, xz, xy, yy, yz, xz, yz, zz};
        return r;
    }
    static SymMat3 from_full(const Mat3<T>& a) {
        return {a(0, 0), a(0, 1), a(0, 2), a(1, 1), a(1, 2), a(2, 2)};
    }
};

// Symmetric 2x2 stored as (xx, xy, yy).
template <typename T>
struct SymMat2 {
    T xx{}, xy{}, yy{};

    T det() const { return xx * yy - xy * xy; }
    SymMat2 inverse() const {
        T d = det();
        return {yy / d, -xy / d, xx / d};
    }
};

// Quaternions are stored (w, x, y, z), Hamilton convention.
template <typename T>
using Quat = Vec4<T>;

template <typename T>
Quat<T> quat_identity() { return {T(1), 0, 0, 0}; }

template <typename T>
Quat<T> quat_normalize(const Quat<T>& q) {
    T n2 = q.dot(q);
    // Early-out keeps normalization idempotent bitwise.
    if (std::abs(n2 - T(1)) < T(16) * std::numeric_limits<T>::epsilon()) return q;
    T n = std::sqrt(n2);
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

template <typename T>
Quat<T> quat_conjugate(const Quat<T>& q) { return {q.w, -q.x, -q.y, -q.z}; }

template <typename T>
Quat<T> quat_mul(const Quat<T>& a, const Quat<T>& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

// Rotation matrix of a unit quaternion.
template <typename T>
Mat3<T> quat_to_mat(const Quat<T>& q) {
    T w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3<T> r;
    r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
           2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
    return r;
}

// Quaternion of a proper rotation matrix (Shepperd's method).
template <typename T>
Quat<T> quat_from_mat(const Mat3<T>& r) {
    T tr = r(0, 0) + r(1, 1) + r(2, 2);
    Quat<T> q;
    if (tr > 0) {
        T s = std::sqrt(tr + 1) * 2;
        q = {s / 4, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
             (r(1, 0) - r(0, 1)) / s};
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        T s = std::sqrt(1 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
        q = {(r(2, 1) - r(1, 2)) / s, s / 4, (r(0, 1) + r(1, 0)) / s,
             (r(0, 2) + r(2, 0)) / s};
    } else if (r(1, 1) > r(2, 2)) {
        T s = std::sqrt(1 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
        q = {(r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, s / 4,
             (r(1, 2) + r(2, 1)) / s};
    } else {
        T s = std::sqrt(1 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
        q = {(r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
             (r(1, 2) + r(2, 1)) / s, s / 4};
    }
    return quat_normalize(q);
}

template <typename T>
Quat<T> quat_from_axis_angle(const Vec3<T>& axis, T angle_rad) {
    Vec3<T> a = axis.normalized();
    T h = angle_rad / 2;
    T s = std::sin(h);
    return {std::cos(h), a.x * s, a.y * s, a.z * s};
}

// Rotation angle in radians of a unit quaternion, in [0, pi]. The atan2 form
// stays accurate for near-identity rotations where acos loses digits.
template <typename T>
T quat_angle(const Quat<T>& q) {
    T v = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
    return 2 * std::atan2(v, std::abs(q.w));
}

template <typename T>
Quat<T> quat_slerp(const Quat<T>& a, Quat<T> b, T t) {
    T d = a.dot(b);
    if (d < 0) { b = b * T(-1); d = -d; }
    if (d > T(0.9995)) return quat_normalize(a + (b - a) * t);
    T th = std::acos(d);
    T sa = std::sin((1 - t) * th) / std::sin(th);
    T sb = std::sin(t * th) / std::sin(th);
    return quat_normalize(a * sa + b * sb);
}

// Adjoint of v / |v|: given dL/d(unit), returns dL/dv.
template <typename T>
Vec3<T> normalize_backward(const Vec3<T>& v, const Vec3<T>& d_unit) {
    T n = v.norm();
    Vec3<T> u = v / n;
    return (d_unit - u * u.dot(d_unit)) / n;
}

template <typename T>
Quat<T> quat_normalize_backward(const Quat<T>& q, const Quat<T>& d_unit) {
    T n = q.norm();
    Quat<T> u = {q.w / n, q.x / n, q.y / n, q.z / n};
    T proj = u.dot(d_unit);
    return {(d_unit.w - u.w * proj) / n, (d_unit.x - u.x * proj) / n,
            (d_unit.y - u.y * proj) / n, (d_unit.z - u.z * proj) / n};
}

// Adjoint of quat_to_mat at a unit quaternion: contracts dL/dR with dR/dq.
template <typename T>
Quat<T> quat_to_mat_backward(const Quat<T>& q, const Mat3<T>& dR) {
    T w = q.w, x = q.x, y = q.y, z = q.z;
    Quat<T> g;
    g.w = 2 * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) -
               y * dR(2, 0) + x * dR(2, 1));
    g.x = 2 * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - 2 * x * dR(1, 1) -
               w * dR(1, 2) + z * dR(2, 0) + w * dR(2, 1) - 2 * x * dR(2, 2));
    g.y = 2 * (-2 * y * dR(0, 0) + x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) +
               z * dR(1, 2) - w * dR(2, 0) + z * dR(2, 1) - 2 * y * dR(2, 2));
    g.z = 2 * (-2 * z * dR(0, 0) - w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) -
               2 * z * dR(1, 1) + y * dR(1, 2) + x * dR(2, 0) + y * dR(2, 1));
    return g;
}

// Adjoints of c = a*b (quaternion product): dL/da and dL/db from dL/dc.
template <typename T>
Quat<T> quat_mul_backward_a(const Quat<T>& b, const Quat<T>& dc) {
    // c = R(b) a with R(b) the right-multiplication matrix; dL/da = R(b)^T dc.
    return {b.w * dc.w + b.x * dc.x + b.y * dc.y + b.z * dc.z,
            -b.x * dc.w + b.w * dc.x - b.z * dc.y + b.y * dc.z,
            -b.y * dc.w + b.z * dc.x + b.w * dc.y - b.x * dc.z,
            -b.z * dc.w - b.y * dc.x + b.x * dc.y + b.w * dc.z};
}

template <typename T>
Quat<T> quat_mul_backward_b(const Quat<T>& a, const Quat<T>& dc) {
    // c = L(a) b with L(a) the left-multiplication matrix; dL/db = L(a)^T dc.
    return {a.w * dc.w + a.x * dc.x + a.y * dc.y + a.z * dc.z,
            -a.x * dc.w + a.w * dc.x + a.z * dc.y - a.y * dc.z,
            -a.y * dc.w - a.z * dc.x + a.w * dc.y + a.x * dc.z,
            -a.z * dc.w + a.y * dc.x - a.x * dc.y + a.w * dc.z};
}

template <typename T>
inline T sigmoid(T v) { return T(1) / (T(1) + std::exp(-v)); }

template <typename T>
inline T inverse_sigmoid(T v) { return std::log(v / (T(1) - v)); }

using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Vec4d = Vec4<double>;
using Quatd = Quat<double>;
using Mat3d = Mat3<double>;
using SymMat3d = SymMat3<double>;
using SymMat2d = SymMat2<double>;

}  // namespace cf3d
