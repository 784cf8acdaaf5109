#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cf3d/image.hpp"
#include "cf3d/parallel.hpp"

namespace cf3d {

inline constexpr int kSsimRadius = 5;  // 11x11 window
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline const std::array<double, 11>& ssim_window() {
    static const std::array<double, 11> w = [] {
        std::array<double, 11> k{};
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            double d = i - kSsimRadius;
            k[size_t(i)] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
            sum += k[size_t(i)];
        }
        for (double& v : k) v /= sum;
        return k;
    }();
    return w;
}

inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Serial separable gaussian blur with symmetric border reflection. Interior
// pixels take the branch-free path.
inline void blur_plane(const double* src, double* dst, double* tmp, int w, int h) {
    const auto& k = ssim_window();
    const int r = kSsimRadius;
    for (int y = 0; y < h; ++y) {
        const double* row = src + size_t(y) * size_t(w);
        double* out = tmp + size_t(y) * size_t(w);
        int x = 0;
        for (; x < std::min(r, w); ++x) {
            double s = 0;
            for (int t = -r; t <= r; ++t) s += k[size_t(t + r)] * row[reflect_index(x + t, w)];
            out[x] = s;
        }
        for (; x < w - r; ++x) {
            double s = 0;
            for (int t = -r; t <= r; ++t) s += k[size_t(t + r)] * row[x + t];
            out[x] = s;
        }
        for (; x < w; ++x) {
            double s = 0;
            for (int t = -r; t <= r; ++t) s += k[size_t(t + r)] * row[reflect_index(x + t, w)];
            out[x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        double* out = dst + size_t(y) * size_t(w);
        if (y >= r && y < h - r) {
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int t = -r; t <= r; ++t)
                    s += k[size_t(t + r)] * tmp[size_t(y + t) * size_t(w) + size_t(x)];
                out[x] = s;
            }
        } else {
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int t = -r; t <= r; ++t)
                    s += k[size_t(t + r)] * tmp[size_t(reflect_index(y + t, h)) * size_t(w) + size_t(x)];
                out[x] = s;
            }
        }
    }
}

// Adjoint of blur_plane (scatter with the same reflection). Accumulates.
inline void blur_plane_adjoint(const double* d_out, double* d_src, double* tmp, int w, int h) {
    const auto& k = ssim_window();
    const int r = kSsimRadius;
    size_t plane = size_t(w) * size_t(h);
    for (size_t i = 0; i < plane; ++i) tmp[i] = 0;
    // Adjoint of the vertical pass.
    for (int y = 0; y < h; ++y) {
        const double* src_row = d_out + size_t(y) * size_t(w);
        if (y >= r && y < h - r) {
            for (int t = -r; t <= r; ++t) {
                double kv = k[size_t(t + r)];
                double* dst_row = tmp + size_t(y + t) * size_t(w);
                for (int x = 0; x < w; ++x) dst_row[x] += kv * src_row[x];
            }
        } else {
            for (int t = -r; t <= r; ++t) {
                double kv = k[size_t(t + r)];
                double* dst_row = tmp + size_t(reflect_index(y + t, h)) * size_t(w);
                for (int x = 0; x < w; ++x) dst_row[x] += kv * src_row[x];
            }
        }
    }
    // Adjoint of the horizontal pass.
    for (int y = 0; y < h; ++y) {
        const double* src_row = tmp + size_t(y) * size_t(w);
        double* dst_row = d_src + size_t(y) * size_t(w);
        for (int x = 0; x < w; ++x) {
            double v = src_row[x];
            if (v == 0) continue;
            if (x >= r && x < w - r) {
                for (int t = -r; t <= r; ++t) dst_row[x + t] += k[size_t(t + r)] * v;
            } else {
                for (int t = -r; t <= r; ++t)
                    dst_row[reflect_index(x + t, w)] += k[size_t(t + r)] * v;
            }
        }
    }
}

}  // namespace detail

// Mean SSIM over all pixels and channels; when d_first is non-null it
// receives dSSIM/d(a), the analytic gradient w.r.t. the first image.
// Channels evaluate in parallel.
inline double ssim(const Image& a, const Image& b, Image* d_first = nullptr) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    int w = a.width, h = a.height;
    size_t plane = a.plane();
    if (d_first) *d_first = Image(w, h, a.channels);

    std::vector<double> channel_sums(size_t(a.channels), 0.0);
    double inv_n = 1.0 / (double(plane) * a.channels);

    parallel_for(size_t(a.channels), [&](size_t c) {
        std::vector<double> mu_x(plane), mu_y(plane), xx(plane), yy(plane), xy(plane);
        std::vector<double> tmp(plane), buf(plane);
        const double* px = a.data.data() + c * plane;
        const double* py = b.data.data() + c * plane;
        for (size_t i = 0; i < plane; ++i) buf[i] = px[i] * px[i];
        detail::blur_plane(buf.data(), xx.data(), tmp.data(), w, h);
        for (size_t i = 0; i < plane; ++i) buf[i] = py[i] * py[i];
        detail::blur_plane(buf.data(), yy.data(), tmp.data(), w, h);
        for (size_t i = 0; i < plane; ++i) buf[i] = px[i] * py[i];
        detail::blur_plane(buf.data(), xy.data(), tmp.data(), w, h);
        detail::blur_plane(px, mu_x.data(), tmp.data(), w, h);
        detail::blur_plane(py, mu_y.data(), tmp.data(), w, h);

        std::vector<double> q_mu, q_xx, q_xy;
        if (d_first) {
            q_mu.resize(plane);
            q_xx.resize(plane);
            q_xy.resize(plane);
        }
        double total = 0;
        for (size_t i = 0; i < plane; ++i) {
            double mx = mu_x[i], my = mu_y[i];
            double sxx = xx[i] - mx * mx;
            double syy = yy[i] - my * my;
            double sxy = xy[i] - mx * my;
            double a1 = 2 * mx * my + kSsimC1, a2 = 2 * sxy + kSsimC2;
            double b1 = mx * mx + my * my + kSsimC1, b2 = sxx + syy + kSsimC2;
            double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (d_first) {
                double ds_dmx = (2 * my * a2) / (b1 * b2) - s * 2 * mx / b1;
                double ds_dsxx = -s / b2;
                double ds_dsxy = 2 * a1 / (b1 * b2);
                q_mu[i] = inv_n * (ds_dmx - 2 * mx * ds_dsxx - my * ds_dsxy);
                q_xx[i] = inv_n * ds_dsxx;
                q_xy[i] = inv_n * ds_dsxy;
            }
        }
        channel_sums[c] = total;

        if (d_first) {
            double* dx = d_first->data.data() + c * plane;
            detail::blur_plane_adjoint(q_mu.data(), dx, tmp.data(), w, h);
            std::vector<double> adj(plane, 0.0);
            detail::blur_plane_adjoint(q_xx.data(), adj.data(), tmp.data(), w, h);
            for (size_t i = 0; i < plane; ++i) dx[i] += 2 * px[i] * adj[i];
            std::fill(adj.begin(), adj.end(), 0.0);
            detail::blur_plane_adjoint(q_xy.data(), adj.data(), tmp.data(), w, h);
            for (size_t i = 0; i < plane; ++i) dx[i] += py[i] * adj[i];
        }
    });

    double total = 0;
    for (double v : channel_sums) total += v;  // fixed order
    return total * inv_n;
}

}  // namespace cf3d
