#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cf3d/gaussian_cloud.hpp"
#include "cf3d/parallel.hpp"

namespace cf3d {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaClip = 0.99;
inline constexpr double kAlphaSkip = 1.0 / 255.0;
inline constexpr double kCovDilation = 0.3;  // px^2 low-pass guard on cov2d

struct RenderOptions {
    Vec3d background{0, 0, 0};
    double z_near = kZNear;
    // Early-termination threshold on per-pixel transmittance. Kept two
    // decades under the renderer-equivalence test tolerance.
    double transmittance_eps = 1e-7;
    // Contributions below this alpha are dropped. Gradient checks lower it
    // so finite differences probe a smooth neighborhood.
    double alpha_skip = kAlphaSkip;
};

struct Splat2D {
    Vec2d center;       // pixel coordinates
    SymMat2d cov2d;     // dilated screen-space covariance, px^2
    double depth = 0;   // view-space z
    Vec3d rgb;
    double opacity = 0;
    int source_index = -1;
};

struct RenderOutput {
    Image color;  // 3 channels
    Image alpha;  // 1 channel, accumulated opacity
    Image depth;  // 1 channel, alpha-weighted expected depth (unnormalized)
    std::vector<double> radii;            // screen radius per gaussian, 0 if culled
    std::vector<double> screen_grad_sum;  // sum of view-space position-gradient norms
    std::vector<int> screen_hits;         // backward passes the gaussian contributed to
};

struct CloudGradients {
    std::vector<Vec3d> positions;
    std::vector<Vec3d> sh_coeffs;
    std::vector<Vec4d> rotations_raw;
    std::vector<Vec3d> scales_raw;
    std::vector<double> opacities_raw;

    void resize_like(const GaussianCloud& c) {
        positions.assign(c.size(), {});
        sh_coeffs.assign(c.sh_coeffs.size(), {});
        rotations_raw.assign(c.size(), {});
        scales_raw.assign(c.size(), {});
        opacities_raw.assign(c.size(), 0.0);
    }
};

// Gradient w.r.t. the raw 7 pose parameters (quaternion is normalized inside
// the forward pass, so this already includes the normalization Jacobian).
struct PoseGradient {
    Vec4d q{0, 0, 0, 0};
    Vec3d t{0, 0, 0};
};

namespace detail {

struct SplatGeom {
    bool visible = false;
    bool clamped_x = false, clamped_y = false;  // Jacobian clamp engaged
    Vec3d p_cam;
    Vec4d q_cam_raw;
    Vec2d center;
    double depth = 0;
    SymMat2d conic;
    double power_min = 0;  // alpha below kAlphaSkip past this falloff
    double radius = 0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bbox
    SymMat2d cov2d;  // dilated
    Vec3d rgb;
    double opacity = 0;
};

// Hot per-tile copy of the fields the pixel loops touch, in depth order.
struct TileEntry {
    double cx, cy;
    double ca, cb, cc;  // conic
    double power_min;
    double opacity;
    Vec3d rgb;
    double depth;
    int id;
    int x0, x1, y0, y1;
};

struct RasterScene {
    std::vector<SplatGeom> geo;
    std::vector<int> order;  // visible gaussians, front to back
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<TileEntry>> tile_lists;  // depth order per tile
};

inline SplatGeom project_one(const GaussianCloud& cloud, size_t i, const Quatd& pose_q_unit,
                             const Mat3d& pose_rot, const Vec3d& pose_t,
                             const CameraIntrinsics& k, const RenderOptions& opt) {
    SplatGeom g;
    g.p_cam = pose_rot * cloud.positions[i] + pose_t;
    if (!(g.p_cam.z > opt.z_near)) return g;

    double X = g.p_cam.x, Y = g.p_cam.y, Z = g.p_cam.z;
    g.q_cam_raw = quat_mul(pose_q_unit, cloud.rotations_raw[i]);
    SymMat3d cov3 = build_covariance(g.q_cam_raw, cloud.scales_raw[i]);

    // Local affine approximation of the projection, with the usual clamp on
    // the tangent terms away from the image borders.
    double lim_x = 1.3 * (0.5 * k.width) / k.fx;
    double lim_y = 1.3 * (0.5 * k.height) / k.fy;
    double txz = X / Z, tyz = Y / Z;
    if (txz < -lim_x || txz > lim_x) { g.clamped_x = true; txz = std::clamp(txz, -lim_x, lim_x); }
    if (tyz < -lim_y || tyz > lim_y) { g.clamped_y = true; tyz = std::clamp(tyz, -lim_y, lim_y); }
    double j00 = k.fx / Z, j02 = -k.fx * txz / Z;
    double j11 = k.fy / Z, j12 = -k.fy * tyz / Z;

    // cov2d = J cov3 J^T with J = [j00 0 j02; 0 j11 j12].
    Mat3d c3 = cov3.full();
    Vec3d jr0{j00, 0, j02}, jr1{0, j11, j12};
    Vec3d cjr0 = c3 * jr0, cjr1 = c3 * jr1;
    g.cov2d.xx = jr0.dot(cjr0) + kCovDilation;
    g.cov2d.xy = jr0.dot(cjr1);
    g.cov2d.yy = jr1.dot(cjr1) + kCovDilation;

    double det = g.cov2d.det();
    if (!(det > 0)) return g;
    g.conic = g.cov2d.inverse();

    g.opacity = cloud.activated_opacity(i);
    if (g.opacity < opt.alpha_skip) return g;  // can never pass the alpha skip
    g.power_min = std::log(opt.alpha_skip / g.opacity);

    // Bounding radius out to the alpha-skip isocontour, so tile assignment
    // never drops a pixel the compositor would have used.
    double mid = 0.5 * (g.cov2d.xx + g.cov2d.yy);
    double lambda_max = mid + std::sqrt(std::max(0.1, mid * mid - det));
    double span = std::sqrt(-2.0 * g.power_min * lambda_max);
    g.radius = std::ceil(std::max(1.0, span));

    g.center = {k.fx * X / Z + k.cx, k.fy * Y / Z + k.cy};
    g.x0 = std::max(0, int(std::floor(g.center.x - g.radius)));
    g.x1 = std::min(k.width - 1, int(std::ceil(g.center.x + g.radius)));
    g.y0 = std::max(0, int(std::floor(g.center.y - g.radius)));
    g.y1 = std::min(k.height - 1, int(std::ceil(g.center.y + g.radius)));
    if (g.x0 > g.x1 || g.y0 > g.y1) return g;

    g.depth = Z;
    g.rgb = eval_sh_color(cloud.sh_of(i), g.p_cam.normalized(), cloud.sh_degree);
    g.visible = true;
    return g;
}

inline RasterScene build_scene(const GaussianCloud& cloud, const SE3& w2c,
                               const CameraIntrinsics& k, const RenderOptions& opt) {
    RasterScene s;
    size_t n = cloud.size();
    s.geo.resize(n);
    Quatd qw = quat_normalize(w2c.q);
    Mat3d rot = quat_to_mat(qw);
    constexpr size_t kChunk = 2048;
    size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](size_t c) {
        size_t lo = c * kChunk, hi = std::min(n, lo + kChunk);
        for (size_t i = lo; i < hi; ++i)
            s.geo[i] = project_one(cloud, i, qw, rot, w2c.t, k, opt);
    });

    s.order.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (s.geo[i].visible) s.order.push_back(int(i));
    std::sort(s.order.begin(), s.order.end(), [&](int a, int b) {
        if (s.geo[a].depth != s.geo[b].depth) return s.geo[a].depth < s.geo[b].depth;
        return a < b;  // deterministic tie-break by source index
    });

    s.tiles_x = (k.width + kTileSize - 1) / kTileSize;
    s.tiles_y = (k.height + kTileSize - 1) / kTileSize;
    s.tile_lists.assign(size_t(s.tiles_x) * size_t(s.tiles_y), {});
    for (int id : s.order) {
        const SplatGeom& g = s.geo[size_t(id)];
        TileEntry e{g.center.x, g.center.y, g.conic.xx, g.conic.xy, g.conic.yy,
                    g.power_min, g.opacity, g.rgb, g.depth, id, g.x0, g.x1, g.y0, g.y1};
        for (int ty = g.y0 / kTileSize; ty <= g.y1 / kTileSize; ++ty)
            for (int tx = g.x0 / kTileSize; tx <= g.x1 / kTileSize; ++tx)
                s.tile_lists[size_t(ty) * size_t(s.tiles_x) + size_t(tx)].push_back(e);
    }
    return s;
}

// alpha of a tile entry at pixel (px, py); negative means "skip". The y
// range is assumed to have been filtered by the per-row candidate list.
inline double entry_alpha(const TileEntry& e, int px, int py) {
    if (px < e.x0 || px > e.x1) return -1.0;
    double dx = px - e.cx, dy = py - e.cy;
    double power = -0.5 * (e.ca * dx * dx + e.cc * dy * dy) - e.cb * dx * dy;
    if (power > 0 || power < e.power_min) return -1.0;
    return std::min(kAlphaClip, e.opacity * std::exp(power));
}

}  // namespace detail

// Prebuilt projection state shared between a forward render and its backward
// pass for one (cloud, pose) pair.
struct RenderContext {
    detail::RasterScene scene;
    CameraIntrinsics intrinsics;
    SE3 pose;
    RenderOptions options;
};

inline RenderContext build_render_context(const GaussianCloud& cloud, const SE3& w2c,
                                          const CameraIntrinsics& k,
                                          const RenderOptions& opt = {}) {
    return {detail::build_scene(cloud, w2c, k, opt), k, w2c, opt};
}

// Culls, projects and colors every gaussian. Culled ones are omitted.
inline std::vector<Splat2D> project_splats(const GaussianCloud& cloud, const SE3& w2c,
                                           const CameraIntrinsics& k,
                                           const RenderOptions& opt = {}) {
    detail::RasterScene s = detail::build_scene(cloud, w2c, k, opt);
    std::vector<Splat2D> out;
    out.reserve(s.order.size());
    for (int id : s.order) {
        const detail::SplatGeom& g = s.geo[size_t(id)];
        out.push_back({g.center, g.cov2d, g.depth, g.rgb, g.opacity, id});
    }
    return out;
}

// Front-to-back alpha compositing over depth-sorted splats, tiled. The
// reduction order within a pixel is fixed, so output is bitwise reproducible
// for any thread count.
inline RenderOutput render(const RenderContext& ctx, const GaussianCloud& cloud) {
    const detail::RasterScene& s = ctx.scene;
    const CameraIntrinsics& k = ctx.intrinsics;
    RenderOutput out;
    out.color = Image(k.width, k.height, 3);
    out.alpha = Image(k.width, k.height, 1);
    out.depth = Image(k.width, k.height, 1);
    out.radii.assign(cloud.size(), 0.0);
    out.screen_grad_sum.assign(cloud.size(), 0.0);
    out.screen_hits.assign(cloud.size(), 0);
    for (size_t i = 0; i < cloud.size(); ++i)
        if (s.geo[i].visible) out.radii[i] = s.geo[i].radius;

    parallel_for(s.tile_lists.size(), [&](size_t tile) {
        const std::vector<detail::TileEntry>& list = s.tile_lists[tile];
        int tx = int(tile) % s.tiles_x, ty = int(tile) / s.tiles_x;
        int x0 = tx * kTileSize, x1 = std::min(k.width, x0 + kTileSize);
        int y0 = ty * kTileSize, y1 = std::min(k.height, y0 + kTileSize);
        std::vector<int> row;
        row.reserve(list.size());
        for (int py = y0; py < y1; ++py) {
            row.clear();
            for (size_t pos = 0; pos < list.size(); ++pos)
                if (py >= list[pos].y0 && py <= list[pos].y1) row.push_back(int(pos));
            for (int px = x0; px < x1; ++px) {
                double T = 1.0;
                Vec3d c{0, 0, 0};
                double d = 0;
                for (int pos : row) {
                    const detail::TileEntry& e = list[size_t(pos)];
                    double a = detail::entry_alpha(e, px, py);
                    if (a < 0) continue;
                    double t_next = T * (1 - a);
                    if (t_next < ctx.options.transmittance_eps) break;
                    double w = a * T;
                    c += e.rgb * w;
                    d += e.depth * w;
                    T = t_next;
                }
                c += ctx.options.background * T;
                out.color.at(px, py, 0) = c.x;
                out.color.at(px, py, 1) = c.y;
                out.color.at(px, py, 2) = c.z;
                out.alpha.at(px, py, 0) = 1 - T;
                out.depth.at(px, py, 0) = d;
            }
        }
    });
    return out;
}

inline RenderOutput render(const GaussianCloud& cloud, const SE3& w2c,
                           const CameraIntrinsics& k, const RenderOptions& opt = {}) {
    return render(build_render_context(cloud, w2c, k, opt), cloud);
}

namespace detail {

struct SplatGradAccum {
    Vec2d d_center;
    double d_conic_a = 0, d_conic_b = 0, d_conic_c = 0;
    Vec3d d_rgb;
    double d_opacity = 0;  // w.r.t. activated opacity
    double d_depth = 0;    // w.r.t. view-space z

    SplatGradAccum& operator+=(const SplatGradAccum& o) {
        d_center += o.d_center;
        d_conic_a += o.d_conic_a;
        d_conic_b += o.d_conic_b;
        d_conic_c += o.d_conic_c;
        d_rgb += o.d_rgb;
        d_opacity += o.d_opacity;
        d_depth += o.d_depth;
        return *this;
    }
};

}  // namespace detail

// Analytic backward pass over a prebuilt context. dl_dcolor is dL/d(color);
// dl_ddepth may be null when no depth objective is active. Gradients are
// written (not accumulated) into cloud_grad/pose_grad. When `accum` points at
// the forward RenderOutput, per-gaussian screen statistics are added to it.
inline void render_backward(const RenderContext& ctx, const GaussianCloud& cloud,
                            const Image& dl_dcolor, const Image* dl_ddepth,
                            CloudGradients& cloud_grad, PoseGradient& pose_grad,
                            RenderOutput* accum = nullptr) {
    const detail::RasterScene& s = ctx.scene;
    const CameraIntrinsics& k = ctx.intrinsics;
    const SE3& w2c = ctx.pose;
    cloud_grad.resize_like(cloud);
    pose_grad = {};

    size_t n_tiles = s.tile_lists.size();
    std::vector<std::vector<detail::SplatGradAccum>> tile_accum(n_tiles);

    parallel_for(n_tiles, [&](size_t tile) {
        const std::vector<detail::TileEntry>& list = s.tile_lists[tile];
        if (list.empty()) return;
        tile_accum[tile].assign(list.size(), {});
        std::vector<detail::SplatGradAccum>& acc = tile_accum[tile];

        int tx = int(tile) % s.tiles_x, ty = int(tile) / s.tiles_x;
        int x0 = tx * kTileSize, x1 = std::min(k.width, x0 + kTileSize);
        int y0 = ty * kTileSize, y1 = std::min(k.height, y0 + kTileSize);

        struct Contribution {
            int list_pos;
            double alpha, t_before;
        };
        std::vector<Contribution> recs;
        recs.reserve(64);
        std::vector<int> row;
        row.reserve(list.size());

        for (int py = y0; py < y1; ++py) {
            row.clear();
            for (size_t pos = 0; pos < list.size(); ++pos)
                if (py >= list[pos].y0 && py <= list[pos].y1) row.push_back(int(pos));
            for (int px = x0; px < x1; ++px) {
                // Re-walk the forward composition, recording contributions.
                recs.clear();
                double T = 1.0;
                for (int pos : row) {
                    const detail::TileEntry& e = list[size_t(pos)];
                    double a = detail::entry_alpha(e, px, py);
                    if (a < 0) continue;
                    double t_next = T * (1 - a);
                    if (t_next < ctx.options.transmittance_eps) break;
                    recs.push_back({pos, a, T});
                    T = t_next;
                }
                if (recs.empty()) continue;

                Vec3d dc{dl_dcolor.at(px, py, 0), dl_dcolor.at(px, py, 1),
                         dl_dcolor.at(px, py, 2)};
                double dd = dl_ddepth ? dl_ddepth->at(px, py, 0) : 0.0;

                // Walk back to front; `behind` composites everything behind
                // the current splat (background included) at unit
                // transmittance.
                Vec3d behind = ctx.options.background;
                double behind_z = 0;
                for (size_t r = recs.size(); r-- > 0;) {
                    const Contribution& rec = recs[r];
                    const detail::TileEntry& e = list[size_t(rec.list_pos)];
                    detail::SplatGradAccum& a = acc[size_t(rec.list_pos)];
                    double w = rec.alpha * rec.t_before;

                    a.d_rgb += dc * w;
                    a.d_depth += dd * w;

                    double d_alpha = rec.t_before * ((e.rgb - behind).dot(dc) +
                                                     (e.depth - behind_z) * dd);
                    behind = e.rgb * rec.alpha + behind * (1 - rec.alpha);
                    behind_z = e.depth * rec.alpha + behind_z * (1 - rec.alpha);

                    if (rec.alpha >= kAlphaClip) continue;  // clipped: d alpha = 0

                    double dx = px - e.cx, dy = py - e.cy;
                    a.d_opacity += (rec.alpha / e.opacity) * d_alpha;
                    double d_power = rec.alpha * d_alpha;
                    double gx = e.ca * dx + e.cb * dy;
                    double gy = e.cb * dx + e.cc * dy;
                    a.d_center += Vec2d{gx, gy} * d_power;
                    a.d_conic_a += -0.5 * dx * dx * d_power;
                    a.d_conic_b += -dx * dy * d_power;
                    a.d_conic_c += -0.5 * dy * dy * d_power;
                }
            }
        }
    });

    // Merge tile-local accumulators in tile order, then per-gaussian.
    std::vector<detail::SplatGradAccum> per_gaussian(cloud.size());
    for (size_t tile = 0; tile < n_tiles; ++tile) {
        const std::vector<detail::TileEntry>& list = s.tile_lists[tile];
        for (size_t pos = 0; pos < list.size(); ++pos)
            per_gaussian[size_t(list[pos].id)] += tile_accum[tile][pos];
    }

    // Geometry backward per gaussian; pose partials merge in chunk order.
    Quatd qw = quat_normalize(w2c.q);
    Mat3d rot = quat_to_mat(qw);
    constexpr size_t kChunk = 1024;
    size_t chunks = (cloud.size() + kChunk - 1) / kChunk;
    struct PosePartial {
        Quatd d_q_unit{0, 0, 0, 0};
        Vec3d d_t{0, 0, 0};
        Mat3d d_rot = Mat3d::zero();
    };
    std::vector<PosePartial> partials(chunks);

    parallel_for(chunks, [&](size_t chunk) {
        size_t lo = chunk * kChunk, hi = std::min(cloud.size(), lo + kChunk);
        PosePartial& pp = partials[chunk];
        for (size_t i = lo; i < hi; ++i) {
            const detail::SplatGeom& g = s.geo[i];
            if (!g.visible) continue;
            const detail::SplatGradAccum& a = per_gaussian[i];

            double X = g.p_cam.x, Y = g.p_cam.y, Z = g.p_cam.z;
            Vec3d d_pcam{0, 0, 0};

            // Color -> SH coefficients and view direction.
            Vec3d d_dir = eval_sh_color_backward(
                cloud.sh_of(i), g.p_cam.normalized(), cloud.sh_degree, a.d_rgb,
                cloud_grad.sh_coeffs.data() + i * size_t(cloud.sh_count()));
            d_pcam += normalize_backward(g.p_cam, d_dir);

            // Opacity activation.
            double o = g.opacity;
            cloud_grad.opacities_raw[i] = o * (1 - o) * a.d_opacity;

            // conic = inverse(cov2d): dL/dcov2d = -conic G conic.
            double ca = g.conic.xx, cb = g.conic.xy, cc = g.conic.yy;
            double ga = a.d_conic_a, gb = 0.5 * a.d_conic_b, gc = a.d_conic_c;
            // M = [ca cb; cb cc], G = [ga gb; gb gc]; D = -M G M.
            double mg00 = ca * ga + cb * gb, mg01 = ca * gb + cb * gc;
            double mg10 = cb * ga + cc * gb, mg11 = cb * gb + cc * gc;
            double d2_00 = -(mg00 * ca + mg01 * cb);
            double d2_01 = -(mg00 * cb + mg01 * cc);
            double d2_10 = -(mg10 * ca + mg11 * cb);
            double d2_11 = -(mg10 * cb + mg11 * cc);

            // cov2d = J cov3 J^T (dilation constant drops out).
            double lim_x = 1.3 * (0.5 * k.width) / k.fx;
            double lim_y = 1.3 * (0.5 * k.height) / k.fy;
            double txz = std::clamp(X / Z, -lim_x, lim_x);
            double tyz = std::clamp(Y / Z, -lim_y, lim_y);
            double j00 = k.fx / Z, j02 = -k.fx * txz / Z;
            double j11 = k.fy / Z, j12 = -k.fy * tyz / Z;

            SymMat3d cov3 = build_covariance(g.q_cam_raw, cloud.scales_raw[i]);
            Mat3d c3 = cov3.full();

            // dSigma_cam = J^T G2 J  (G2 = full 2x2 gradient d2_*).
            Mat3d d_c3 = Mat3d::zero();
            double jr[2][3] = {{j00, 0, j02}, {0, j11, j12}};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    d_c3(r, c) = jr[0][r] * (d2_00 * jr[0][c] + d2_01 * jr[1][c]) +
                                 jr[1][r] * (d2_10 * jr[0][c] + d2_11 * jr[1][c]);

            // dJ = 2 G2 J Sigma (using the symmetrized G2).
            double js[2][3];
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 3; ++c)
                    js[r][c] = jr[r][0] * c3(0, c) + jr[r][1] * c3(1, c) + jr[r][2] * c3(2, c);
            double g2s00 = d2_00, g2s01 = 0.5 * (d2_01 + d2_10), g2s11 = d2_11;
            double d_j00 = 2 * (g2s00 * js[0][0] + g2s01 * js[1][0]);
            double d_j02 = 2 * (g2s00 * js[0][2] + g2s01 * js[1][2]);
            double d_j11 = 2 * (g2s01 * js[0][1] + g2s11 * js[1][1]);
            double d_j12 = 2 * (g2s01 * js[0][2] + g2s11 * js[1][2]);

            // J entries -> camera-space mean.
            d_pcam.z += d_j00 * (-k.fx / (Z * Z));
            d_pcam.z += d_j11 * (-k.fy / (Z * Z));
            if (g.clamped_x) {
                d_pcam.z += d_j02 * (k.fx * txz / (Z * Z));
            } else {
                d_pcam.x += d_j02 * (-k.fx / (Z * Z));
                d_pcam.z += d_j02 * (2 * k.fx * X / (Z * Z * Z));
            }
            if (g.clamped_y) {
                d_pcam.z += d_j12 * (k.fy * tyz / (Z * Z));
            } else {
                d_pcam.y += d_j12 * (-k.fy / (Z * Z));
                d_pcam.z += d_j12 * (2 * k.fy * Y / (Z * Z * Z));
            }

            // Projection center and view depth.
            d_pcam.x += a.d_center.x * k.fx / Z;
            d_pcam.y += a.d_center.y * k.fy / Z;
            d_pcam.z += -(a.d_center.x * k.fx * X + a.d_center.y * k.fy * Y) / (Z * Z);
            d_pcam.z += a.d_depth;

            // Sigma_cam = R diag(exp(2 s)) R^T.
            Quatd qc = quat_normalize(g.q_cam_raw);
            Mat3d rc = quat_to_mat(qc);
            const Vec3d& sr = cloud.scales_raw[i];
            Vec3d s2{std::exp(2 * sr.x), std::exp(2 * sr.y), std::exp(2 * sr.z)};
            // dR = 2 G3 R D
            Mat3d d_rc = Mat3d::zero();
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    double v = 0;
                    for (int m = 0; m < 3; ++m) v += d_c3(r, m) * rc(m, c);
                    d_rc(r, c) = 2 * v * s2[c];
                }
            // d s_k = 2 exp(2 s_k) (R^T G3 R)_kk
            Vec3d d_scale;
            for (int kk = 0; kk < 3; ++kk) {
                double v = 0;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) v += rc(r, kk) * d_c3(r, c) * rc(c, kk);
                d_scale[kk] = 2 * s2[kk] * v;
            }
            cloud_grad.scales_raw[i] = d_scale;

            Quatd d_qc_unit = quat_to_mat_backward(qc, d_rc);
            Quatd d_qc_raw = quat_normalize_backward(g.q_cam_raw, d_qc_unit);
            cloud_grad.rotations_raw[i] = quat_mul_backward_b(qw, d_qc_raw);
            pp.d_q_unit += quat_mul_backward_a(cloud.rotations_raw[i], d_qc_raw);

            // p_cam = R_w mu + t_w.
            cloud_grad.positions[i] = rot.transposed_mul(d_pcam);
            pp.d_t += d_pcam;
            const Vec3d& mu = cloud.positions[i];
            pp.d_rot(0, 0) += d_pcam.x * mu.x; pp.d_rot(0, 1) += d_pcam.x * mu.y; pp.d_rot(0, 2) += d_pcam.x * mu.z;
            pp.d_rot(1, 0) += d_pcam.y * mu.x; pp.d_rot(1, 1) += d_pcam.y * mu.y; pp.d_rot(1, 2) += d_pcam.y * mu.z;
            pp.d_rot(2, 0) += d_pcam.z * mu.x; pp.d_rot(2, 1) += d_pcam.z * mu.y; pp.d_rot(2, 2) += d_pcam.z * mu.z;

            if (accum) {
                double nx = a.d_center.x * 0.5 * k.width;
                double ny = a.d_center.y * 0.5 * k.height;
                accum->screen_grad_sum[i] += std::sqrt(nx * nx + ny * ny);
                accum->screen_hits[i] += 1;
            }
        }
    });

    Quatd d_q_unit{0, 0, 0, 0};
    Vec3d d_t{0, 0, 0};
    Mat3d d_rot = Mat3d::zero();
    for (const PosePartial& pp : partials) {
        d_q_unit += pp.d_q_unit;
        d_t += pp.d_t;
        d_rot = d_rot + pp.d_rot;
    }
    d_q_unit += quat_to_mat_backward(qw, d_rot);
    pose_grad.q = quat_normalize_backward(w2c.q, d_q_unit);
    pose_grad.t = d_t;
}

inline void render_backward(const GaussianCloud& cloud, const SE3& w2c,
                            const CameraIntrinsics& k, const Image& dl_dcolor,
                            const Image* dl_ddepth, const RenderOptions& opt,
                            CloudGradients& cloud_grad, PoseGradient& pose_grad,
                            RenderOutput* accum = nullptr) {
    render_backward(build_render_context(cloud, w2c, k, opt), cloud, dl_dcolor, dl_ddepth,
                    cloud_grad, pose_grad, accum);
}

}  // namespace cf3d
