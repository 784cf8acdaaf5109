#pragma once

#include <span>
#include <type_traits>

#include "cf3d/adam.hpp"
#include "cf3d/rasterizer.hpp"

namespace cf3d {

static_assert(std::is_standard_layout_v<Vec3d> && sizeof(Vec3d) == 3 * sizeof(double));
static_assert(std::is_standard_layout_v<Vec4d> && sizeof(Vec4d) == 4 * sizeof(double));

inline std::span<double> flat(std::vector<Vec3d>& v) {
    return {reinterpret_cast<double*>(v.data()), v.size() * 3};
}
inline std::span<const double> flat(const std::vector<Vec3d>& v) {
    return {reinterpret_cast<const double*>(v.data()), v.size() * 3};
}
inline std::span<double> flat(std::vector<Vec4d>& v) {
    return {reinterpret_cast<double*>(v.data()), v.size() * 4};
}
inline std::span<const double> flat(const std::vector<Vec4d>& v) {
    return {reinterpret_cast<const double*>(v.data()), v.size() * 4};
}

// Per-group learning rates. Gaussian-attribute defaults follow the reference
// splatting configuration; the pose schedule decays exponentially.
struct OptimLrs {
    double positions = 1.6e-4;  // scaled by scene extent
    double positions_final = 1.6e-6;
    int64_t positions_decay_steps = 0;  // 0: constant
    double sh = 2.5e-3;
    double sh_rest_divisor = 20.0;  // higher SH bands train slower
    double opacity = 0.05;
    double scale = 5e-3;
    double rotation = 1e-3;
    double pose = 1e-5;
    double pose_final = 1e-6;
    int64_t pose_decay_steps = 300;
};

// Adam over the five Gaussian attribute groups. Row bookkeeping follows
// densify/prune so surviving moments are preserved.
struct CloudOptimizer {
    OptimLrs lrs;
    double scene_extent = 1.0;
    AdamState positions, sh, rotation, scale, opacity;

    void step(GaussianCloud& cloud, const CloudGradients& grad) {
        ParamGroupConfig pos_cfg;
        pos_cfg.lr = lrs.positions * scene_extent;
        if (lrs.positions_decay_steps > 0) {
            pos_cfg.schedule = LrSchedule::kExpDecay;
            pos_cfg.final_lr = lrs.positions_final * scene_extent;
            pos_cfg.total_steps = lrs.positions_decay_steps;
        }
        adam_step(flat(cloud.positions), flat(grad.positions), positions,
                  scheduled_lr(pos_cfg, positions.step), 1e-15);

        // Band-0 and higher bands share moments but the latter step slower.
        if (sh.m.size() != cloud.sh_coeffs.size() * 3) {
            sh.m.assign(cloud.sh_coeffs.size() * 3, 0.0);
            sh.v.assign(cloud.sh_coeffs.size() * 3, 0.0);
        }
        sh.step += 1;
        double bc1 = 1 - std::pow(kAdamBeta1, double(sh.step));
        double bc2 = 1 - std::pow(kAdamBeta2, double(sh.step));
        int shc = cloud.sh_count();
        std::span<double> p = flat(cloud.sh_coeffs);
        std::span<const double> g = flat(grad.sh_coeffs);
        for (size_t i = 0; i < p.size(); ++i) {
            double gi = g[i];
            sh.m[i] = kAdamBeta1 * sh.m[i] + (1 - kAdamBeta1) * gi;
            sh.v[i] = kAdamBeta2 * sh.v[i] + (1 - kAdamBeta2) * gi * gi;
            bool band0 = (i / 3) % size_t(shc) == 0;
            double lr = band0 ? lrs.sh : lrs.sh / lrs.sh_rest_divisor;
            p[i] -= lr * (sh.m[i] / bc1) / (std::sqrt(sh.v[i] / bc2) + 1e-8);
        }

        adam_step(flat(cloud.rotations_raw), flat(grad.rotations_raw), rotation, lrs.rotation);
        adam_step(flat(cloud.scales_raw), flat(grad.scales_raw), scale, lrs.scale);
        adam_step(cloud.opacities_raw, grad.opacities_raw, opacity, lrs.opacity);
    }

    // Keeps moment rows listed in `kept` (old indices, in output order), then
    // appends zeroed rows.
    void remap_rows(const std::vector<int>& kept, size_t appended, int sh_count) {
        auto remap = [&](AdamState& st, size_t stride) {
            if (st.m.empty()) return;
            std::vector<double> m(stride * (kept.size() + appended), 0.0);
            std::vector<double> v(stride * (kept.size() + appended), 0.0);
            for (size_t r = 0; r < kept.size(); ++r)
                for (size_t c = 0; c < stride; ++c) {
                    m[r * stride + c] = st.m[size_t(kept[r]) * stride + c];
                    v[r * stride + c] = st.v[size_t(kept[r]) * stride + c];
                }
            st.m = std::move(m);
            st.v = std::move(v);
        };
        remap(positions, 3);
        remap(sh, size_t(sh_count) * 3);
        remap(rotation, 4);
        remap(scale, 3);
        remap(opacity, 1);
    }
};

// Adam over the 7 raw pose parameters with the decaying pose schedule.
struct PoseOptimizer {
    ParamGroupConfig cfg;
    AdamState state;

    explicit PoseOptimizer(const OptimLrs& lrs = {}) {
        cfg.lr = lrs.pose;
        cfg.final_lr = lrs.pose_final;
        cfg.total_steps = lrs.pose_decay_steps;
        cfg.schedule = lrs.pose_decay_steps > 0 ? LrSchedule::kExpDecay : LrSchedule::kConstant;
    }

    void step(SE3& pose, const PoseGradient& grad) {
        double params[7] = {pose.q.w, pose.q.x, pose.q.y, pose.q.z,
                            pose.t.x, pose.t.y, pose.t.z};
        double grads[7] = {grad.q.w, grad.q.x, grad.q.y, grad.q.z,
                           grad.t.x, grad.t.y, grad.t.z};
        adam_step(std::span<double>(params, 7), std::span<const double>(grads, 7), state,
                  scheduled_lr(cfg, state.step), cfg.eps);
        pose.q = {params[0], params[1], params[2], params[3]};
        pose.t = {params[4], params[5], params[6]};
    }
};

}  // namespace cf3d
