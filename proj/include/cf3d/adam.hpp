#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cf3d {

enum class LrSchedule { kConstant, kExpDecay };

struct ParamGroupConfig {
    double lr = 1e-3;
    LrSchedule schedule = LrSchedule::kConstant;
    double final_lr = 0;      // exp-decay target
    int64_t total_steps = 0;  // exp-decay horizon
    double eps = 1e-8;
};

// Exponential decay reaches final_lr exactly at total_steps and stays there.
inline double scheduled_lr(const ParamGroupConfig& cfg, int64_t step) {
    if (cfg.schedule == LrSchedule::kConstant || cfg.total_steps <= 0) return cfg.lr;
    double t = std::min(1.0, double(step) / double(cfg.total_steps));
    return cfg.lr * std::pow(cfg.final_lr / cfg.lr, t);
}

struct AdamState {
    std::vector<double> m, v;
    int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;

// One bias-corrected Adam update. Moments are lazily sized on first use.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state, double lr, double eps = 1e-8) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    state.step += 1;
    double bc1 = 1 - std::pow(kAdamBeta1, double(state.step));
    double bc2 = 1 - std::pow(kAdamBeta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        if (!std::isfinite(g))
            throw std::runtime_error("adam_step: non-finite gradient at coordinate " +
                                     std::to_string(i) + " (step " +
                                     std::to_string(state.step) + ")");
        state.m[i] = kAdamBeta1 * state.m[i] + (1 - kAdamBeta1) * g;
        state.v[i] = kAdamBeta2 * state.v[i] + (1 - kAdamBeta2) * g * g;
        double m_hat = state.m[i] / bc1;
        double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

}  // namespace cf3d
