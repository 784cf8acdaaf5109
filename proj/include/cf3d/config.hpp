#pragma once

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

#include "cf3d/pipeline.hpp"
#include "cf3d/synth.hpp"

namespace cf3d {

// Full run configuration. Defaults target the desk-scale synthetic scenes;
// the optimizer block exposes every per-group learning rate.
struct RunConfig {
    uint64_t seed = 7;
    int threads = 0;  // 0: hardware default (CF3D_THREADS still wins)
    SynthConfig synth;
    PipelineConfig pipeline;

    RunConfig() {
        pipeline.local.pose_iterations = 400;
        pipeline.local.lrs.pose = 2e-3;
        pipeline.local.lrs.pose_final = 2e-4;
        pipeline.local.max_points = 8000;
        pipeline.checkpoint_every = 10;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void maybe_vec3(const nlohmann::json& j, const char* key, Vec3d& out) {
    if (j.contains(key)) {
        auto a = j.at(key);
        if (!a.is_array() || a.size() != 3)
            throw std::invalid_argument(std::string("config: ") + key + " must be [r,g,b]");
        out = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    }
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    const SynthConfig& s = c.synth;
    const PipelineConfig& p = c.pipeline;
    const LocalFitConfig& l = p.local;
    const OptimLrs& o = l.lrs;
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["synth"] = {{"scene", s.scene == SceneKind::kRoom ? "room" : "object-orbit"},
                  {"trajectory", s.trajectory == TrajectoryKind::kForward ? "forward" : "orbit"},
                  {"n_gaussians", s.n_gaussians},
                  {"n_frames", s.n_frames},
                  {"width", s.width},
                  {"height", s.height},
                  {"fov_x_deg", s.fov_x_deg},
                  {"orbit_radius", s.traj.orbit_radius},
                  {"orbit_sweep_deg", s.traj.orbit_sweep_deg},
                  {"forward_step", s.traj.forward_step},
                  {"forward_jitter_deg", s.traj.forward_jitter_deg},
                  {"depth_noise_sigma", s.depth_noise_sigma}};
    j["local_fit"] = {{"fit_iterations", l.fit_iterations},
                      {"pose_iterations", l.pose_iterations},
                      {"stride", l.stride},
                      {"max_points", l.max_points},
                      {"early_stop", l.early_stop},
                      {"early_stop_tol", l.early_stop_tol},
                      {"early_stop_window", l.early_stop_window},
                      {"sh_degree", l.sh_degree},
                      {"init_opacity", l.init_opacity},
                      {"background", {l.background.x, l.background.y, l.background.z}}};
    j["optim"] = {{"positions_lr", o.positions},
                  {"positions_lr_final", o.positions_final},
                  {"positions_decay_steps", o.positions_decay_steps},
                  {"sh_lr", o.sh},
                  {"sh_rest_divisor", o.sh_rest_divisor},
                  {"opacity_lr", o.opacity},
                  {"scale_lr", o.scale},
                  {"rotation_lr", o.rotation},
                  {"pose_lr", o.pose},
                  {"pose_lr_final", o.pose_final}};
    j["pipeline"] = {{"steps_per_frame", p.steps_per_frame},
                     {"densify_grad_threshold", p.densify_grad_threshold},
                     {"densify_size_frac", p.densify_size_frac},
                     {"prune_opacity_threshold", p.prune_opacity_threshold},
                     {"prune_screen_frac", p.prune_screen_frac},
                     {"opacity_reset_interval", p.opacity_reset_interval},
                     {"opacity_reset_cap", p.opacity_reset_cap},
                     {"depth_loss_enabled", p.depth_loss_enabled},
                     {"depth_loss_weight", p.depth_loss_weight},
                     {"checkpoint_every", p.checkpoint_every},
                     {"max_gaussians", p.max_gaussians},
                     {"progressive_growing", p.progressive_growing}};
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::maybe;
    RunConfig c;
    detail::reject_unknown_keys(
        j, {"seed", "threads", "synth", "local_fit", "optim", "pipeline"}, "top level");
    maybe(j, "seed", c.seed);
    maybe(j, "threads", c.threads);

    if (j.contains("synth")) {
        const auto& js = j.at("synth");
        detail::reject_unknown_keys(
            js,
            {"scene", "trajectory", "n_gaussians", "n_frames", "width", "height", "fov_x_deg",
             "orbit_radius", "orbit_sweep_deg", "forward_step", "forward_jitter_deg",
             "depth_noise_sigma"},
            "synth");
        SynthConfig& s = c.synth;
        if (js.contains("scene")) {
            std::string v = js.at("scene").get<std::string>();
            if (v == "room")
                s.scene = SceneKind::kRoom;
            else if (v == "object-orbit")
                s.scene = SceneKind::kObjectOrbit;
            else
                throw std::invalid_argument("config: synth.scene must be room|object-orbit");
        }
        if (js.contains("trajectory")) {
            std::string v = js.at("trajectory").get<std::string>();
            if (v == "forward")
                s.trajectory = TrajectoryKind::kForward;
            else if (v == "orbit")
                s.trajectory = TrajectoryKind::kOrbit;
            else
                throw std::invalid_argument("config: synth.trajectory must be forward|orbit");
        }
        maybe(js, "n_gaussians", s.n_gaussians);
        maybe(js, "n_frames", s.n_frames);
        maybe(js, "width", s.width);
        maybe(js, "height", s.height);
        maybe(js, "fov_x_deg", s.fov_x_deg);
        maybe(js, "orbit_radius", s.traj.orbit_radius);
        maybe(js, "orbit_sweep_deg", s.traj.orbit_sweep_deg);
        maybe(js, "forward_step", s.traj.forward_step);
        maybe(js, "forward_jitter_deg", s.traj.forward_jitter_deg);
        maybe(js, "depth_noise_sigma", s.depth_noise_sigma);
    }

    LocalFitConfig& l = c.pipeline.local;
    if (j.contains("local_fit")) {
        const auto& jl = j.at("local_fit");
        detail::reject_unknown_keys(
            jl,
            {"fit_iterations", "pose_iterations", "stride", "max_points", "early_stop",
             "early_stop_tol", "early_stop_window", "sh_degree", "init_opacity", "background"},
            "local_fit");
        maybe(jl, "fit_iterations", l.fit_iterations);
        maybe(jl, "pose_iterations", l.pose_iterations);
        maybe(jl, "stride", l.stride);
        maybe(jl, "max_points", l.max_points);
        maybe(jl, "early_stop", l.early_stop);
        maybe(jl, "early_stop_tol", l.early_stop_tol);
        maybe(jl, "early_stop_window", l.early_stop_window);
        maybe(jl, "sh_degree", l.sh_degree);
        maybe(jl, "init_opacity", l.init_opacity);
        detail::maybe_vec3(jl, "background", l.background);
        if (l.fit_iterations < 0 || l.pose_iterations <= 0)
            throw std::invalid_argument("config: local_fit iteration budgets must be positive");
        if (l.sh_degree < 0 || l.sh_degree > 3)
            throw std::invalid_argument("config: local_fit.sh_degree must be 0..3");
    }

    if (j.contains("optim")) {
        const auto& jo = j.at("optim");
        detail::reject_unknown_keys(
            jo,
            {"positions_lr", "positions_lr_final", "positions_decay_steps", "sh_lr",
             "sh_rest_divisor", "opacity_lr", "scale_lr", "rotation_lr", "pose_lr",
             "pose_lr_final"},
            "optim");
        OptimLrs& o = l.lrs;
        maybe(jo, "positions_lr", o.positions);
        maybe(jo, "positions_lr_final", o.positions_final);
        maybe(jo, "positions_decay_steps", o.positions_decay_steps);
        maybe(jo, "sh_lr", o.sh);
        maybe(jo, "sh_rest_divisor", o.sh_rest_divisor);
        maybe(jo, "opacity_lr", o.opacity);
        maybe(jo, "scale_lr", o.scale);
        maybe(jo, "rotation_lr", o.rotation);
        maybe(jo, "pose_lr", o.pose);
        maybe(jo, "pose_lr_final", o.pose_final);
        if (o.pose <= 0 || o.pose_final > o.pose)
            throw std::invalid_argument("config: pose_lr must be positive, final <= initial");
    }

    if (j.contains("pipeline")) {
        const auto& jp = j.at("pipeline");
        detail::reject_unknown_keys(
            jp,
            {"steps_per_frame", "densify_grad_threshold", "densify_size_frac",
             "prune_opacity_threshold", "prune_screen_frac", "opacity_reset_interval",
             "opacity_reset_cap", "depth_loss_enabled", "depth_loss_weight", "checkpoint_every",
             "max_gaussians", "progressive_growing"},
            "pipeline");
        PipelineConfig& p = c.pipeline;
        maybe(jp, "steps_per_frame", p.steps_per_frame);
        maybe(jp, "densify_grad_threshold", p.densify_grad_threshold);
        maybe(jp, "densify_size_frac", p.densify_size_frac);
        maybe(jp, "prune_opacity_threshold", p.prune_opacity_threshold);
        maybe(jp, "prune_screen_frac", p.prune_screen_frac);
        maybe(jp, "opacity_reset_interval", p.opacity_reset_interval);
        maybe(jp, "opacity_reset_cap", p.opacity_reset_cap);
        maybe(jp, "depth_loss_enabled", p.depth_loss_enabled);
        maybe(jp, "depth_loss_weight", p.depth_loss_weight);
        maybe(jp, "checkpoint_every", p.checkpoint_every);
        maybe(jp, "max_gaussians", p.max_gaussians);
        maybe(jp, "progressive_growing", p.progressive_growing);
        if (p.steps_per_frame <= 0)
            throw std::invalid_argument("config: pipeline.steps_per_frame must be > 0");
        if (p.densify_grad_threshold <= 0 || p.prune_opacity_threshold <= 0)
            throw std::invalid_argument("config: pipeline thresholds must be > 0");
    }

    c.pipeline.seed = c.seed;
    c.synth.seed = c.seed;
    c.synth.traj.seed = c.seed;
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return config_from_json(j);
}

inline void save_config(const std::string& path, const RunConfig& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << to_json(c).dump(2) << "\n";
}

}  // namespace cf3d
