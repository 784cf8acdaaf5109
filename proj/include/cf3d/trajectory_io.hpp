#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cf3d/camera.hpp"

namespace cf3d {

// TUM-style trajectory: one `frame_index tx ty tz qx qy qz qw` line per
// frame, camera-to-world, '#' comments.
inline void save_trajectory_tum(const std::string& path, const Trajectory& traj) {
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("save_trajectory_tum: cannot open " + path);
    std::fprintf(f, "# frame_index tx ty tz qx qy qz qw\n");
    for (const TrajectoryEntry& e : traj) {
        const SE3& p = e.cam_to_world;
        std::fprintf(f, "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", e.frame_index,
                     p.t.x, p.t.y, p.t.z, p.q.x, p.q.y, p.q.z, p.q.w);
    }
    std::fclose(f);
}

inline Trajectory load_trajectory_tum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trajectory_tum: cannot open " + path);
    Trajectory traj;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        TrajectoryEntry e;
        double qx, qy, qz, qw;
        if (!(ss >> e.frame_index >> e.cam_to_world.t.x >> e.cam_to_world.t.y >>
              e.cam_to_world.t.z >> qx >> qy >> qz >> qw))
            throw std::runtime_error("load_trajectory_tum: malformed line: " + line);
        e.cam_to_world.q = quat_normalize(Quatd{qw, qx, qy, qz});
        traj.push_back(e);
    }
    return traj;
}

}  // namespace cf3d
