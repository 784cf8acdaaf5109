#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cf3d/gaussian_cloud.hpp"

namespace cf3d {

// Binary little-endian PLY with the field layout common 3DGS viewers expect:
// x y z, f_dc_0..2, f_rest_* (channel-major), opacity, scale_0..2, rot_0..3.
inline void save_ply(const std::string& path, const GaussianCloud& cloud) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_ply: cannot open " + path);
    int shc = cloud.sh_count();
    int n_rest = 3 * (shc - 1);
    std::ostringstream head;
    head << "ply\nformat binary_little_endian 1.0\n";
    head << "element vertex " << cloud.size() << "\n";
    for (const char* p : {"x", "y", "z"}) head << "property float " << p << "\n";
    for (int i = 0; i < 3; ++i) head << "property float f_dc_" << i << "\n";
    for (int i = 0; i < n_rest; ++i) head << "property float f_rest_" << i << "\n";
    head << "property float opacity\n";
    for (int i = 0; i < 3; ++i) head << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) head << "property float rot_" << i << "\n";
    head << "end_header\n";
    std::string hs = head.str();
    std::fwrite(hs.data(), 1, hs.size(), f);

    std::vector<float> row(size_t(14 + n_rest));
    for (size_t i = 0; i < cloud.size(); ++i) {
        size_t k = 0;
        row[k++] = float(cloud.positions[i].x);
        row[k++] = float(cloud.positions[i].y);
        row[k++] = float(cloud.positions[i].z);
        auto sh = cloud.sh_of(i);
        row[k++] = float(sh[0].x);
        row[k++] = float(sh[0].y);
        row[k++] = float(sh[0].z);
        for (int c = 0; c < 3; ++c)
            for (int j = 1; j < shc; ++j) row[k++] = float(sh[size_t(j)][c]);
        row[k++] = float(cloud.opacities_raw[i]);
        row[k++] = float(cloud.scales_raw[i].x);
        row[k++] = float(cloud.scales_raw[i].y);
        row[k++] = float(cloud.scales_raw[i].z);
        row[k++] = float(cloud.rotations_raw[i].w);
        row[k++] = float(cloud.rotations_raw[i].x);
        row[k++] = float(cloud.rotations_raw[i].y);
        row[k++] = float(cloud.rotations_raw[i].z);
        std::fwrite(row.data(), sizeof(float), row.size(), f);
    }
    std::fclose(f);
}

inline GaussianCloud load_ply(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_ply: cannot open " + path);
    std::string line;
    auto read_line = [&]() {
        line.clear();
        int c;
        while ((c = std::fgetc(f)) != EOF && c != '\n') line.push_back(char(c));
        return c != EOF || !line.empty();
    };

    size_t n = 0;
    std::vector<std::string> props;
    bool binary_le = false;
    if (!read_line() || line != "ply") {
        std::fclose(f);
        throw std::runtime_error("load_ply: not a PLY file: " + path);
    }
    while (read_line()) {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (tok == "element") {
            std::string what;
            ss >> what >> n;
            if (what != "vertex") {
                std::fclose(f);
                throw std::runtime_error("load_ply: unsupported element " + what);
            }
        } else if (tok == "property") {
            std::string type, name;
            ss >> type >> name;
            if (type != "float") {
                std::fclose(f);
                throw std::runtime_error("load_ply: only float properties supported");
            }
            props.push_back(name);
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!binary_le) {
        std::fclose(f);
        throw std::runtime_error("load_ply: expected binary_little_endian");
    }

    std::map<std::string, size_t> index;
    for (size_t i = 0; i < props.size(); ++i) index[props[i]] = i;
    auto need = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) {
            std::fclose(f);
            throw std::runtime_error("load_ply: missing property " + name);
        }
        return it->second;
    };

    int n_rest = 0;
    while (index.count("f_rest_" + std::to_string(n_rest))) ++n_rest;
    if (n_rest % 3 != 0) {
        std::fclose(f);
        throw std::runtime_error("load_ply: f_rest count not divisible by 3");
    }
    int shc = 1 + n_rest / 3;
    int degree = int(std::round(std::sqrt(double(shc)))) - 1;
    if (sh_coeff_count(degree) != shc) {
        std::fclose(f);
        throw std::runtime_error("load_ply: f_rest count is not an SH band layout");
    }

    size_t px = need("x"), py = need("y"), pz = need("z");
    size_t dc0 = need("f_dc_0"), dc1 = need("f_dc_1"), dc2 = need("f_dc_2");
    size_t popa = need("opacity");
    size_t ps0 = need("scale_0"), ps1 = need("scale_1"), ps2 = need("scale_2");
    size_t pr0 = need("rot_0"), pr1 = need("rot_1"), pr2 = need("rot_2"), pr3 = need("rot_3");
    size_t rest0 = n_rest > 0 ? need("f_rest_0") : 0;

    GaussianCloud cloud;
    cloud.sh_degree = degree;
    cloud.resize(n);
    std::vector<float> row(props.size());
    for (size_t i = 0; i < n; ++i) {
        if (std::fread(row.data(), sizeof(float), row.size(), f) != row.size()) {
            std::fclose(f);
            throw std::runtime_error("load_ply: truncated file " + path);
        }
        cloud.positions[i] = {row[px], row[py], row[pz]};
        auto sh = cloud.sh_of(i);
        sh[0] = {row[dc0], row[dc1], row[dc2]};
        for (int c = 0; c < 3; ++c)
            for (int j = 1; j < shc; ++j)
                sh[size_t(j)][c] = row[rest0 + size_t(c * (shc - 1) + (j - 1))];
        cloud.opacities_raw[i] = row[popa];
        cloud.scales_raw[i] = {row[ps0], row[ps1], row[ps2]};
        cloud.rotations_raw[i] = {row[pr0], row[pr1], row[pr2], row[pr3]};
    }
    std::fclose(f);
    return cloud;
}

}  // namespace cf3d
