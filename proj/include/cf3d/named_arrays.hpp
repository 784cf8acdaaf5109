#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cf3d {

// Versioned binary container: magic "CF3D", format version u32, then named
// float64 arrays. Order-preserving so checkpoints round-trip bit-exactly.
struct NamedArrays {
    static constexpr char kMagic[4] = {'C', 'F', '3', 'D'};
    static constexpr uint32_t kVersion = 1;

    std::vector<std::pair<std::string, std::vector<double>>> arrays;

    void set(const std::string& name, std::vector<double> values) {
        for (auto& [n, v] : arrays)
            if (n == name) {
                v = std::move(values);
                return;
            }
        arrays.emplace_back(name, std::move(values));
    }

    const std::vector<double>& get(const std::string& name) const {
        for (auto& [n, v] : arrays)
            if (n == name) return v;
        throw std::runtime_error("NamedArrays: missing array " + name);
    }

    bool has(const std::string& name) const {
        for (auto& [n, v] : arrays)
            if (n == name) return true;
        return false;
    }

    void save(const std::string& path) const {
        FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("NamedArrays: cannot open " + path);
        std::fwrite(kMagic, 1, 4, f);
        uint32_t version = kVersion;
        std::fwrite(&version, sizeof(version), 1, f);
        uint32_t count = uint32_t(arrays.size());
        std::fwrite(&count, sizeof(count), 1, f);
        for (const auto& [name, values] : arrays) {
            uint32_t len = uint32_t(name.size());
            std::fwrite(&len, sizeof(len), 1, f);
            std::fwrite(name.data(), 1, name.size(), f);
            uint64_t n = values.size();
            std::fwrite(&n, sizeof(n), 1, f);
            std::fwrite(values.data(), sizeof(double), values.size(), f);
        }
        std::fclose(f);
    }

    static NamedArrays load(const std::string& path) {
        FILE* f = std::fopen(path.c_str(), "rb");
        if (!f) throw std::runtime_error("NamedArrays: cannot open " + path);
        auto fail = [&](const std::string& why) {
            std::fclose(f);
            throw std::runtime_error("NamedArrays: " + why + " in " + path);
        };
        char magic[4];
        if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
            fail("bad magic");
        uint32_t version = 0, count = 0;
        if (std::fread(&version, sizeof(version), 1, f) != 1 || version != kVersion)
            fail("unsupported version");
        if (std::fread(&count, sizeof(count), 1, f) != 1) fail("truncated header");
        NamedArrays out;
        for (uint32_t i = 0; i < count; ++i) {
            uint32_t len = 0;
            if (std::fread(&len, sizeof(len), 1, f) != 1) fail("truncated name length");
            std::string name(len, '\0');
            if (len && std::fread(name.data(), 1, len, f) != len) fail("truncated name");
            uint64_t n = 0;
            if (std::fread(&n, sizeof(n), 1, f) != 1) fail("truncated array length");
            std::vector<double> values(n);
            if (n && std::fread(values.data(), sizeof(double), n, f) != n)
                fail("truncated array " + name);
            out.arrays.emplace_back(std::move(name), std::move(values));
        }
        std::fclose(f);
        return out;
    }
};

// Bit-exact u64 <-> f64 packing for RNG state and counters.
inline double bits_to_double(uint64_t bits) {
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
}

inline uint64_t double_to_bits(double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    return bits;
}

}  // namespace cf3d
