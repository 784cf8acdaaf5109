#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace cf3d {

// Planar image: data[c * h * w + y * w + x]. Color values live in [0, 1];
// depth images use a single channel in world units.
template <typename T>
struct ImageT {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<T> data;

    ImageT() = default;
    ImageT(int w, int h, int c, T fill = T(0))
        : width(w), height(h), channels(c), data(size_t(w) * size_t(h) * size_t(c), fill) {}

    T& at(int x, int y, int c) {
        return data[size_t(c) * plane() + size_t(y) * size_t(width) + size_t(x)];
    }
    T at(int x, int y, int c) const {
        return data[size_t(c) * plane() + size_t(y) * size_t(width) + size_t(x)];
    }
    size_t plane() const { return size_t(width) * size_t(height); }
    size_t size() const { return data.size(); }
    bool same_shape(const ImageT& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

using Image = ImageT<double>;

}  // namespace cf3d
