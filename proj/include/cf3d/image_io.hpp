#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "cf3d/image.hpp"

namespace cf3d {

// 8-bit PNG, clamp-and-quantize only (no gamma). 1-channel images write as
// grayscale, everything else as RGB.
inline void write_png(const std::string& path, const Image& img) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(f);
        throw std::runtime_error("write_png: libpng failure on " + path);
    }
    png_init_io(png, f);
    bool gray = img.channels == 1;
    int color_type = gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    int ch = gray ? 1 : 3;
    std::vector<png_byte> row(size_t(img.width) * size_t(ch));
    auto quantize = [](double v) {
        v = v < 0 ? 0 : (v > 1 ? 1 : v);
        return png_byte(v * 255.0 + 0.5);
    };
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < ch; ++c)
                row[size_t(x) * size_t(ch) + size_t(c)] =
                    quantize(img.at(x, y, img.channels == 1 ? 0 : c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

// Reads any libpng-supported file as 8-bit RGB in [0,1].
inline Image read_png(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(f);
        throw std::runtime_error("read_png: libpng failure on " + path);
    }
    png_init_io(png, f);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    std::vector<png_byte> row(size_t(w) * 3);
    Image img(int(w), int(h), 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(int(x), int(y), c) = row[size_t(x) * 3 + size_t(c)] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    return img;
}

// PFM: 'PF' for 3-channel, 'Pf' for 1-channel, little-endian, rows
// bottom-to-top, lossless float32.
inline void write_pfm(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("write_pfm: 1 or 3 channels only");
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("write_pfm: cannot open " + path);
    std::fprintf(f, "%s\n%d %d\n-1.0\n", img.channels == 3 ? "PF" : "Pf", img.width, img.height);
    std::vector<float> row(size_t(img.width) * size_t(img.channels));
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[size_t(x) * size_t(img.channels) + size_t(c)] = float(img.at(x, y, c));
        std::fwrite(row.data(), sizeof(float), row.size(), f);
    }
    std::fclose(f);
}

inline Image read_pfm(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_pfm: cannot open " + path);
    char magic[3] = {0};
    int w = 0, h = 0;
    double scale = 0;
    if (std::fscanf(f, "%2s %d %d %lf", magic, &w, &h, &scale) != 4 || w <= 0 || h <= 0) {
        std::fclose(f);
        throw std::runtime_error("read_pfm: bad header in " + path);
    }
    std::fgetc(f);  // single whitespace after the scale
    int ch = std::strcmp(magic, "PF") == 0 ? 3 : 1;
    if (ch == 1 && std::strcmp(magic, "Pf") != 0) {
        std::fclose(f);
        throw std::runtime_error("read_pfm: bad magic in " + path);
    }
    if (scale > 0) {
        std::fclose(f);
        throw std::runtime_error("read_pfm: big-endian files unsupported");
    }
    Image img(w, h, ch);
    std::vector<float> row(size_t(w) * size_t(ch));
    for (int y = h - 1; y >= 0; --y) {
        if (std::fread(row.data(), sizeof(float), row.size(), f) != row.size()) {
            std::fclose(f);
            throw std::runtime_error("read_pfm: truncated " + path);
        }
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                img.at(x, y, c) = row[size_t(x) * size_t(ch) + size_t(c)];
    }
    std::fclose(f);
    return img;
}

}  // namespace cf3d
