#pragma once

#include <stdexcept>

#include "cf3d/image.hpp"
#include "cf3d/ssim.hpp"

namespace cf3d {

inline constexpr double kDssimWeight = 0.2;  // lambda of the photometric mix

struct LossResult {
    double value = 0;
    Image gradient;  // dL/d(rendered)
};

// Photometric objective: (1 - lambda) L1 + lambda (1 - SSIM) / 2, with the
// analytic gradient w.r.t. the rendered image.
inline LossResult loss_rgb(const Image& rendered, const Image& target,
                           double lambda = kDssimWeight) {
    if (!rendered.same_shape(target)) throw std::invalid_argument("loss_rgb: shape mismatch");
    LossResult r;
    r.gradient = Image(rendered.width, rendered.height, rendered.channels);

    double n = double(rendered.size());
    double l1 = 0;
    for (size_t i = 0; i < rendered.size(); ++i) {
        double d = rendered.data[i] - target.data[i];
        l1 += std::abs(d);
        r.gradient.data[i] = (1 - lambda) * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n;
    }
    l1 /= n;

    Image d_ssim;
    double s = ssim(rendered, target, &d_ssim);
    for (size_t i = 0; i < rendered.size(); ++i)
        r.gradient.data[i] += lambda * (-0.5) * d_ssim.data[i];

    r.value = (1 - lambda) * l1 + lambda * (1 - s) / 2;
    return r;
}

// Masked L1 on depth, averaged over masked pixels. mask is 0/1; an empty
// mask yields zero loss and gradient.
inline LossResult loss_depth(const Image& rendered_depth, const Image& target_depth,
                             const Image& mask) {
    if (!rendered_depth.same_shape(target_depth) || !rendered_depth.same_shape(mask))
        throw std::invalid_argument("loss_depth: shape mismatch");
    LossResult r;
    r.gradient = Image(rendered_depth.width, rendered_depth.height, 1);
    size_t count = 0;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask.data[i] > 0) ++count;
    if (count == 0) return r;
    double inv = 1.0 / double(count);
    for (size_t i = 0; i < rendered_depth.size(); ++i) {
        if (mask.data[i] <= 0) continue;
        double d = rendered_depth.data[i] - target_depth.data[i];
        r.value += std::abs(d) * inv;
        r.gradient.data[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * inv;
    }
    return r;
}

}  // namespace cf3d
