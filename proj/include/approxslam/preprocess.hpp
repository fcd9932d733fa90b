#pragma once

// Depth normalization: millimeters -> meters, stride subsampling by the
// compute size ratio, then an edge-preserving bilateral filter.

#include "approxslam/camera.hpp"
#include "approxslam/errors.hpp"

#include <cmath>
#include <vector>

namespace approxslam {

struct BilateralParams {
    int radius = 2;
    float sigma_spatial = 2.0f;  // pixels
    float sigma_range = 0.1f;    // meters
};

/// Picks pixel (csr*i, csr*j) and converts to meters.
inline DepthFrame subsample_to_meters(const DepthFrameRaw& raw, int csr) {
    if (csr < 1 || raw.width % csr != 0 || raw.height % csr != 0) {
        throw InvalidInputError("frame " + std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                                " is not divisible by csr " + std::to_string(csr));
    }
    DepthFrame out(raw.width / csr, raw.height / csr, 0.0f);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) out.at(x, y) = raw.at(x * csr, y * csr) * 1e-3f;
    }
    return out;
}

/// Bilateral filter over valid pixels; invalid pixels stay invalid.
inline DepthFrame bilateral_filter(const DepthFrame& in, const BilateralParams& p = {}) {
    const int r = p.radius;
    const int side = 2 * r + 1;
    std::vector<float> spatial(static_cast<std::size_t>(side * side));
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            spatial[(dy + r) * side + (dx + r)] =
                std::exp(-static_cast<float>(dx * dx + dy * dy) / (2.0f * p.sigma_spatial * p.sigma_spatial));
        }
    }
    const float inv_range = 1.0f / (2.0f * p.sigma_range * p.sigma_range);

    DepthFrame out(in.width, in.height, 0.0f);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            const float center = in.at(x, y);
            if (center <= 0.0f) continue;
            float sum = 0.0f;
            float wsum = 0.0f;
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= in.height) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= in.width) continue;
                    const float d = in.at(xx, yy);
                    if (d <= 0.0f) continue;
                    const float diff = d - center;
                    const float w = spatial[(dy + r) * side + (dx + r)] * std::exp(-diff * diff * inv_range);
                    sum += w * d;
                    wsum += w;
                }
            }
            out.at(x, y) = sum / wsum;
        }
    }
    return out;
}

inline DepthFrame preprocess(const DepthFrameRaw& raw, int csr, const BilateralParams& params = {}) {
    return bilateral_filter(subsample_to_meters(raw, csr), params);
}

}  // namespace approxslam
