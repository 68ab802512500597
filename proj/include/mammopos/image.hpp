#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mammopos/common.hpp"
#include "mammopos/geometry.hpp"

namespace mammopos {

/// Single-channel raster. Pixels are stored as float in row-major order;
/// values carry whatever unit the producer used (raw 0..255 / 0..65535 counts
/// after loading, [0,1] after normalize()). bit_depth records the source
/// depth, spacing_mm_per_px the physical pixel size when known.
struct GrayImage {
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    std::optional<double> spacing_mm_per_px;
    std::vector<float> pixels;

    static GrayImage make(int w, int h, int depth = 8, float fill = 0.0f) {
        if (w < 1 || h < 1) throw ContractError("image dimensions must be >= 1");
        if (depth != 8 && depth != 16) throw ContractError("bit depth must be 8 or 16");
        GrayImage img;
        img.width = w;
        img.height = h;
        img.bit_depth = depth;
        img.pixels.assign(static_cast<std::size_t>(w) * h, fill);
        return img;
    }

    bool empty() const { return pixels.empty(); }
    std::size_t size() const { return pixels.size(); }

    float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    Bounds bounds() const { return {width, height}; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Min-max rescale to [0,1]. A constant image maps to all zeros.
inline GrayImage normalize(const GrayImage& img) {
    if (img.empty()) throw ContractError("normalize: empty image");
    auto [mn_it, mx_it] = std::minmax_element(img.pixels.begin(), img.pixels.end());
    const float mn = *mn_it, mx = *mx_it;
    GrayImage out = img;
    if (mx == mn) {
        std::fill(out.pixels.begin(), out.pixels.end(), 0.0f);
        return out;
    }
    const float scale = 1.0f / (mx - mn);
    for (auto& p : out.pixels) p = (p - mn) * scale;
    return out;
}

/// Clamped bilinear lookup at a continuous source position.
inline float bilinear_sample(const GrayImage& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

/// Bilinear resample to exactly (w, h), pixel-center (half-pixel) mapping.
inline GrayImage resample(const GrayImage& img, int w, int h) {
    if (img.empty()) throw ContractError("resample: empty image");
    if (w < 1 || h < 1) throw ContractError("resample: target dimensions must be >= 1");
    GrayImage out = GrayImage::make(w, h, img.bit_depth);
    out.spacing_mm_per_px = img.spacing_mm_per_px;
    const double sx = static_cast<double>(img.width) / w;
    const double sy = static_cast<double>(img.height) / h;
    for (int oy = 0; oy < h; ++oy) {
        const double yin = (oy + 0.5) * sy - 0.5;
        for (int ox = 0; ox < w; ++ox) {
            const double xin = (ox + 0.5) * sx - 0.5;
            out.at(ox, oy) = bilinear_sample(img, xin, yin);
        }
    }
    return out;
}

/// Coordinate rescale between two resolutions: plain ratio scaling, matching
/// how predictions made at the network resolution are mapped back to the
/// native raster.
inline Point rescale_point(const Point& p, const Bounds& from, const Bounds& to) {
    return {p.x * static_cast<double>(to.width) / from.width,
            p.y * static_cast<double>(to.height) / from.height};
}

inline Segment rescale_segment(const Segment& s, const Bounds& from, const Bounds& to) {
    return Segment(rescale_point(s.p0(), from, to), rescale_point(s.p1(), from, to));
}

}  // namespace mammopos
