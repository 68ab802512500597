#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <utility>

#include "mammopos/annotation.hpp"
#include "mammopos/common.hpp"
#include "mammopos/image.hpp"

namespace mammopos {

struct AugmentConfig {
    double flip_probability = 0.5;
    double max_rotation_deg = 15.0;
    std::uint64_t rng_seed = 0;
};

inline void validate(const AugmentConfig& cfg) {
    if (!(cfg.flip_probability >= 0.0 && cfg.flip_probability <= 1.0))
        throw ValidationError("flip_probability must lie in [0,1]");
    if (!(cfg.max_rotation_deg >= 0.0))
        throw ValidationError("max_rotation_deg must be >= 0");
}

/// Mirrors pixel columns and annotation x coordinates; laterality toggles.
inline std::pair<GrayImage, ViewAnnotation> hflip(const GrayImage& img, const ViewAnnotation& ann) {
    GrayImage out = img;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = img.at(img.width - 1 - x, y);

    const double w1 = img.width - 1;
    auto mirror = [&](Point p) { return Point{w1 - p.x, p.y}; };
    ViewAnnotation a = ann;
    a.laterality = opposite(ann.laterality);
    if (ann.pec) a.pec = Segment(mirror(ann.pec->p0()), mirror(ann.pec->p1()));
    if (ann.pnl) a.pnl = Segment(mirror(ann.pnl->p0()), mirror(ann.pnl->p1()));
    if (ann.tag_box) a.tag_box = TagBox{mirror(ann.tag_box->corner0), mirror(ann.tag_box->corner1)};
    return {std::move(out), std::move(a)};
}

namespace detail {

inline float sample_zero_pad(const GrayImage& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto px = [&](int xi, int yi) -> double {
        if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return 0.0;
        return img.at(xi, yi);
    };
    const double top = px(x0, y0) * (1.0 - fx) + px(x0 + 1, y0) * fx;
    const double bot = px(x0, y0 + 1) * (1.0 - fx) + px(x0 + 1, y0 + 1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

}  // namespace detail

/// Rotates about the image center, growing the canvas to the rotated bounding
/// box so no content or annotation is cropped. Zero padding, bilinear sampling.
inline std::pair<GrayImage, ViewAnnotation> rotate_expand(const GrayImage& img,
                                                          const ViewAnnotation& ann,
                                                          double angle_deg) {
    const double theta = angle_deg * std::numbers::pi / 180.0;
    // Snap to exact values at the axes so right-angle canvases come out exact
    // (cos(pi/2) computed in double is ~6e-17, which would ceil to an extra
    // column).
    auto snap = [](double v) {
        for (double target : {0.0, 1.0, -1.0})
            if (std::abs(v - target) < 1e-12) return target;
        return v;
    };
    const double c = snap(std::cos(theta));
    const double s = snap(std::sin(theta));
    const int out_w = static_cast<int>(std::ceil(img.width * std::abs(c) + img.height * std::abs(s)));
    const int out_h = static_cast<int>(std::ceil(img.width * std::abs(s) + img.height * std::abs(c)));

    const double cx_in = (img.width - 1) / 2.0;
    const double cy_in = (img.height - 1) / 2.0;
    const double cx_out = (out_w - 1) / 2.0;
    const double cy_out = (out_h - 1) / 2.0;

    GrayImage out = GrayImage::make(out_w, out_h, img.bit_depth);
    out.spacing_mm_per_px = img.spacing_mm_per_px;
    for (int y = 0; y < out_h; ++y) {
        const double dy = y - cy_out;
        for (int x = 0; x < out_w; ++x) {
            const double dx = x - cx_out;
            // inverse rotation back into source coordinates
            const double sx = c * dx + s * dy + cx_in;
            const double sy = -s * dx + c * dy + cy_in;
            out.at(x, y) = detail::sample_zero_pad(img, sx, sy);
        }
    }

    auto fwd = [&](Point p) {
        const double dx = p.x - cx_in;
        const double dy = p.y - cy_in;
        return Point{c * dx - s * dy + cx_out, s * dx + c * dy + cy_out};
    };
    ViewAnnotation a = ann;
    a.image_dims = Bounds{out_w, out_h};
    if (ann.pec) a.pec = Segment(fwd(ann.pec->p0()), fwd(ann.pec->p1()));
    if (ann.pnl) a.pnl = Segment(fwd(ann.pnl->p0()), fwd(ann.pnl->p1()));
    if (ann.tag_box) a.tag_box = TagBox{fwd(ann.tag_box->corner0), fwd(ann.tag_box->corner1)};
    return {std::move(out), std::move(a)};
}

struct AugmentSample {
    bool flip = false;
    double angle_deg = 0.0;
};

/// Deterministic per-index draw: the same (seed, index) always yields the same
/// transform regardless of call order, so parallel and restarted runs agree.
inline AugmentSample sample_augment(const AugmentConfig& cfg, std::uint64_t index) {
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, /*stream=*/1, index));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    AugmentSample out;
    out.flip = unit(rng) < cfg.flip_probability;
    if (cfg.max_rotation_deg > 0.0)
        out.angle_deg =
            std::uniform_real_distribution<double>(-cfg.max_rotation_deg, cfg.max_rotation_deg)(rng);
    return out;
}

inline std::pair<GrayImage, ViewAnnotation> apply_augment(const GrayImage& img,
                                                          const ViewAnnotation& ann,
                                                          const AugmentSample& sample) {
    GrayImage cur_img = img;
    ViewAnnotation cur_ann = ann;
    if (sample.flip) std::tie(cur_img, cur_ann) = hflip(cur_img, cur_ann);
    if (sample.angle_deg != 0.0)
        std::tie(cur_img, cur_ann) = rotate_expand(cur_img, cur_ann, sample.angle_deg);
    return {std::move(cur_img), std::move(cur_ann)};
}

}  // namespace mammopos
