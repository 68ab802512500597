#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "mammopos/common.hpp"
#include "mammopos/geometry.hpp"
#include "mammopos/image.hpp"

namespace mammopos {

struct Circle {
    Point center;
    double radius = 0.0;
    double score = 0.0;
};

struct BbParams {
    int r_min = 10;
    int r_max = 20;
    double edge_gradient_threshold = 0.2;  // fraction of the max gradient magnitude
    double accumulator_peak_threshold = 60.0;
    double min_center_separation = 40.0;  // 2 * r_max
    double uniformity_tolerance = 1e-3;   // on normalized intensities
};

inline void validate(const BbParams& p) {
    if (!(p.r_min > 0 && p.r_min < p.r_max)) throw ValidationError("need 0 < r_min < r_max");
    if (!(p.edge_gradient_threshold > 0.0 && p.edge_gradient_threshold < 1.0))
        throw ValidationError("edge_gradient_threshold must lie in (0,1)");
    if (!(p.accumulator_peak_threshold > 0.0))
        throw ValidationError("accumulator_peak_threshold must be > 0");
    if (!(p.min_center_separation >= 1.0))
        throw ValidationError("min_center_separation must be >= 1");
    if (!(p.uniformity_tolerance >= 0.0))
        throw ValidationError("uniformity_tolerance must be >= 0");
}

namespace detail {

struct EdgePixel {
    int x, y;
    double ux, uy;  // unit gradient direction
};

}  // namespace detail

/// Gradient-direction circle Hough transform. Edge pixels vote for candidate
/// centers along both gradient directions at every radius in [r_min, r_max];
/// peaks of the 3x3-smoothed accumulator become candidates, with the radius
/// recovered as the mode of edge-pixel distances. Candidates come back sorted
/// by descending score.
inline std::vector<Circle> hough_circles(const GrayImage& img, const BbParams& p = {}) {
    validate(p);
    if (img.width < 3 || img.height < 3) return {};

    const int w = img.width;
    const int h = img.height;

    // Sobel gradient on the interior
    std::vector<double> mag(static_cast<std::size_t>(w) * h, 0.0);
    std::vector<detail::EdgePixel> edges;
    double max_mag = 0.0;
    std::vector<std::pair<double, double>> grad(static_cast<std::size_t>(w) * h, {0.0, 0.0});
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double gx = -img.at(x - 1, y - 1) - 2.0 * img.at(x - 1, y) - img.at(x - 1, y + 1) +
                              img.at(x + 1, y - 1) + 2.0 * img.at(x + 1, y) + img.at(x + 1, y + 1);
            const double gy = -img.at(x - 1, y - 1) - 2.0 * img.at(x, y - 1) - img.at(x + 1, y - 1) +
                              img.at(x - 1, y + 1) + 2.0 * img.at(x, y + 1) + img.at(x + 1, y + 1);
            const double m = std::hypot(gx, gy);
            mag[static_cast<std::size_t>(y) * w + x] = m;
            grad[static_cast<std::size_t>(y) * w + x] = {gx, gy};
            max_mag = std::max(max_mag, m);
        }
    }
    if (max_mag <= 0.0) return {};

    const double edge_thr = p.edge_gradient_threshold * max_mag;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double m = mag[static_cast<std::size_t>(y) * w + x];
            if (m <= edge_thr) continue;
            const auto [gx, gy] = grad[static_cast<std::size_t>(y) * w + x];
            edges.push_back({x, y, gx / m, gy / m});
        }
    }

    // Center voting
    std::vector<int> acc(static_cast<std::size_t>(w) * h, 0);
    for (const auto& e : edges) {
        for (int r = p.r_min; r <= p.r_max; ++r) {
            for (int sign : {+1, -1}) {
                const int cx = static_cast<int>(std::lround(e.x + sign * r * e.ux));
                const int cy = static_cast<int>(std::lround(e.y + sign * r * e.uy));
                if (cx >= 0 && cx < w && cy >= 0 && cy < h)
                    ++acc[static_cast<std::size_t>(cy) * w + cx];
            }
        }
    }

    // 3x3 box smoothing concentrates votes that straddle cell borders
    std::vector<double> smooth(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            int s = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    s += acc[static_cast<std::size_t>(y + dy) * w + (x + dx)];
            smooth[static_cast<std::size_t>(y) * w + x] = s;
        }
    }

    // Local maxima above threshold
    struct Peak {
        int x, y;
        double score;
    };
    std::vector<Peak> peaks;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double v = smooth[static_cast<std::size_t>(y) * w + x];
            if (v < p.accumulator_peak_threshold) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double n = smooth[static_cast<std::size_t>(y + dy) * w + (x + dx)];
                    // strict on earlier cells breaks plateau ties deterministically
                    if (n > v || (n == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) peaks.push_back({x, y, v});
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });

    // Greedy suppression of nearby duplicates
    std::vector<Peak> kept;
    for (const auto& pk : peaks) {
        const bool clash = std::any_of(kept.begin(), kept.end(), [&](const Peak& k) {
            return std::hypot(pk.x - k.x, pk.y - k.y) < p.min_center_separation;
        });
        if (!clash) kept.push_back(pk);
    }

    std::vector<Circle> out;
    for (const auto& pk : kept) {
        // Sub-pixel center: vote centroid over the 3x3 peak neighborhood
        double sw = 0.0, sx = 0.0, sy = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const double a = acc[static_cast<std::size_t>(pk.y + dy) * w + (pk.x + dx)];
                sw += a;
                sx += a * (pk.x + dx);
                sy += a * (pk.y + dy);
            }
        const Point center = sw > 0.0 ? Point{sx / sw, sy / sw}
                                      : Point{static_cast<double>(pk.x), static_cast<double>(pk.y)};

        // Radius: mode of edge-pixel distances inside the search window,
        // refined by averaging the distances near the winning bin
        std::map<int, int> bins;
        for (const auto& e : edges) {
            const double d = std::hypot(e.x - center.x, e.y - center.y);
            if (d < p.r_min - 0.5 || d > p.r_max + 0.5) continue;
            ++bins[static_cast<int>(std::lround(d))];
        }
        if (bins.empty()) continue;
        const auto mode =
            std::max_element(bins.begin(), bins.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second < b.second : a.first > b.first;
            });
        double rsum = 0.0;
        int rcount = 0;
        for (const auto& e : edges) {
            const double d = std::hypot(e.x - center.x, e.y - center.y);
            if (std::abs(d - mode->first) <= 1.0) {
                rsum += d;
                ++rcount;
            }
        }
        const double radius = rcount > 0 ? rsum / rcount : mode->first;
        if (radius < p.r_min - 0.5 || radius > p.r_max + 0.5) continue;
        out.push_back({center, radius, pk.score});
    }
    return out;
}

/// Keeps only candidates whose center sits at the image maximum and whose
/// full 3x3 neighborhood is uniform within tolerance; returns the best one.
inline std::optional<Circle> filter_bb(const GrayImage& img, const std::vector<Circle>& candidates,
                                       const BbParams& p = {}) {
    if (img.empty()) throw ContractError("filter_bb: empty image");
    const float img_max = *std::max_element(img.pixels.begin(), img.pixels.end());

    std::optional<Circle> best;
    for (const auto& c : candidates) {
        const int cx = static_cast<int>(std::lround(c.center.x));
        const int cy = static_cast<int>(std::lround(c.center.y));
        if (cx < 1 || cx > img.width - 2 || cy < 1 || cy > img.height - 2) continue;
        const float center_v = img.at(cx, cy);
        if (std::abs(center_v - img_max) > p.uniformity_tolerance) continue;
        bool uniform = true;
        for (int dy = -1; dy <= 1 && uniform; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (std::abs(img.at(cx + dx, cy + dy) - center_v) > p.uniformity_tolerance) {
                    uniform = false;
                    break;
                }
        if (!uniform) continue;
        if (!best || c.score > best->score) best = c;
    }
    return best;
}

/// Horizontal posterior nipple line for a CC view: from the BB center to the
/// chest wall edge of the image. p0 is the nipple endpoint.
inline Segment cc_pnl(const Bounds& dims, const Circle& bb, ChestWall chest_wall) {
    if (!point_in_bounds(bb.center, dims)) throw ContractError("cc_pnl: BB center outside image");
    const double edge_x = chest_wall == ChestWall::Left ? 0.0 : dims.width - 1.0;
    if (bb.center.x == edge_x)
        throw ValidationError("BB on chest wall edge: cannot construct a CC PNL");
    return Segment(bb.center, Point{edge_x, bb.center.y});
}

}  // namespace mammopos
