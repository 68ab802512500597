#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <vector>

#include "mammopos/annotation.hpp"
#include "mammopos/augment.hpp"
#include "mammopos/common.hpp"
#include "mammopos/decision.hpp"
#include "mammopos/image.hpp"
#include "mammopos/image_io.hpp"

namespace mammopos {

enum class Scenario { AdequateBoth, MloPecShort, CcTissueCut, BbMissing };

inline std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::AdequateBoth: return "AdequateBoth";
        case Scenario::MloPecShort: return "MloPecShort";
        case Scenario::CcTissueCut: return "CcTissueCut";
        default: return "BbMissing";
    }
}

inline std::optional<Scenario> parse_scenario(std::string_view s) {
    if (s == "AdequateBoth") return Scenario::AdequateBoth;
    if (s == "MloPecShort") return Scenario::MloPecShort;
    if (s == "CcTissueCut") return Scenario::CcTissueCut;
    if (s == "BbMissing") return Scenario::BbMissing;
    return std::nullopt;
}

struct PhantomSpec {
    std::uint64_t seed = 0;
    int width = 512;
    int height = 512;
    // 0.07 mm/px at full mammographic resolution, scaled to the 512 canvas
    double spacing_mm_per_px = 245.0 / 512.0;
    Laterality laterality = Laterality::Right;
    Scenario scenario = Scenario::AdequateBoth;
    double noise_sigma = 0.01;
    double diff_threshold_mm = 10.0;  // the 1-cm rule the scenarios encode
    int bb_r_min = 10;
    int bb_r_max = 20;
    // Explicit geometry overrides (fractions of canvas); sampled when absent.
    std::optional<double> wedge_a_frac;  // pec edge x-intercept / width
    std::optional<double> wedge_b_frac;  // pec edge y-intercept / height
    std::optional<double> nipple_x_frac;
    std::optional<double> nipple_y_frac;
    std::optional<int> bb_radius;
};

inline void validate(const PhantomSpec& s) {
    if (s.width < 64 || s.height < 64) throw ValidationError("phantom canvas must be >= 64 px");
    if (!(s.spacing_mm_per_px > 0.0)) throw ValidationError("spacing must be > 0");
    if (!(s.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
    if (!(s.diff_threshold_mm > 0.0)) throw ValidationError("diff_threshold_mm must be > 0");
    if (!(s.bb_r_min > 0 && s.bb_r_min < s.bb_r_max))
        throw ValidationError("need 0 < bb_r_min < bb_r_max");
}

struct GeneratedCase {
    GrayImage mlo_image;
    ViewAnnotation mlo_ann;
    GrayImage cc_image;
    ViewAnnotation cc_ann;
    Verdict mlo_label = Verdict::Indeterminate;
    Verdict cc_label = Verdict::Indeterminate;
    // Ground-truth geometry in final (laterality-resolved) pixel coordinates.
    double d_mlo = 0.0;  // nipple-to-PEC-line distance; in-bounds iff mlo_label Adequate
    double d_cc = 0.0;   // nipple-to-chest-wall distance on the CC
    Point mlo_bb_center{0, 0};
    double mlo_bb_radius = 0.0;
    std::optional<Point> cc_bb_center;  // absent for BbMissing
    double cc_bb_radius = 0.0;
};

namespace detail {

inline void paint_tissue(GrayImage& img, double cy, double rx, double ry) {
    const double edge_scale = std::min(rx, ry);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double e = std::sqrt((x / rx) * (x / rx) +
                                       ((y - cy) / ry) * ((y - cy) / ry));
            const double cov = std::clamp((1.0 - e) * edge_scale + 0.5, 0.0, 1.0);
            if (cov <= 0.0) continue;
            const double tissue = 0.55 * (1.0 - 0.35 * std::min(e * e, 1.0));
            img.at(x, y) = static_cast<float>(img.at(x, y) * (1.0 - cov) + tissue * cov);
        }
}

inline void paint_wedge(GrayImage& img, double a, double b, double value) {
    const double len = std::hypot(a, b);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            // signed distance to the wedge edge, positive inside the muscle
            const double s = (a * b - b * x - a * y) / len;
            const double cov = std::clamp(s + 0.5, 0.0, 1.0);
            if (cov <= 0.0) continue;
            img.at(x, y) = static_cast<float>(img.at(x, y) * (1.0 - cov) + value * cov);
        }
}

inline void add_bump(GrayImage& img, const Point& c, double sigma, double amp) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    const int x0 = std::max(0, static_cast<int>(c.x) - r);
    const int x1 = std::min(img.width - 1, static_cast<int>(c.x) + r);
    const int y0 = std::max(0, static_cast<int>(c.y) - r);
    const int y1 = std::min(img.height - 1, static_cast<int>(c.y) + r);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d2 = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
            img.at(x, y) += static_cast<float>(amp * std::exp(-d2 / (2.0 * sigma * sigma)));
        }
}

inline void paint_rect(GrayImage& img, const Point& c0, const Point& c1, float value) {
    const int x0 = static_cast<int>(std::min(c0.x, c1.x));
    const int x1 = static_cast<int>(std::max(c0.x, c1.x));
    const int y0 = static_cast<int>(std::min(c0.y, c1.y));
    const int y1 = static_cast<int>(std::max(c0.y, c1.y));
    for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x)
            img.at(x, y) = value;
}

// Everything painted before the BB stays strictly below it so the marker is
// the unique intensity maximum.
inline void add_noise_and_cap(GrayImage& img, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, sigma);
    for (auto& v : img.pixels)
        v = static_cast<float>(std::clamp(v + (sigma > 0.0 ? n(rng) : 0.0), 0.0, 0.96));
}

inline void paint_bb(GrayImage& img, const Point& c, double r) {
    const int x0 = std::max(0, static_cast<int>(c.x - r - 2));
    const int x1 = std::min(img.width - 1, static_cast<int>(c.x + r + 2));
    const int y0 = std::max(0, static_cast<int>(c.y - r - 2));
    const int y1 = std::min(img.height - 1, static_cast<int>(c.y + r + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x - c.x, y - c.y);
            const double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
            if (cov >= 1.0)
                img.at(x, y) = 1.0f;  // exact: the 9-way uniformity anchor
            else if (cov > 0.0)
                img.at(x, y) = static_cast<float>(img.at(x, y) * (1.0 - cov) + cov);
        }
}

inline void quantize8(GrayImage& img) {
    for (auto& v : img.pixels) v = std::round(v * 255.0f);
    img.bit_depth = 8;
}

// PEC edge line x/a + y/b = 1 clipped to the canvas; exactly two border
// crossings exist for every feasible wedge.
inline Segment clip_pec_line(double a, double b, const Bounds& dims) {
    const double w1 = dims.width - 1.0;
    const double h1 = dims.height - 1.0;
    std::vector<Point> pts;
    auto push_unique = [&](const Point& p) {
        for (const auto& q : pts)
            if (distance(p, q) < 1e-6) return;
        pts.push_back(p);
    };
    if (a >= 0.0 && a <= w1) push_unique(Point{a, 0.0});
    if (b >= 0.0 && b <= h1) push_unique(Point{0.0, b});
    const double x_at_h1 = a * (1.0 - h1 / b);
    if (x_at_h1 >= 0.0 && x_at_h1 <= w1) push_unique(Point{x_at_h1, h1});
    const double y_at_w1 = b * (1.0 - w1 / a);
    if (y_at_w1 >= 0.0 && y_at_w1 <= h1) push_unique(Point{w1, y_at_w1});
    if (pts.size() < 2) throw ValidationError("pec wedge edge does not cross the canvas");
    std::sort(pts.begin(), pts.end(), [](const Point& p, const Point& q) { return p.y < q.y; });
    return Segment(pts.front(), pts.back());
}

struct MloGeometry {
    double a = 0.0, b = 0.0;  // wedge intercepts
    Point nipple{0, 0};
    Point foot{0, 0};   // perpendicular foot on the PEC line
    double d = 0.0;     // nipple-to-line distance
    bool foot_in_margin = false;
};

inline MloGeometry solve_mlo(double a, double b, const Point& n) {
    MloGeometry g;
    g.a = a;
    g.b = b;
    g.nipple = n;
    const double len2 = a * a + b * b;
    const double v = b * n.x + a * n.y - a * b;  // positive on the nipple side
    g.d = v / std::sqrt(len2);
    g.foot = Point{n.x - v * b / len2, n.y - v * a / len2};
    return g;
}

}  // namespace detail

/// Builds one synthetic breast: an MLO with pectoral wedge, nipple bump, BB
/// and exact PEC/PNL ground truth, plus a CC whose nipple distance realizes
/// the requested adequacy scenario. Same spec, same bits.
inline GeneratedCase generate_case(const PhantomSpec& spec) {
    validate(spec);
    const int w = spec.width;
    const int h = spec.height;
    const double margin = 0.09 * std::min(w, h);
    const double thr_px = spec.diff_threshold_mm / spec.spacing_mm_per_px;
    const bool mlo_adequate = spec.scenario != Scenario::MloPecShort;

    std::mt19937_64 rng(derive_seed(spec.seed, 2, 0));
    auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    // --- sample feasible geometry (painted frame: chest wall at x = 0) ---
    std::optional<detail::MloGeometry> geom;
    for (int attempt = 0; attempt < 500 && !geom; ++attempt) {
        double a, b, nx, ny;
        if (mlo_adequate) {
            a = spec.wedge_a_frac.value_or(uniform(0.40, 0.66)) * w;
            b = spec.wedge_b_frac.value_or(uniform(0.78, 1.20)) * h;
            nx = spec.nipple_x_frac.value_or(uniform(0.55, 0.72)) * w;
            ny = spec.nipple_y_frac.value_or(uniform(0.42, 0.60)) * h;
        } else {
            a = spec.wedge_a_frac.value_or(uniform(0.16, 0.28)) * w;
            b = spec.wedge_b_frac.value_or(uniform(0.34, 0.50)) * h;
            nx = spec.nipple_x_frac.value_or(uniform(0.55, 0.72)) * w;
            ny = spec.nipple_y_frac.value_or(uniform(0.80, 0.92)) * h;
        }
        if (!(a > 4.0 && b > 4.0)) continue;
        if (nx < margin || nx > w - 1 - margin || ny < margin || ny > h - 1 - margin) continue;
        const detail::MloGeometry g = detail::solve_mlo(a, b, Point{nx, ny});
        if (!(g.d > 0.0)) continue;  // nipple must lie beyond the muscle edge
        if (g.d > 0.78 * w) continue;  // CC nipple must stay on canvas at matching depth
        if (mlo_adequate) {
            const bool foot_ok = g.foot.x >= margin && g.foot.x <= w - 1 - margin &&
                                 g.foot.y >= margin && g.foot.y <= h - 1 - margin;
            // keep d long enough that the tissue-cut scenario stays realizable
            if (foot_ok && g.d >= 3.4 * thr_px + 45.0) geom = g;
        } else {
            if (g.foot.x <= -0.04 * w) geom = g;
        }
    }
    if (!geom)
        throw ValidationError("phantom spec cannot realize scenario " +
                              to_string(spec.scenario) + " within the canvas");

    // --- MLO image ---
    GrayImage mlo = GrayImage::make(w, h, 8, 0.05f);
    {
        const double ry = std::max(geom->nipple.y, h - geom->nipple.y) * uniform(0.85, 1.0);
        detail::paint_tissue(mlo, geom->nipple.y, geom->nipple.x, ry);
        detail::paint_wedge(mlo, geom->a, geom->b, 0.80f);
        detail::add_bump(mlo, geom->nipple, 6.0, 0.25);
    }
    const Point tag0{w - 70.0, 20.0};
    const Point tag1{w - 30.0, 50.0};
    detail::paint_rect(mlo, tag0, tag1, 0.85f);
    detail::add_noise_and_cap(mlo, spec.noise_sigma, rng);
    const double r_mlo =
        spec.bb_radius.value_or(std::uniform_int_distribution<int>(spec.bb_r_min, spec.bb_r_max)(rng));
    detail::paint_bb(mlo, geom->nipple, r_mlo);
    detail::quantize8(mlo);
    mlo.spacing_mm_per_px = spec.spacing_mm_per_px;

    // --- MLO annotation: PEC edge plus a PNL stub toward the foot ---
    ViewAnnotation mlo_ann;
    mlo_ann.view = ViewKind::Mlo;
    mlo_ann.laterality = Laterality::Right;  // painted frame; flipped below if Left
    mlo_ann.image_dims = Bounds{w, h};
    mlo_ann.pec = detail::clip_pec_line(geom->a, geom->b, mlo_ann.image_dims);
    {
        const Point u{(geom->foot.x - geom->nipple.x) / geom->d,
                      (geom->foot.y - geom->nipple.y) / geom->d};
        // distance to the canvas border along u
        double border = std::numeric_limits<double>::max();
        if (u.x < 0.0) border = std::min(border, geom->nipple.x / -u.x);
        if (u.x > 0.0) border = std::min(border, (w - 1 - geom->nipple.x) / u.x);
        if (u.y < 0.0) border = std::min(border, geom->nipple.y / -u.y);
        if (u.y > 0.0) border = std::min(border, (h - 1 - geom->nipple.y) / u.y);
        const double t = std::min(0.8 * geom->d, border - 2.0);
        if (t < 5.0) throw ValidationError("phantom nipple too close to the canvas border");
        mlo_ann.pnl = Segment(geom->nipple,
                              geom->nipple + Point{u.x * t, u.y * t});
    }
    mlo_ann.tag_box = TagBox{tag0, tag1};

    // --- CC geometry: the nipple x IS d_cc in the painted frame ---
    double d_cc = 0.0;
    const double cy_cc = uniform(0.44, 0.56) * h;
    {
        bool ok = false;
        for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
            switch (spec.scenario) {
                case Scenario::CcTissueCut:
                    d_cc = geom->d - uniform(1.6, 3.4) * thr_px;
                    break;
                default:
                    d_cc = geom->d + uniform(-0.45, 0.45) * thr_px;
                    break;
            }
            ok = d_cc >= margin + 10.0 && d_cc <= 0.82 * w;
        }
        if (!ok)
            throw ValidationError("phantom spec cannot place the CC nipple for scenario " +
                                  to_string(spec.scenario));
    }
    const Point n_cc{d_cc, cy_cc};

    GrayImage cc = GrayImage::make(w, h, 8, 0.05f);
    {
        const double ry = std::min(cy_cc, h - 1 - cy_cc) * uniform(0.80, 0.95);
        detail::paint_tissue(cc, cy_cc, n_cc.x, ry);
        detail::add_bump(cc, n_cc, 6.0, 0.25);
    }
    detail::paint_rect(cc, tag0, tag1, 0.85f);
    detail::add_noise_and_cap(cc, spec.noise_sigma, rng);
    const double r_cc =
        spec.bb_radius.value_or(std::uniform_int_distribution<int>(spec.bb_r_min, spec.bb_r_max)(rng));
    if (spec.scenario != Scenario::BbMissing) detail::paint_bb(cc, n_cc, r_cc);
    detail::quantize8(cc);
    cc.spacing_mm_per_px = spec.spacing_mm_per_px;

    ViewAnnotation cc_ann;
    cc_ann.view = ViewKind::Cc;
    cc_ann.laterality = Laterality::Right;
    cc_ann.image_dims = Bounds{w, h};
    cc_ann.pnl = Segment(n_cc, Point{0.0, cy_cc});
    cc_ann.tag_box = TagBox{tag0, tag1};

    // --- assemble, flipping into the requested laterality ---
    GeneratedCase out;
    out.mlo_image = std::move(mlo);
    out.mlo_ann = std::move(mlo_ann);
    out.cc_image = std::move(cc);
    out.cc_ann = std::move(cc_ann);
    out.d_mlo = geom->d;
    out.d_cc = d_cc;
    out.mlo_bb_center = geom->nipple;
    out.mlo_bb_radius = r_mlo;
    if (spec.scenario != Scenario::BbMissing) {
        out.cc_bb_center = n_cc;
        out.cc_bb_radius = r_cc;
    }
    if (spec.laterality == Laterality::Left) {
        std::tie(out.mlo_image, out.mlo_ann) = hflip(out.mlo_image, out.mlo_ann);
        std::tie(out.cc_image, out.cc_ann) = hflip(out.cc_image, out.cc_ann);
        out.mlo_bb_center.x = w - 1 - out.mlo_bb_center.x;
        if (out.cc_bb_center) out.cc_bb_center->x = w - 1 - out.cc_bb_center->x;
    }

    switch (spec.scenario) {
        case Scenario::AdequateBoth:
            out.mlo_label = Verdict::Adequate;
            out.cc_label = Verdict::Adequate;
            break;
        case Scenario::MloPecShort:
            out.mlo_label = Verdict::Inadequate;
            out.cc_label = Verdict::Indeterminate;  // no adequate MLO to compare against
            break;
        case Scenario::CcTissueCut:
            out.mlo_label = Verdict::Adequate;
            out.cc_label = Verdict::Inadequate;
            break;
        case Scenario::BbMissing:
            out.mlo_label = Verdict::Adequate;
            out.cc_label = Verdict::Indeterminate;  // marker absent, no d_cc measurable
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset emission: study-layout directories plus a manifest
// ---------------------------------------------------------------------------

struct ManifestRow {
    std::string subject;
    Laterality laterality = Laterality::Right;
    Scenario scenario = Scenario::AdequateBoth;
    Verdict mlo_label = Verdict::Indeterminate;
    Verdict cc_label = Verdict::Indeterminate;
    double d_mlo = 0.0;
    double d_cc = 0.0;
    std::string mlo_image;  // paths relative to the dataset root
    std::string cc_image;
};

inline std::filesystem::path write_case(const std::filesystem::path& root,
                                        const std::string& subject, const GeneratedCase& c,
                                        ManifestRow& row) {
    const auto dir = root / subject;
    std::filesystem::create_directories(dir);
    const std::string lat = to_string(c.mlo_ann.laterality);
    const std::string mlo_name = "Mammo_" + subject + "_" + lat + "MLO_1.png";
    const std::string cc_name = "Mammo_" + subject + "_" + lat + "CC_1.png";

    save_image(dir / mlo_name, c.mlo_image);
    save_annotation(dir / (mlo_name + ".json"), c.mlo_ann);
    SidecarMeta meta;
    meta.spacing_mm_per_px = c.mlo_image.spacing_mm_per_px;
    meta.laterality = c.mlo_ann.laterality;
    meta.view = ViewKind::Mlo;
    write_sidecar(dir / mlo_name, meta);

    save_image(dir / cc_name, c.cc_image);
    save_annotation(dir / (cc_name + ".json"), c.cc_ann);
    meta.view = ViewKind::Cc;
    write_sidecar(dir / cc_name, meta);

    row.subject = subject;
    row.laterality = c.mlo_ann.laterality;
    row.mlo_label = c.mlo_label;
    row.cc_label = c.cc_label;
    row.d_mlo = c.d_mlo;
    row.d_cc = c.d_cc;
    row.mlo_image = subject + "/" + mlo_name;
    row.cc_image = subject + "/" + cc_name;
    return dir;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "subject,laterality,scenario,mlo_label,cc_label,d_mlo_px,d_cc_px,mlo_image,cc_image\n";
    for (const auto& r : rows) {
        out << r.subject << "," << to_string(r.laterality) << "," << to_string(r.scenario) << ","
            << to_string(r.mlo_label) << "," << to_string(r.cc_label) << ","
            << format_double(r.d_mlo) << "," << format_double(r.d_cc) << "," << r.mlo_image << ","
            << r.cc_image << "\n";
    }
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<ManifestRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 9)
            throw FormatError(FormatError::Kind::Malformed, "bad manifest row: " + line);
        ManifestRow r;
        r.subject = f[0];
        const auto lat = parse_laterality(f[1]);
        const auto sc = parse_scenario(f[2]);
        if (!lat || !sc)
            throw FormatError(FormatError::Kind::Malformed, "bad manifest row: " + line);
        r.laterality = *lat;
        r.scenario = *sc;
        auto to_verdict = [&](const std::string& s) {
            if (s == "Adequate") return Verdict::Adequate;
            if (s == "Inadequate") return Verdict::Inadequate;
            if (s == "Indeterminate") return Verdict::Indeterminate;
            throw FormatError(FormatError::Kind::Malformed, "bad manifest verdict: " + s);
        };
        r.mlo_label = to_verdict(f[3]);
        r.cc_label = to_verdict(f[4]);
        r.d_mlo = std::stod(f[5]);
        r.d_cc = std::stod(f[6]);
        r.mlo_image = f[7];
        r.cc_image = f[8];
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Emits `n` cases cycling through the four scenarios and both lateralities,
/// one subject directory each, with manifest.csv at the root.
inline std::vector<ManifestRow> generate_dataset(const std::filesystem::path& root, int n,
                                                 std::uint64_t master_seed,
                                                 PhantomSpec proto = {}) {
    if (n < 1) throw ValidationError("dataset size must be >= 1");
    std::filesystem::create_directories(root);
    const Scenario cycle[4] = {Scenario::AdequateBoth, Scenario::MloPecShort,
                               Scenario::CcTissueCut, Scenario::BbMissing};
    std::vector<ManifestRow> rows;
    rows.reserve(n);
    for (int i = 0; i < n; ++i) {
        PhantomSpec spec = proto;
        spec.seed = derive_seed(master_seed, 3, static_cast<std::uint64_t>(i));
        spec.scenario = cycle[i % 4];
        spec.laterality = (i / 4) % 2 == 0 ? Laterality::Right : Laterality::Left;
        const GeneratedCase c = generate_case(spec);
        char subject[24];
        std::snprintf(subject, sizeof subject, "phantom_%04d", i);
        ManifestRow row;
        row.scenario = spec.scenario;
        write_case(root, subject, c, row);
        rows.push_back(std::move(row));
    }
    write_manifest(root / "manifest.csv", rows);
    return rows;
}

}  // namespace mammopos
