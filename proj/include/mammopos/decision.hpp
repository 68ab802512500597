#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mammopos/bb_detect.hpp"
#include "mammopos/common.hpp"
#include "mammopos/geometry.hpp"

namespace mammopos {

enum class Verdict { Adequate, Inadequate, Indeterminate };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Adequate: return "Adequate";
        case Verdict::Inadequate: return "Inadequate";
        default: return "Indeterminate";
    }
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
    if (s == "Adequate") return Verdict::Adequate;
    if (s == "Inadequate") return Verdict::Inadequate;
    if (s == "Indeterminate") return Verdict::Indeterminate;
    return std::nullopt;
}

enum class UnitMode { Physical, Pixel };

inline std::string to_string(UnitMode m) { return m == UnitMode::Physical ? "mm" : "px"; }

inline std::optional<UnitMode> parse_unit_mode(std::string_view s) {
    if (s == "physical" || s == "mm") return UnitMode::Physical;
    if (s == "pixel" || s == "px") return UnitMode::Pixel;
    return std::nullopt;
}

struct DecisionConfig {
    double diff_threshold = 10.0;  // mm in Physical mode, px in Pixel mode
    UnitMode unit_mode = UnitMode::Physical;
    double bb_distance_threshold = 50.0;  // px
};

inline void validate(const DecisionConfig& cfg) {
    if (!(cfg.diff_threshold > 0.0)) throw ValidationError("diff_threshold must be > 0");
    if (!(cfg.bb_distance_threshold > 0.0))
        throw ValidationError("bb_distance_threshold must be > 0");
}

struct MloAssessment {
    std::optional<Point> intersection;
    bool in_bounds = false;
    std::optional<double> d_mlo;        // nipple-to-intersection length, px
    std::optional<double> bb_distance;  // perpendicular BB-to-PNL distance, px
    bool bb_ok = true;
    Verdict verdict = Verdict::Indeterminate;
};

struct CcAssessment {
    std::optional<double> d_cc;    // px
    std::optional<double> d_diff;  // mm in Physical mode, px in Pixel mode
    Verdict verdict = Verdict::Indeterminate;
    std::string diagnostic;  // set when Indeterminate
};

/// MLO adequacy: the extended PEC line and PNL must cross inside the image.
/// d_mlo is measured from the PNL nipple endpoint (p0) to that crossing.
inline MloAssessment assess_mlo(const Segment& pec, const Segment& pnl, const Bounds& dims) {
    MloAssessment out;
    out.intersection = line_intersection(pec, pnl);
    if (!out.intersection) {
        out.verdict = Verdict::Inadequate;
        return out;
    }
    out.in_bounds = point_in_bounds(*out.intersection, dims);
    if (!out.in_bounds) {
        out.verdict = Verdict::Inadequate;
        return out;
    }
    out.d_mlo = distance(pnl.p0(), *out.intersection);
    out.verdict = Verdict::Adequate;
    return out;
}

struct BbCheck {
    std::optional<double> distance;  // px
    bool ok = true;                  // stays true when no BB was detected
};

/// The BB marker should sit near the PNL the network drew; a large distance
/// flags a suspect prediction but does not reject the view.
inline BbCheck check_bb_distance(const Segment& pnl, const std::optional<Circle>& bb,
                                 const DecisionConfig& cfg) {
    BbCheck out;
    if (!bb) return out;
    out.distance = perpendicular_distance(bb->center, pnl);
    out.ok = *out.distance < cfg.bb_distance_threshold;
    return out;
}

/// The 1-cm rule: compare PNL lengths across the two views of one breast.
inline CcAssessment assess_pair(double d_mlo, double d_cc, std::optional<double> spacing,
                                const DecisionConfig& cfg) {
    validate(cfg);
    CcAssessment out;
    out.d_cc = d_cc;
    const double diff_px = std::abs(d_cc - d_mlo);
    if (cfg.unit_mode == UnitMode::Physical) {
        if (!spacing) {
            out.diagnostic =
                "pixel spacing required for the physical-unit threshold but absent";
            return out;  // Indeterminate, never a silent pixel fallback
        }
        if (!(*spacing > 0.0)) throw ValidationError("spacing must be > 0");
        out.d_diff = diff_px * *spacing;
    } else {
        out.d_diff = diff_px;
    }
    out.verdict = *out.d_diff < cfg.diff_threshold ? Verdict::Adequate : Verdict::Inadequate;
    return out;
}

/// Picks the decision views: the adequate MLO with the longest d_mlo and the
/// CC with the longest d_cc. Exact ties go to the lowest index.
inline std::pair<std::optional<std::size_t>, std::optional<std::size_t>> select_views(
    const std::vector<MloAssessment>& mlos, const std::vector<std::optional<double>>& cc_dcc) {
    std::optional<std::size_t> chosen_mlo;
    for (std::size_t i = 0; i < mlos.size(); ++i) {
        if (mlos[i].verdict != Verdict::Adequate || !mlos[i].d_mlo) continue;
        if (!chosen_mlo || *mlos[i].d_mlo > *mlos[*chosen_mlo].d_mlo) chosen_mlo = i;
    }
    std::optional<std::size_t> chosen_cc;
    for (std::size_t i = 0; i < cc_dcc.size(); ++i) {
        if (!cc_dcc[i]) continue;
        if (!chosen_cc || *cc_dcc[i] > *cc_dcc[*chosen_cc]) chosen_cc = i;
    }
    return {chosen_mlo, chosen_cc};
}

// ---------------------------------------------------------------------------
// Per-breast composition
// ---------------------------------------------------------------------------

struct MloViewData {
    std::string name;
    Segment pec;
    Segment pnl;
    std::optional<Circle> bb;  // detected marker on this view, if any
    Bounds dims{0, 0};
};

struct CcViewData {
    std::string name;
    std::optional<Segment> pnl;  // absent when no BB was detected
    Bounds dims{0, 0};
};

struct BreastViews {
    Laterality laterality = Laterality::Left;
    std::vector<MloViewData> mlos;
    std::vector<CcViewData> ccs;
};

struct BreastDecision {
    Laterality laterality = Laterality::Left;
    std::vector<std::string> mlo_names;
    std::vector<MloAssessment> mlo;
    // What the report row shows: nipple-to-intersection length when the view
    // is adequate, otherwise the drawn PNL segment length.
    std::vector<double> mlo_row_length;
    std::vector<std::string> cc_names;
    std::vector<std::optional<double>> cc_length;
    std::optional<std::size_t> chosen_mlo;
    std::optional<std::size_t> chosen_cc;
    CcAssessment cc;
};

inline BreastDecision decide_breast(const BreastViews& views, std::optional<double> spacing,
                                    const DecisionConfig& cfg) {
    validate(cfg);
    BreastDecision out;
    out.laterality = views.laterality;
    for (const auto& v : views.mlos) {
        MloAssessment a = assess_mlo(v.pec, v.pnl, v.dims);
        const BbCheck bb = check_bb_distance(v.pnl, v.bb, cfg);
        a.bb_distance = bb.distance;
        a.bb_ok = bb.ok;
        out.mlo_names.push_back(v.name);
        out.mlo_row_length.push_back(a.d_mlo ? *a.d_mlo : v.pnl.length());
        out.mlo.push_back(std::move(a));
    }
    for (const auto& v : views.ccs) {
        out.cc_names.push_back(v.name);
        out.cc_length.push_back(v.pnl ? std::optional<double>(v.pnl->length()) : std::nullopt);
    }
    std::tie(out.chosen_mlo, out.chosen_cc) = select_views(out.mlo, out.cc_length);
    if (out.chosen_mlo && out.chosen_cc) {
        out.cc = assess_pair(*out.mlo[*out.chosen_mlo].d_mlo, *out.cc_length[*out.chosen_cc],
                             spacing, cfg);
    } else if (out.chosen_cc) {
        out.cc.d_cc = out.cc_length[*out.chosen_cc];
    }
    return out;
}

}  // namespace mammopos
