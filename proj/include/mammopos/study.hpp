#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <vector>

#include "mammopos/annotation.hpp"
#include "mammopos/bb_detect.hpp"
#include "mammopos/decision.hpp"
#include "mammopos/image_io.hpp"
#include "mammopos/predictor.hpp"
#include "mammopos/report.hpp"

namespace mammopos {

struct AssessConfig {
    DecisionConfig decision;
    BbParams bb;
};

struct LoadedView {
    std::filesystem::path path;
    std::string name;
    ViewKind view = ViewKind::Mlo;
    Laterality laterality = Laterality::Left;
    GrayImage image;
    std::optional<ViewAnnotation> ann;
};

struct SubjectStudy {
    std::string subject;
    std::vector<LoadedView> views;
};

inline std::optional<Circle> detect_bb(const GrayImage& img, const BbParams& params) {
    const auto candidates = hough_circles(img, params);
    if (candidates.empty()) return std::nullopt;
    return filter_bb(img, candidates, params);
}

/// Chest wall side of a CC view: tissue presses against the chest-wall edge,
/// so the brighter border column is the wall.
inline ChestWall infer_chest_wall(const GrayImage& img) {
    double left = 0.0, right = 0.0;
    for (int y = 0; y < img.height; ++y) {
        left += img.at(0, y);
        right += img.at(img.width - 1, y);
    }
    return left >= right ? ChestWall::Left : ChestWall::Right;
}

namespace detail {

inline bool is_image_file(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    return ext == ".png" || ext == ".pgm";
}

}  // namespace detail

/// Loads every recognizable view in a subject directory. View identity comes
/// from filename tokens (LMLO/RMLO/LCC/RCC), the sidecar overriding when set;
/// unidentifiable images are skipped.
inline SubjectStudy load_subject(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError(dir.string() + " is not a directory");
    SubjectStudy study;
    study.subject = dir.filename().string();
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && detail::is_image_file(entry.path()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& path : files) {
        std::optional<ViewKind> view;
        std::optional<Laterality> lat;
        detail::infer_from_path_tokens(path.filename().string(), view, lat);
        const SidecarMeta meta = read_sidecar(path);
        if (meta.view) view = meta.view;
        if (meta.laterality) lat = meta.laterality;
        if (!view || !lat) continue;

        LoadedView v;
        v.path = path;
        v.name = path.filename().string();
        v.view = *view;
        v.laterality = *lat;
        v.image = load_image(path);

        const auto ann_path = std::filesystem::path(path.string() + ".json");
        if (std::filesystem::exists(ann_path)) {
            ViewAnnotation ann = load_annotation(ann_path);
            if (ann.image_dims.width != v.image.width ||
                ann.image_dims.height != v.image.height)
                throw ValidationError(ann_path.string() + ": dimensions do not match the image");
            if (ann.view != v.view)
                throw ValidationError(ann_path.string() + ": view conflicts with the filename");
            v.ann = std::move(ann);
        }
        study.views.push_back(std::move(v));
    }
    if (study.views.empty())
        throw ValidationError("no recognizable views in " + dir.string());
    return study;
}

/// Dataset root = directory of subject directories; a directory that itself
/// holds views is a single subject.
inline std::vector<std::filesystem::path> find_subject_dirs(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw IoError(root.string() + " is not a directory");
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_regular_file() && detail::is_image_file(entry.path())) return {root};
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        for (const auto& sub : std::filesystem::directory_iterator(entry.path()))
            if (sub.is_regular_file() && detail::is_image_file(sub.path())) {
                dirs.push_back(entry.path());
                break;
            }
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ValidationError("no subject directories under " + root.string());
    return dirs;
}

struct AssessedSubject {
    StudyReport report;
    std::string text;
    std::vector<BreastDecision> decisions;  // left first, then right
};

inline AssessedSubject assess_subject(const SubjectStudy& study, const MloPredictor& predictor,
                                      const AssessConfig& cfg) {
    std::map<Laterality, BreastViews> sides;
    std::map<Laterality, std::optional<double>> spacing;

    for (const auto& v : study.views) {
        auto& breast = sides[v.laterality];
        breast.laterality = v.laterality;
        auto& sp = spacing[v.laterality];
        if (v.image.spacing_mm_per_px) {
            if (sp && std::abs(*sp - *v.image.spacing_mm_per_px) > 1e-6)
                throw ValidationError(v.name + ": pixel spacing disagrees with sibling views");
            sp = v.image.spacing_mm_per_px;
        }

        if (v.view == ViewKind::Mlo) {
            const EndpointVector e = predictor.predict(v.image, v.ann);
            const Bounds from{predictor.space(), predictor.space()};
            const Bounds to = v.image.bounds();
            const Segment pec = rescale_segment(Segment({e[0], e[1]}, {e[2], e[3]}), from, to);
            const Segment pnl = rescale_segment(Segment({e[4], e[5]}, {e[6], e[7]}), from, to);
            breast.mlos.push_back(MloViewData{v.name, pec, pnl, detect_bb(v.image, cfg.bb), to});
        } else {
            CcViewData cc{v.name, std::nullopt, v.image.bounds()};
            if (const auto bb = detect_bb(v.image, cfg.bb)) {
                try {
                    cc.pnl = cc_pnl(v.image.bounds(), *bb, infer_chest_wall(v.image));
                } catch (const ValidationError&) {
                    // marker on the chest-wall edge: length is unmeasurable
                }
            }
            breast.ccs.push_back(std::move(cc));
        }
    }

    AssessedSubject out;
    for (auto& [lat, views] : sides)
        out.decisions.push_back(decide_breast(views, spacing[lat], cfg.decision));
    out.report = build_report(study.subject, out.decisions, cfg.decision);
    out.text = render_report(out.report);
    return out;
}

}  // namespace mammopos
