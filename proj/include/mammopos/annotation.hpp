#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mammopos/common.hpp"
#include "mammopos/geometry.hpp"

namespace mammopos {

/// Axis-aligned box given by two diagonal corners, as annotated.
struct TagBox {
    Point corner0;
    Point corner1;

    friend bool operator==(const TagBox& a, const TagBox& b) {
        return a.corner0 == b.corner0 && a.corner1 == b.corner1;
    }
};

/// One view's annotation set. pnl.p0 is the nipple endpoint by convention;
/// CC views never carry a pec segment.
struct ViewAnnotation {
    ViewKind view = ViewKind::Mlo;
    Laterality laterality = Laterality::Left;
    std::optional<Segment> pec;
    std::optional<Segment> pnl;
    std::optional<TagBox> tag_box;
    Bounds image_dims{0, 0};
    int ignored_shapes = 0;  // unknown labels skipped during parse

    friend bool operator==(const ViewAnnotation& a, const ViewAnnotation& b) {
        return a.view == b.view && a.laterality == b.laterality && a.pec == b.pec &&
               a.pnl == b.pnl && a.tag_box == b.tag_box &&
               a.image_dims.width == b.image_dims.width &&
               a.image_dims.height == b.image_dims.height;
    }
};

namespace detail {

inline Point parse_shape_point(const nlohmann::json& arr, const std::string& label) {
    if (!arr.is_array() || arr.size() != 2 || !arr[0].is_number() || !arr[1].is_number())
        throw ValidationError("shape '" + label + "' has a malformed point");
    return Point{arr[0].get<double>(), arr[1].get<double>()};
}

inline void check_point_in_dims(const Point& p, const Bounds& dims, const std::string& label) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > dims.width - 1 || p.y > dims.height - 1)
        throw ValidationError("shape '" + label + "' has a point outside the image: (" +
                              format_double(p.x) + ", " + format_double(p.y) + ")");
}

// Filename tokens like "RMLO"/"LCC" identify view and laterality when the
// document carries no explicit flags.
inline void infer_from_path_tokens(const std::string& image_path,
                                   std::optional<ViewKind>& view,
                                   std::optional<Laterality>& lat) {
    std::string token;
    auto flush = [&] {
        if (token == "LMLO" || token == "RMLO" || token == "LCC" || token == "RCC") {
            if (!lat) lat = token[0] == 'L' ? Laterality::Left : Laterality::Right;
            if (!view) view = token.ends_with("MLO") ? ViewKind::Mlo : ViewKind::Cc;
        }
        token.clear();
    };
    for (char c : image_path) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            token.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
}

}  // namespace detail

inline ViewAnnotation parse_annotation(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ValidationError("annotation document is not an object");
    if (!doc.contains("imageWidth") || !doc.contains("imageHeight"))
        throw ValidationError("annotation document missing imageWidth/imageHeight");

    ViewAnnotation ann;
    ann.image_dims = Bounds{doc["imageWidth"].get<int>(), doc["imageHeight"].get<int>()};
    if (ann.image_dims.width < 1 || ann.image_dims.height < 1)
        throw ValidationError("annotation image dimensions must be positive");

    std::optional<ViewKind> view;
    std::optional<Laterality> lat;
    if (doc.contains("flags") && doc["flags"].is_object()) {
        for (const auto& [key, value] : doc["flags"].items()) {
            if (!value.is_boolean() || !value.get<bool>()) continue;
            if (auto v = parse_view(key)) view = v;
            if (auto l = parse_laterality(key)) lat = l;
        }
    }
    if (doc.contains("imagePath") && doc["imagePath"].is_string())
        detail::infer_from_path_tokens(doc["imagePath"].get<std::string>(), view, lat);
    if (!view) throw ValidationError("annotation does not identify its view (MLO|CC)");
    if (!lat) throw ValidationError("annotation does not identify its laterality (L|R)");
    ann.view = *view;
    ann.laterality = *lat;

    if (doc.contains("shapes")) {
        if (!doc["shapes"].is_array()) throw ValidationError("'shapes' is not an array");
        for (const auto& shape : doc["shapes"]) {
            const std::string label = shape.value("label", std::string{});
            const std::string type = shape.value("shape_type", std::string{});
            const auto& pts = shape.contains("points") ? shape["points"] : nlohmann::json::array();
            if (label == "pec" || label == "pnl") {
                if (type != "line" || pts.size() != 2)
                    throw ValidationError("shape '" + label + "' must be a line with 2 points");
                const Point p0 = detail::parse_shape_point(pts[0], label);
                const Point p1 = detail::parse_shape_point(pts[1], label);
                detail::check_point_in_dims(p0, ann.image_dims, label);
                detail::check_point_in_dims(p1, ann.image_dims, label);
                if (p0 == p1) throw ValidationError("shape '" + label + "' is degenerate");
                if (label == "pec") {
                    if (ann.pec) throw ValidationError("duplicate 'pec' shape");
                    ann.pec = Segment(p0, p1);
                } else {
                    if (ann.pnl) throw ValidationError("duplicate 'pnl' shape");
                    ann.pnl = Segment(p0, p1);
                }
            } else if (label == "tag") {
                if (type != "rectangle" || pts.size() != 2)
                    throw ValidationError("shape 'tag' must be a rectangle with 2 points");
                if (ann.tag_box) throw ValidationError("duplicate 'tag' shape");
                const Point c0 = detail::parse_shape_point(pts[0], label);
                const Point c1 = detail::parse_shape_point(pts[1], label);
                detail::check_point_in_dims(c0, ann.image_dims, label);
                detail::check_point_in_dims(c1, ann.image_dims, label);
                ann.tag_box = TagBox{c0, c1};
            } else {
                ++ann.ignored_shapes;
            }
        }
    }

    if (!ann.pnl) throw ValidationError("annotation is missing the 'pnl' line");
    if (ann.view == ViewKind::Mlo && !ann.pec)
        throw ValidationError("MLO annotation is missing the 'pec' line");
    if (ann.view == ViewKind::Cc && ann.pec)
        throw ValidationError("CC annotation must not carry a 'pec' line");
    return ann;
}

inline ViewAnnotation load_annotation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(FormatError::Kind::Malformed,
                          "malformed annotation " + path.string() + ": " + e.what());
    }
    try {
        return parse_annotation(doc);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

/// Deterministic serialization; round-trips through parse_annotation.
inline nlohmann::ordered_json serialize_annotation(const ViewAnnotation& ann) {
    nlohmann::ordered_json doc;
    doc["version"] = "5.2.1";
    doc["flags"] = nlohmann::ordered_json::object();
    doc["flags"][to_string(ann.view)] = true;
    doc["flags"][to_string(ann.laterality)] = true;
    auto shapes = nlohmann::ordered_json::array();
    auto push_line = [&](const char* label, const Segment& s) {
        nlohmann::ordered_json shape;
        shape["label"] = label;
        shape["points"] = {{s.p0().x, s.p0().y}, {s.p1().x, s.p1().y}};
        shape["shape_type"] = "line";
        shapes.push_back(shape);
    };
    if (ann.pec) push_line("pec", *ann.pec);
    if (ann.pnl) push_line("pnl", *ann.pnl);
    if (ann.tag_box) {
        nlohmann::ordered_json shape;
        shape["label"] = "tag";
        shape["points"] = {{ann.tag_box->corner0.x, ann.tag_box->corner0.y},
                           {ann.tag_box->corner1.x, ann.tag_box->corner1.y}};
        shape["shape_type"] = "rectangle";
        shapes.push_back(shape);
    }
    doc["shapes"] = shapes;
    doc["imageWidth"] = ann.image_dims.width;
    doc["imageHeight"] = ann.image_dims.height;
    return doc;
}

inline void save_annotation(const std::filesystem::path& path, const ViewAnnotation& ann) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << serialize_annotation(ann).dump(2) << "\n";
}

}  // namespace mammopos
