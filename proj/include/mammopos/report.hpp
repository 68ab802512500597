#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mammopos/common.hpp"
#include "mammopos/decision.hpp"

namespace mammopos {

// The report is a standalone value: everything the renderer prints lives
// here, copied from the decision layer, never recomputed.

struct MloRow {
    std::string name;
    double pnl_length = 0.0;
    std::optional<double> bb_distance;
    bool bb_ok = true;
};

struct CcRow {
    std::string name;
    double d_cc = 0.0;
};

struct BreastSection {
    Laterality laterality = Laterality::Left;
    std::vector<MloRow> mlo_rows;
    std::vector<CcRow> cc_rows;  // only views with a usable BB become rows
    std::optional<std::size_t> chosen_mlo;
    std::optional<std::size_t> chosen_cc;
    std::optional<double> d_diff;
    Verdict verdict = Verdict::Indeterminate;
    std::string diagnostic;
};

struct StudyReport {
    std::string subject;
    DecisionConfig config;
    std::vector<BreastSection> breasts;  // left first when both present
};

inline BreastSection build_section(const BreastDecision& d) {
    BreastSection s;
    s.laterality = d.laterality;
    for (std::size_t i = 0; i < d.mlo.size(); ++i)
        s.mlo_rows.push_back(
            {d.mlo_names[i], d.mlo_row_length[i], d.mlo[i].bb_distance, d.mlo[i].bb_ok});
    for (std::size_t i = 0; i < d.cc_length.size(); ++i) {
        if (!d.cc_length[i]) continue;  // a CC without a BB prints no row
        if (d.chosen_cc && *d.chosen_cc == i) s.chosen_cc = s.cc_rows.size();
        s.cc_rows.push_back({d.cc_names[i], *d.cc_length[i]});
    }
    s.chosen_mlo = d.chosen_mlo;
    s.d_diff = d.cc.d_diff;
    s.verdict = d.cc.verdict;
    s.diagnostic = d.cc.diagnostic;
    return s;
}

inline StudyReport build_report(const std::string& subject,
                                const std::vector<BreastDecision>& decisions,
                                const DecisionConfig& cfg) {
    if (decisions.empty()) throw ValidationError("study produced no breast decisions");
    StudyReport r;
    r.subject = subject;
    r.config = cfg;
    std::vector<BreastDecision> ordered = decisions;
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        return a.laterality < b.laterality;
    });
    for (const auto& d : ordered) r.breasts.push_back(build_section(d));
    return r;
}

inline std::string render_report(const StudyReport& r) {
    std::ostringstream out;
    out << "Report for Subject " << r.subject << "\n";
    out << "Thresholds and parameters\n";
    out << "Threshold for perpendicular distance from BB in pixels: "
        << format_double(r.config.bb_distance_threshold) << "\n";
    out << "Threshold for PNL length difference in " << to_string(r.config.unit_mode) << ": "
        << format_double(r.config.diff_threshold) << "\n";

    for (const auto& b : r.breasts) {
        out << (b.laterality == Laterality::Left ? "Left" : "Right") << " Breast\n";
        out << "-----\n";
        out << "MLO Lengths\n";
        out << "-----\n";
        out << "FILENAME | PNL length | Distance from BB\n";
        for (const auto& row : b.mlo_rows) {
            out << row.name << " " << format_double(row.pnl_length) << " "
                << (row.bb_distance ? format_double(*row.bb_distance) : "-") << "\n";
        }
        out << "CC Lengths.\n";
        out << "-----\n";
        for (const auto& row : b.cc_rows)
            out << row.name << " " << format_double(row.d_cc) << "\n";

        out << "<===== Decision =====>\n";
        if (b.chosen_mlo) {
            const auto& m = b.mlo_rows[*b.chosen_mlo];
            out << "MAX FILENAME (MLO) " << m.name << " " << format_double(m.pnl_length) << "\n";
            if (!m.bb_ok)
                out << "Warning: BB distance exceeds threshold on " << m.name << "\n";
        } else {
            out << "No correct MLO recorded\n";
        }
        if (b.chosen_cc) {
            const auto& c = b.cc_rows[*b.chosen_cc];
            out << "MAX FILENAME (CC) " << c.name << " " << format_double(c.d_cc) << "\n";
        } else {
            out << "No correct CC recorded\n";
        }
        if (b.chosen_mlo && b.chosen_cc) {
            out << "Decision based on the following file\n";
            out << "MLO " << b.mlo_rows[*b.chosen_mlo].name << "\n";
            out << "CC " << b.cc_rows[*b.chosen_cc].name << "\n";
            if (b.d_diff) {
                out << "Difference in MLO lengths is " << format_double(*b.d_diff) << "\n";
                out << "Decision: "
                    << (b.verdict == Verdict::Adequate ? "Correctly Positioned"
                                                       : "Incorrectly Positioned")
                    << "\n";
            } else {
                if (!b.diagnostic.empty()) out << "Note: " << b.diagnostic << "\n";
                out << "No conclusion can be made\n";
            }
        } else {
            out << "No conclusion can be made\n";
        }
        out << "=====\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Structured sidecar: JSON mirror of StudyReport, exact double round-trip
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json report_to_json(const StudyReport& r) {
    nlohmann::ordered_json j;
    j["subject"] = r.subject;
    j["config"] = {{"diff_threshold", r.config.diff_threshold},
                   {"unit_mode", r.config.unit_mode == UnitMode::Physical ? "physical" : "pixel"},
                   {"bb_distance_threshold", r.config.bb_distance_threshold}};
    auto breasts = nlohmann::ordered_json::array();
    for (const auto& b : r.breasts) {
        nlohmann::ordered_json jb;
        jb["laterality"] = to_string(b.laterality);
        auto mlo = nlohmann::ordered_json::array();
        for (const auto& row : b.mlo_rows) {
            nlohmann::ordered_json jr;
            jr["name"] = row.name;
            jr["pnl_length"] = row.pnl_length;
            if (row.bb_distance) jr["bb_distance"] = *row.bb_distance;
            jr["bb_ok"] = row.bb_ok;
            mlo.push_back(jr);
        }
        jb["mlo"] = mlo;
        auto cc = nlohmann::ordered_json::array();
        for (const auto& row : b.cc_rows) cc.push_back({{"name", row.name}, {"d_cc", row.d_cc}});
        jb["cc"] = cc;
        if (b.chosen_mlo) jb["chosen_mlo"] = *b.chosen_mlo;
        if (b.chosen_cc) jb["chosen_cc"] = *b.chosen_cc;
        if (b.d_diff) jb["d_diff"] = *b.d_diff;
        jb["verdict"] = to_string(b.verdict);
        if (!b.diagnostic.empty()) jb["diagnostic"] = b.diagnostic;
        breasts.push_back(jb);
    }
    j["breasts"] = breasts;
    return j;
}

inline StudyReport report_from_json(const nlohmann::json& j) {
    StudyReport r;
    try {
        r.subject = j.at("subject").get<std::string>();
        const auto& jc = j.at("config");
        r.config.diff_threshold = jc.at("diff_threshold").get<double>();
        const auto mode = parse_unit_mode(jc.at("unit_mode").get<std::string>());
        if (!mode) throw ValidationError("unknown unit_mode");
        r.config.unit_mode = *mode;
        r.config.bb_distance_threshold = jc.at("bb_distance_threshold").get<double>();
        for (const auto& jb : j.at("breasts")) {
            BreastSection b;
            const auto lat = parse_laterality(jb.at("laterality").get<std::string>());
            if (!lat) throw ValidationError("unknown laterality");
            b.laterality = *lat;
            for (const auto& jr : jb.at("mlo")) {
                MloRow row;
                row.name = jr.at("name").get<std::string>();
                row.pnl_length = jr.at("pnl_length").get<double>();
                if (jr.contains("bb_distance")) row.bb_distance = jr["bb_distance"].get<double>();
                row.bb_ok = jr.at("bb_ok").get<bool>();
                b.mlo_rows.push_back(row);
            }
            for (const auto& jr : jb.at("cc"))
                b.cc_rows.push_back(
                    {jr.at("name").get<std::string>(), jr.at("d_cc").get<double>()});
            if (jb.contains("chosen_mlo")) b.chosen_mlo = jb["chosen_mlo"].get<std::size_t>();
            if (jb.contains("chosen_cc")) b.chosen_cc = jb["chosen_cc"].get<std::size_t>();
            if (jb.contains("d_diff")) b.d_diff = jb["d_diff"].get<double>();
            const auto v = parse_verdict(jb.at("verdict").get<std::string>());
            if (!v) throw ValidationError("unknown verdict");
            b.verdict = *v;
            if (jb.contains("diagnostic")) b.diagnostic = jb["diagnostic"].get<std::string>();
            if (b.chosen_mlo && *b.chosen_mlo >= b.mlo_rows.size())
                throw ValidationError("chosen_mlo out of range");
            if (b.chosen_cc && *b.chosen_cc >= b.cc_rows.size())
                throw ValidationError("chosen_cc out of range");
            r.breasts.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Kind::Malformed,
                          std::string("bad report document: ") + e.what());
    }
    return r;
}

inline void save_report_json(const std::filesystem::path& path, const StudyReport& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << report_to_json(r).dump(2) << "\n";
}

inline StudyReport load_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(FormatError::Kind::Malformed,
                          "malformed report " + path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

}  // namespace mammopos
