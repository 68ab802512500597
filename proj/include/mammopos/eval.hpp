#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mammopos/common.hpp"
#include "mammopos/decision.hpp"
#include "mammopos/model.hpp"

namespace mammopos {

struct ConfusionMatrix {
    long tp = 0, fn = 0, fp = 0, tn = 0;
    long indeterminate = 0;  // pairs excluded from the counts

    double tpr() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
    double tnr() const { return tn + fp == 0 ? 0.0 : double(tn) / double(tn + fp); }
    long total() const { return tp + fn + fp + tn; }
};

/// Adequate is the positive class. Pairs where either side is Indeterminate
/// are excluded from the counts and tallied separately.
inline ConfusionMatrix confusion(const std::vector<Verdict>& decisions,
                                 const std::vector<Verdict>& labels) {
    if (decisions.size() != labels.size())
        throw ContractError("confusion: mismatched lengths");
    ConfusionMatrix m;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (decisions[i] == Verdict::Indeterminate || labels[i] == Verdict::Indeterminate) {
            ++m.indeterminate;
            continue;
        }
        const bool pred_pos = decisions[i] == Verdict::Adequate;
        const bool label_pos = labels[i] == Verdict::Adequate;
        if (label_pos)
            ++(pred_pos ? m.tp : m.fn);
        else
            ++(pred_pos ? m.fp : m.tn);
    }
    return m;
}

inline double detection_rate(long detected, long total) {
    if (total <= 0) throw ContractError("detection_rate: total must be > 0");
    if (detected < 0 || detected > total)
        throw ContractError("detection_rate: detected must be in [0,total]");
    return double(detected) / double(total);
}

// ---------------------------------------------------------------------------
// Endpoint error distributions
// ---------------------------------------------------------------------------

/// errors[e][i]: Euclidean error of endpoint e (pec.p0, pec.p1, pnl.p0,
/// pnl.p1) on case i.
inline std::array<std::vector<double>, 4> endpoint_errors(
    const std::vector<EndpointVector>& preds, const std::vector<EndpointVector>& truths) {
    if (preds.size() != truths.size()) throw ContractError("endpoint_errors: mismatched lengths");
    std::array<std::vector<double>, 4> errors;
    for (auto& v : errors) v.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        for (int e = 0; e < 4; ++e)
            errors[e].push_back(std::hypot(preds[i][2 * e] - truths[i][2 * e],
                                           preds[i][2 * e + 1] - truths[i][2 * e + 1]));
    return errors;
}

struct ErrorSummary {
    double mean = 0.0, median = 0.0, p90 = 0.0, p95 = 0.0, max = 0.0;
};

inline ErrorSummary summarize(std::vector<double> errors) {
    if (errors.empty()) throw ContractError("summarize: empty error list");
    ErrorSummary s;
    for (double e : errors) s.mean += e;
    s.mean /= errors.size();
    std::sort(errors.begin(), errors.end());
    auto pct = [&](double q) {
        const double pos = q * (errors.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, errors.size() - 1);
        return errors[lo] + (pos - lo) * (errors[hi] - errors[lo]);
    };
    s.median = pct(0.5);
    s.p90 = pct(0.9);
    s.p95 = pct(0.95);
    s.max = errors.back();
    return s;
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

inline void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "tp,fn,fp,tn,indeterminate,tpr_percent,tnr_percent\n";
    out << m.tp << "," << m.fn << "," << m.fp << "," << m.tn << "," << m.indeterminate << ","
        << format_percent(m.tpr()) << "," << format_percent(m.tnr()) << "\n";
}

inline void write_errors_csv(const std::filesystem::path& path,
                             const std::array<std::vector<double>, 4>& errors) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    static constexpr const char* names[4] = {"pec_p0", "pec_p1", "pnl_p0", "pnl_p1"};
    out << "endpoint,case_index,error_px\n";
    for (int e = 0; e < 4; ++e)
        for (std::size_t i = 0; i < errors[e].size(); ++i)
            out << names[e] << "," << i << "," << format_double(errors[e][i]) << "\n";
}

inline void write_error_summary_csv(const std::filesystem::path& path,
                                    const std::array<std::vector<double>, 4>& errors) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    static constexpr const char* names[4] = {"pec_p0", "pec_p1", "pnl_p0", "pnl_p1"};
    out << "endpoint,mean,median,p90,p95,max\n";
    std::vector<double> all;
    for (int e = 0; e < 4; ++e) {
        const auto s = summarize(errors[e]);
        out << names[e] << "," << format_double(s.mean) << "," << format_double(s.median) << ","
            << format_double(s.p90) << "," << format_double(s.p95) << "," << format_double(s.max)
            << "\n";
        all.insert(all.end(), errors[e].begin(), errors[e].end());
    }
    const auto s = summarize(all);
    out << "all," << format_double(s.mean) << "," << format_double(s.median) << ","
        << format_double(s.p90) << "," << format_double(s.p95) << "," << format_double(s.max)
        << "\n";
}

}  // namespace mammopos
