// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "toktrack/errors.hpp"

namespace toktrack {

namespace {

// IoU per scored frame (index 1 onward), canonicalized defensively.
std::vector<double> scored_ious(const std::vector<Box>& preds, const std::vector<Box>& gts) {
    if (preds.size() != gts.size()) throw InputError("metrics: prediction/ground-truth length mismatch");
    if (preds.empty()) throw InputError("metrics: empty sequence");
    std::vector<double> out;
    for (std::size_t i = 1; i < preds.size(); ++i) out.push_back(iou(preds[i].canonical(), gts[i].canonical()));
    return out;
}

double rate_over(const std::vector<double>& ious, double tau) {
    if (ious.empty()) return 0.0;
    int hits = 0;
    for (double v : ious)
        if (v > tau) ++hits;
    return hits / static_cast<double>(ious.size());
}

double auc_over(const std::vector<double>& ious) {
    double sum = 0.0;
    for (int k = 0; k <= 20; ++k) sum += rate_over(ious, k * 0.05);
    return sum / 21.0;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

std::pair<double, double> precision_over(const std::vector<Box>& preds, const std::vector<Box>& gts) {
    if (preds.size() != gts.size()) throw InputError("metrics: prediction/ground-truth length mismatch");
    if (preds.size() < 2) return {0.0, 0.0};
    int hits = 0, norm_hits = 0;
    for (std::size_t i = 1; i < preds.size(); ++i) {
        const Box p = preds[i].canonical();
        const Box g = gts[i].canonical();
        const double err = center_distance(p, g);
        if (err <= 20.0) ++hits;
        const double diag = g.diagonal();
        const double norm_err = diag > 0.0 ? err / diag : (err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        if (norm_err <= 0.2) ++norm_hits;
    }
    const double n = static_cast<double>(preds.size() - 1);
    return {hits / n, norm_hits / n};
}

} // namespace

double average_overlap(const std::vector<Box>& preds, const std::vector<Box>& gts) {
    return mean_of(scored_ious(preds, gts));
}

double success_rate(const std::vector<Box>& preds, const std::vector<Box>& gts, double tau) {
    if (tau < 0.0 || tau > 1.0) throw InputError("success_rate: threshold outside [0,1]");
    return rate_over(scored_ious(preds, gts), tau);
}

double success_auc(const std::vector<Box>& preds, const std::vector<Box>& gts) {
    return auc_over(scored_ious(preds, gts));
}

std::pair<double, double> precision(const std::vector<Box>& preds, const std::vector<Box>& gts) {
    return precision_over(preds, gts);
}

EvalReport evaluate(const std::vector<EvalInput>& inputs) {
    if (inputs.empty()) throw InputError("evaluate: no sequences");
    EvalReport report;
    std::vector<double> pooled;
    std::vector<Box> pooled_preds{Box{}}, pooled_gts{Box{}}; // dummy frame 0 for the shared exclusion rule
    double ms_weighted = 0.0;
    for (const EvalInput& in : inputs) {
        std::vector<double> ious = scored_ious(in.preds, in.gts);
        SequenceScores s;
        s.name = in.name;
        s.scored_frames = static_cast<int>(ious.size());
        s.ao = mean_of(ious);
        s.sr50 = rate_over(ious, 0.5);
        s.sr75 = rate_over(ious, 0.75);
        s.auc = auc_over(ious);
        auto [p, pn] = precision_over(in.preds, in.gts);
        s.p = p;
        s.p_norm = pn;
        s.mean_ms_per_frame = in.mean_ms_per_frame;
        report.sequences.push_back(s);
        pooled.insert(pooled.end(), ious.begin(), ious.end());
        pooled_preds.insert(pooled_preds.end(), in.preds.begin() + 1, in.preds.end());
        pooled_gts.insert(pooled_gts.end(), in.gts.begin() + 1, in.gts.end());
        ms_weighted += in.mean_ms_per_frame * static_cast<double>(ious.size());
    }
    report.scored_frames = static_cast<int>(pooled.size());
    report.ao = mean_of(pooled);
    report.sr50 = rate_over(pooled, 0.5);
    report.sr75 = rate_over(pooled, 0.75);
    report.auc = auc_over(pooled);
    auto [p, pn] = precision_over(pooled_preds, pooled_gts);
    report.p = p;
    report.p_norm = pn;
    report.mean_ms_per_frame = report.scored_frames > 0 ? ms_weighted / report.scored_frames : 0.0;
    return report;
}

std::string format_report(const EvalReport& report) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %6s %7s %7s %7s %7s %7s %7s %10s\n", "sequence", "frames", "AO",
                  "SR0.5", "SR0.75", "AUC", "P", "P_norm", "ms/frame");
    out += line;
    auto row = [&](const std::string& name, int frames, double ao, double sr50, double sr75, double auc,
                   double p, double pn, double ms) {
        std::snprintf(line, sizeof(line), "%-20s %6d %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %10.3f\n", name.c_str(),
                      frames, ao, sr50, sr75, auc, p, pn, ms);
        out += line;
    };
    row("ALL", report.scored_frames, report.ao, report.sr50, report.sr75, report.auc, report.p, report.p_norm,
        report.mean_ms_per_frame);
    for (const SequenceScores& s : report.sequences)
        row(s.name, s.scored_frames, s.ao, s.sr50, s.sr75, s.auc, s.p, s.p_norm, s.mean_ms_per_frame);
    return out;
}

void write_metrics_tsv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write metrics file '" + path + "'");
    out << "name\tframes\tao\tsr50\tsr75\tauc\tp\tp_norm\tmean_ms_per_frame\n";
    char line[256];
    auto row = [&](const std::string& name, int frames, double ao, double sr50, double sr75, double auc,
                   double p, double pn, double ms) {
        std::snprintf(line, sizeof(line), "%s\t%d\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n",
                      name.c_str(), frames, ao, sr50, sr75, auc, p, pn, ms);
        out << line;
    };
    row("ALL", report.scored_frames, report.ao, report.sr50, report.sr75, report.auc, report.p, report.p_norm,
        report.mean_ms_per_frame);
    for (const SequenceScores& s : report.sequences)
        row(s.name, s.scored_frames, s.ao, s.sr50, s.sr75, s.auc, s.p, s.p_norm, s.mean_ms_per_frame);
    if (!out) throw InputError("write failed for metrics file '" + path + "'");
}

void write_curve_tsv(const std::vector<EvalInput>& inputs, const std::string& path) {
    std::vector<double> pooled;
    for (const EvalInput& in : inputs) {
        std::vector<double> ious = scored_ious(in.preds, in.gts);
        pooled.insert(pooled.end(), ious.begin(), ious.end());
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write curve file '" + path + "'");
    out << "threshold\tsuccess_rate\n";
    char line[64];
    for (int k = 0; k <= 20; ++k) {
        std::snprintf(line, sizeof(line), "%.2f\t%.10g\n", k * 0.05, rate_over(pooled, k * 0.05));
        out << line;
    }
    if (!out) throw InputError("write failed for curve file '" + path + "'");
}

} // namespace toktrack
