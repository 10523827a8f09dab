// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "toktrack/geometry.hpp"

namespace toktrack {

// Frame 0 is the initialization frame and is excluded from every metric.
// Success uses strict ">" at the threshold; precision uses inclusive "<=".

double average_overlap(const std::vector<Box>& preds, const std::vector<Box>& gts);
double success_rate(const std::vector<Box>& preds, const std::vector<Box>& gts, double tau);
// Mean of success_rate over thresholds {0.00, 0.05, ..., 1.00}.
double success_auc(const std::vector<Box>& preds, const std::vector<Box>& gts);
// (P at center error <= 20 px, P_norm at error/gt-diagonal <= 0.2).
std::pair<double, double> precision(const std::vector<Box>& preds, const std::vector<Box>& gts);

struct EvalInput {
    std::string name;
    std::vector<Box> preds;
    std::vector<Box> gts;
    double mean_ms_per_frame = 0.0;
};

struct SequenceScores {
    std::string name;
    int scored_frames = 0;
    double ao = 0, sr50 = 0, sr75 = 0, auc = 0, p = 0, p_norm = 0;
    double mean_ms_per_frame = 0.0;
};

struct EvalReport {
    // Pooled over every scored frame of every sequence.
    double ao = 0, sr50 = 0, sr75 = 0, auc = 0, p = 0, p_norm = 0;
    double mean_ms_per_frame = 0.0; // frame-weighted
    int scored_frames = 0;
    std::vector<SequenceScores> sequences;
};

EvalReport evaluate(const std::vector<EvalInput>& inputs);

// Aligned-column text table: overall row plus one row per sequence.
std::string format_report(const EvalReport& report);
// Machine-readable table, one row per sequence plus an ALL row.
void write_metrics_tsv(const EvalReport& report, const std::string& path);
// 21 pooled (threshold, success-rate) points.
void write_curve_tsv(const std::vector<EvalInput>& inputs, const std::string& path);

} // namespace toktrack
