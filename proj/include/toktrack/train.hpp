// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "toktrack/data.hpp"
#include "toktrack/loss.hpp"
#include "toktrack/model.hpp"
#include "toktrack/rng.hpp"

namespace toktrack {

enum class IntervalMode { NONE, FIXED, RANDOM };

std::string interval_mode_text(IntervalMode mode, int interval);
// Accepts "NONE", "FIXED(k)", "RANDOM(max)".
void parse_interval_mode(const std::string& text, IntervalMode* mode, int* interval);

struct TrainConfig {
    int clip_len = 8;       // T, frames per rollout
    double reverse_prob = 0.5;
    IntervalMode interval_mode = IntervalMode::NONE;
    int interval = 1;       // FIXED stride, or RANDOM stride upper bound
    double lr_backbone = 1e-4;
    double lr_other = 1e-3;
    double weight_decay = 5e-2;
    int steps = 500;
    std::uint64_t seed = 0;
    double grad_clip = 1.0; // global norm; 0 disables
    bool detach_prompts = true;
    int warmup_steps = 100;
    // Ablation: propagate ground-truth boxes instead of predictions.
    bool teacher_forcing = false;
    LossWeights weights;

    void validate() const;
};

// A training window: frames with boxes (image coordinates) and visibility.
struct Clip {
    std::vector<Image> frames;
    std::vector<Box> boxes;
    std::vector<double> visibility;
    int size() const { return static_cast<int>(frames.size()); }
};

// Whole-clip time reversal (frames, boxes, visibility). An involution:
// reverse_clip(reverse_clip(c)) == c.
Clip reverse_clip(const Clip& clip);

// Contiguous (or strided) window of cfg.clip_len frames from a random
// sequence, whole-clip reversed with probability reverse_prob.
Clip sample_clip(const std::vector<Sequence>& dataset, const TrainConfig& cfg, Rng& rng);

// floor(ratio * k) distinct indices in [0, k).
std::vector<int> mask_selection(int k, double ratio, Rng& rng);

// AdamW moment buffers, keyed by parameter name.
struct AdamState {
    std::map<std::string, std::vector<double>> m_buf;
    std::map<std::string, std::vector<double>> v_buf;
    std::int64_t step_count = 0;
};

// Global-norm gradient clip over every parameter gradient; returns the
// pre-clip norm.
double clip_gradients(ModelParams& params, double max_norm);

// One AdamW update from the gradients stored on the parameters, with the
// backbone/other learning-rate split. Returns false (and applies nothing)
// if any gradient is non-finite.
bool optimizer_step(ModelParams& params, AdamState& opt, const TrainConfig& cfg, double lr_scale);

// Warmup factor for a 0-based step index: (i+1)/warmup_steps capped at 1.
double warmup_scale(int step_index, int warmup_steps);

struct StepReport {
    double ce = 0.0, siou = 0.0, mse = 0.0, l1 = 0.0, total = 0.0; // frame means
    double grad_norm = 0.0;
    bool aborted = false; // non-finite loss: no update applied
    bool skipped = false; // non-finite gradients: update skipped
    std::vector<FrameLossReport> frames;
};

// Optional per-frame introspection of the reconstruction path (tests only).
// Tensors are plain copies of the values the rollout used.
struct RolloutCapture {
    std::vector<Tensor> targets;          // gating result fed to the MSE
    std::vector<Tensor> prev_appearance;  // Z^{t-1} at each frame
    std::vector<Tensor> search_features;  // encoder outputs at the search rows
    std::vector<Box> gt_search;           // ground truth in search coordinates
    std::vector<bool> used_search_target; // false = anchored to Z^{t-1}
    std::vector<int> mask_counts;         // masked appearance tokens per frame
};

// Full sequence-level step: frame-0 init, autoregressive rollout with loss
// accumulation over frames 1..T-1, backward on the frame mean, clip, AdamW.
StepReport rollout_train_step(const Clip& clip, ModelParams& params, const TrainConfig& cfg, AdamState& opt,
                              Rng& rng, double lr_scale, RolloutCapture* capture = nullptr);

struct TrainLogEntry {
    int step = 0;
    double ce = 0, siou = 0, mse = 0, l1 = 0, total = 0, lr = 0;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
    int aborted_steps = 0;
    int skipped_steps = 0;
};

// cfg.steps rollout steps over the dataset. Every step appends one
// tab-separated line "step ce siou mse l1 total lr" to log_stream if given.
TrainResult train_loop(const std::vector<Sequence>& dataset, ModelParams& params, const TrainConfig& cfg,
                       std::ostream* log_stream);

// Crop windows shared by training and tracking: a square of
// scale * max(width, height) around the box center.
SearchFrame scaled_window(const Box& box, double scale);

} // namespace toktrack
