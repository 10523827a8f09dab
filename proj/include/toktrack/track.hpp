// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "toktrack/model.hpp"

namespace toktrack {

// Autoregressive single-object tracker over an immutable parameter snapshot.
// One instance is strictly sequential; run many instances for parallelism.
class Tracker {
public:
    // Initializes from the first frame: template crop around box0, appearance
    // tokens = template tokens, trajectory window = box0 repeated.
    Tracker(const ModelParams& params, const Image& frame0, const Box& box0);

    // One frame: crop the search window around the previous box, one encoder
    // forward, argmax decode, propagate caches. Returns the box clamped to
    // the image and the predicted IoU.
    std::pair<Box, double> track_frame(const Image& frame);

    int frames_processed() const { return frames_; }
    // Last predicted box before output clamping (what the caches hold).
    const Box& cached_box() const { return window_.back(); }

private:
    ModelParams params_; // tensors shared with the caller's snapshot
    Tensor template_tokens_;
    AppearanceState state_;
    std::vector<Box> window_;
    int frames_ = 0;
};

struct TrackedFrame {
    Box box;
    double predicted_iou = 0.0;
};

struct TrackResult {
    std::vector<TrackedFrame> frames; // frame 0 = (box0, 1.0)
    double mean_ms_per_frame = 0.0;
};

// init on frame 0, track_frame on the rest; wall-clock averaged per tracked
// frame.
TrackResult run_tracker(const ModelParams& params, const std::vector<Image>& video, const Box& box0);

// One line per frame "x_min,y_min,x_max,y_max,predicted_iou" and a footer
// "# mean_ms_per_frame=<float>".
void save_track_result(const TrackResult& result, const std::string& path);
TrackResult load_track_result(const std::string& path);

} // namespace toktrack
