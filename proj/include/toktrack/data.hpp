// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toktrack/geometry.hpp"
#include "toktrack/image.hpp"

namespace toktrack {

// One video: frames, ground-truth boxes (pixels), per-frame visibility ratio.
struct Sequence {
    std::string name;
    std::vector<Image> frames;
    std::vector<Box> boxes;
    std::vector<double> visibility;

    int size() const { return static_cast<int>(frames.size()); }
    void validate() const;
};

enum class TargetKind { RECT, ELLIPSE };

std::string target_kind_name(TargetKind k);
TargetKind target_kind_from_name(const std::string& name);

struct SyntheticConfig {
    int canvas_h = 64;
    int canvas_w = 64;
    TargetKind kind = TargetKind::RECT;
    double min_size = 8.0;  // initial target side range, pixels
    double max_size = 16.0;
    double max_speed = 2.0;     // initial |velocity| per axis, px/frame
    double accel_sigma = 0.3;   // Gaussian acceleration per frame
    double drift_rate = 0.01;   // appearance (hue) and scale drift per frame
    int occluder_start = -1;    // frame index; <0 disables the occluder
    int occluder_duration = 0;
    double occluder_coverage = 1.0; // fraction of the target box covered
    bool allow_out_of_view = false; // if true the target may leave the canvas
    int distractors = 0;
    double noise_sigma = 0.02;
    int length = 32;
    std::uint64_t seed = 0; // default stream; generate_sequence's argument wins

    void validate() const;
};

// Deterministic given (cfg, seed). Boxes are analytic bounds of the rendered
// target (union of the motion-blur substeps), snapped to 1/256 px so the
// x,y,w,h text form round-trips exactly. Visibility is the fraction of the
// box area that is inside the canvas and not under the occluder.
Sequence generate_sequence(const SyntheticConfig& cfg, std::uint64_t seed);

// Directory layout: frames/%06d.ppm, groundtruth.txt ("x,y,w,h" per line),
// visibility.txt (one float per line; missing file means all 1.0), meta.txt.
Sequence load_sequence(const std::string& dir);
void save_sequence(const Sequence& seq, const std::string& dir);

// Sequence names under a dataset root, sorted; each is a subdirectory with a
// groundtruth.txt.
std::vector<std::string> list_sequences(const std::string& root);

} // namespace toktrack
