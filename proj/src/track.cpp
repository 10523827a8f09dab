// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/track.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "toktrack/errors.hpp"
#include "toktrack/loss.hpp"
#include "toktrack/train.hpp"

namespace toktrack {

Tracker::Tracker(const ModelParams& params, const Image& frame0, const Box& box0) : params_(params) {
    params_.cfg.validate();
    if (!(box0.width() > 0.0) || !(box0.height() > 0.0))
        throw InputError("tracker init: box must have positive area");
    const Box inside = box0.clamped(frame0.width, frame0.height);
    if (!(inside.width() > 0.0) || !(inside.height() > 0.0))
        throw InputError("tracker init: box lies outside the frame");
    const ModelConfig& mc = params_.cfg;
    Image tmpl_crop = crop_resample(frame0, scaled_window(box0, mc.template_scale_factor), mc.template_side,
                                    frame0.mean_pixel());
    template_tokens_ = patchify_embed(tmpl_crop, params_, "pos_template");
    if (mc.use_appearance) state_.appearance = template_tokens_;
    state_.confidence_embed = params_.t("conf_embed");
    window_.assign(static_cast<std::size_t>(mc.trajectory_len), box0);
}

std::pair<Box, double> Tracker::track_frame(const Image& frame) {
    const ModelConfig& mc = params_.cfg;
    const SearchFrame sf = scaled_window(window_.back(), mc.search_scale_factor);
    Image crop = crop_resample(frame, sf, mc.search_side, frame.mean_pixel());
    Tensor st = patchify_embed(crop, params_, "pos_search");
    std::vector<TokenizedBox> traj;
    if (mc.use_trajectory)
        for (const Box& b : window_) traj.push_back(tokenize_box(to_search_frame(b, sf), mc.vocab));
    FrameOutputs out = run_frame(params_, template_tokens_, st, state_, traj);
    const Box pred_img = from_search_frame(detokenize_box(argmax_box(out.logits), mc.vocab), sf);

    window_.erase(window_.begin());
    window_.push_back(pred_img); // caches keep the unclamped box
    if (mc.use_appearance) {
        if (mc.propagate_encoder_appearance) {
            state_.appearance = out.appearance_out;
        } else {
            // No masking at inference.
            ReconstructionResult recon = reconstruct_appearance(out.appearance_out, {}, params_);
            state_.appearance =
                mc.reconstruction_target == ReconTarget::FEATURE ? recon.projected : recon.hidden;
        }
    }
    state_.confidence_embed = out.confidence_out;
    const double predicted_iou = out.predicted_iou.value();
    state_.last_predicted_iou = predicted_iou;
    ++frames_;
    return {pred_img.clamped(frame.width, frame.height), predicted_iou};
}

TrackResult run_tracker(const ModelParams& params, const std::vector<Image>& video, const Box& box0) {
    if (video.empty()) throw InputError("run_tracker: empty video");
    TrackResult result;
    result.frames.push_back({box0, 1.0});
    Tracker tracker(params, video[0], box0);
    double total_ms = 0.0;
    for (std::size_t t = 1; t < video.size(); ++t) {
        const auto start = std::chrono::steady_clock::now();
        auto [box, iou_pred] = tracker.track_frame(video[t]);
        const auto stop = std::chrono::steady_clock::now();
        total_ms += std::chrono::duration<double, std::milli>(stop - start).count();
        result.frames.push_back({box, iou_pred});
    }
    result.mean_ms_per_frame = video.size() > 1 ? total_ms / static_cast<double>(video.size() - 1) : 0.0;
    return result;
}

void save_track_result(const TrackResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write track result '" + path + "'");
    char line[192];
    for (const TrackedFrame& f : result.frames) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n", f.box.x_min, f.box.y_min,
                      f.box.x_max, f.box.y_max, f.predicted_iou);
        out << line;
    }
    std::snprintf(line, sizeof(line), "# mean_ms_per_frame=%.17g\n", result.mean_ms_per_frame);
    out << line;
    if (!out) throw InputError("write failed for track result '" + path + "'");
}

TrackResult load_track_result(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open track result '" + path + "'");
    TrackResult result;
    std::string line;
    bool saw_footer = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# mean_ms_per_frame=";
            if (line.rfind(key, 0) == 0) {
                result.mean_ms_per_frame = std::stod(line.substr(key.size()));
                saw_footer = true;
            }
            continue;
        }
        TrackedFrame f;
        if (std::sscanf(line.c_str(), "%lf ,%lf ,%lf ,%lf ,%lf", &f.box.x_min, &f.box.y_min, &f.box.x_max,
                        &f.box.y_max, &f.predicted_iou) != 5)
            throw FormatError("'" + path + "': bad result line '" + line + "'");
        result.frames.push_back(f);
    }
    if (!saw_footer) throw FormatError("'" + path + "': missing mean_ms_per_frame footer");
    return result;
}

} // namespace toktrack
