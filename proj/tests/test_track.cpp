// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "toktrack/errors.hpp"
#include "toktrack/track.hpp"
#include "toktrack/train.hpp"

using namespace toktrack;

namespace {

ModelConfig tracker_cfg() {
    ModelConfig cfg;
    cfg.embed_dim = 16;
    cfg.encoder_layers = 1;
    cfg.heads = 2;
    cfg.patch_size = 8;
    cfg.template_side = 16;
    cfg.search_side = 32;
    cfg.vocab.size = 64;
    cfg.trajectory_len = 2;
    cfg.decoder_layers = 1;
    return cfg;
}

Sequence static_sequence(int length, std::uint64_t seed) {
    SyntheticConfig sc;
    sc.length = length;
    sc.max_speed = 0.0;
    sc.accel_sigma = 0.0;
    sc.drift_rate = 0.0;
    sc.noise_sigma = 0.0;
    sc.min_size = 12;
    sc.max_size = 16;
    return generate_sequence(sc, seed);
}

} // namespace

TEST_CASE("tracker init validates the first box") {
    ModelParams params = ModelParams::init(tracker_cfg(), 1);
    Image frame(64, 64);
    CHECK_THROWS_AS(Tracker(params, frame, Box{10, 10, 10, 20}), InputError);
    CHECK_THROWS_AS(Tracker(params, frame, Box{100, 100, 120, 120}), InputError);
    Tracker ok(params, frame, Box{10, 10, 20, 20});
    CHECK(ok.frames_processed() == 0);
}

TEST_CASE("run_tracker on a 1-frame video returns the given box") {
    ModelParams params = ModelParams::init(tracker_cfg(), 2);
    std::vector<Image> video{Image(64, 64)};
    const Box box0{5, 6, 15, 18};
    TrackResult res = run_tracker(params, video, box0);
    REQUIRE(res.frames.size() == 1);
    CHECK(res.frames[0].box.x_min == box0.x_min);
    CHECK(res.frames[0].box.y_max == box0.y_max);
    CHECK(res.frames[0].predicted_iou == 1.0);
    CHECK(res.mean_ms_per_frame == 0.0);
    CHECK_THROWS_AS(run_tracker(params, {}, box0), InputError);
}

TEST_CASE("tracking performs exactly one encoder forward per frame") {
    ModelParams params = ModelParams::init(tracker_cfg(), 3);
    Sequence seq = static_sequence(6, 11);
    reset_encoder_forward_count();
    TrackResult res = run_tracker(params, seq.frames, seq.boxes[0]);
    CHECK(encoder_forward_count() == 5); // frames after init
    REQUIRE(res.frames.size() == 6);
}

TEST_CASE("tracker outputs stay canonical, finite, and inside the image") {
    ModelParams params = ModelParams::init(tracker_cfg(), 5);
    SyntheticConfig sc;
    sc.length = 8;
    Sequence seq = generate_sequence(sc, 23);
    TrackResult res = run_tracker(params, seq.frames, seq.boxes[0]);
    for (const TrackedFrame& f : res.frames) {
        CHECK(f.box.is_canonical());
        CHECK(std::isfinite(f.box.x_min));
        CHECK(std::isfinite(f.box.y_max));
        CHECK(f.box.x_min >= 0.0);
        CHECK(f.box.y_min >= 0.0);
        CHECK(f.box.x_max <= 64.0);
        CHECK(f.box.y_max <= 64.0);
        CHECK(f.predicted_iou >= 0.0);
        CHECK(f.predicted_iou <= 1.0);
    }
    CHECK(res.mean_ms_per_frame > 0.0);
}

TEST_CASE("tracking is deterministic for a fixed snapshot and video") {
    ModelParams params = ModelParams::init(tracker_cfg(), 7);
    Sequence seq = static_sequence(5, 31);
    TrackResult a = run_tracker(params, seq.frames, seq.boxes[0]);
    TrackResult b = run_tracker(params, seq.frames, seq.boxes[0]);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
        CHECK(a.frames[i].box.x_min == b.frames[i].box.x_min);
        CHECK(a.frames[i].box.y_max == b.frames[i].box.y_max);
        CHECK(a.frames[i].predicted_iou == b.frames[i].predicted_iou);
    }
}

TEST_CASE("an overfit model re-tracks its static training target accurately") {
    ModelConfig mc = tracker_cfg();
    ModelParams params = ModelParams::init(mc, 9);
    Sequence seq = static_sequence(8, 41);
    TrainConfig tc;
    tc.clip_len = 4;
    tc.steps = 600;
    tc.seed = 2;
    tc.warmup_steps = 20;
    tc.reverse_prob = 0.5;
    tc.lr_other = 3e-3;
    tc.lr_backbone = 3e-4;
    train_loop({seq}, params, tc, nullptr);
    TrackResult res = run_tracker(params, seq.frames, seq.boxes[0]);
    double worst = 1.0;
    for (std::size_t i = 1; i < res.frames.size(); ++i)
        worst = std::min(worst, iou(res.frames[i].box, seq.boxes[i]));
    CHECK(worst > 0.6);
    double mean = 0.0;
    for (std::size_t i = 1; i < res.frames.size(); ++i) mean += iou(res.frames[i].box, seq.boxes[i]);
    mean /= static_cast<double>(res.frames.size() - 1);
    CHECK(mean > 0.7);
}

TEST_CASE("track result file round trip and damage handling") {
    TrackResult res;
    res.frames.push_back({Box{0.125, 0.25, 10.5, 20.75}, 1.0});
    res.frames.push_back({Box{1.0 / 3.0, 2.0 / 7.0, 11.1, 21.9}, 0.8125});
    res.mean_ms_per_frame = 3.14159;
    const std::string path = "track_result_roundtrip.txt";
    save_track_result(res, path);
    TrackResult back = load_track_result(path);
    REQUIRE(back.frames.size() == 2);
    CHECK(back.frames[1].box.x_min == res.frames[1].box.x_min);
    CHECK(back.frames[1].box.y_min == res.frames[1].box.y_min);
    CHECK(back.frames[1].predicted_iou == res.frames[1].predicted_iou);
    CHECK(back.mean_ms_per_frame == res.mean_ms_per_frame);
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("1,2,3,4,0.5\n", f); // no footer
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_track_result(path), FormatError);
    {
        std::FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("not,a,box\n# mean_ms_per_frame=1\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_track_result(path), FormatError);
    CHECK_THROWS_AS(load_track_result("missing_result.txt"), InputError);
    std::remove(path.c_str());
}

TEST_CASE("rollout capture separates occluded and visible reconstruction targets") {
    SyntheticConfig sc;
    sc.length = 6;
    sc.occluder_start = 2;
    sc.occluder_duration = 2;
    sc.occluder_coverage = 1.0;
    sc.max_speed = 0.5;
    Sequence seq = generate_sequence(sc, 77);
    REQUIRE(seq.visibility[2] == 0.0);
    REQUIRE(seq.visibility[3] == 0.0);
    ModelConfig mc = tracker_cfg();
    ModelParams params = ModelParams::init(mc, 13);
    params.set_requires_grad(true);
    Clip clip;
    for (int i = 0; i < 6; ++i) {
        clip.frames.push_back(seq.frames[i]);
        clip.boxes.push_back(seq.boxes[i]);
        clip.visibility.push_back(seq.visibility[i]);
    }
    TrainConfig tc;
    tc.clip_len = 6;
    AdamState opt;
    Rng rng(3);
    RolloutCapture cap;
    StepReport rep = rollout_train_step(clip, params, tc, opt, rng, 1.0, &cap);
    REQUIRE(cap.targets.size() == 5);
    for (int t = 0; t < 5; ++t) {
        const bool visible = clip.visibility[t + 1] >= 0.5;
        CHECK(cap.used_search_target[t] == visible);
        if (!visible) {
            // Occluded: target is bit-equal to the previous appearance state.
            REQUIRE(cap.targets[t].shape == cap.prev_appearance[t].shape);
            for (std::size_t i = 0; i < cap.targets[t].data->size(); ++i)
                CHECK((*cap.targets[t].data)[i] == (*cap.prev_appearance[t].data)[i]);
        } else {
            // Visible: target is bit-equal to the cropped search feature.
            Tensor expect = reconstruction_target_feature(cap.search_features[t], cap.gt_search[t], mc);
            REQUIRE(cap.targets[t].shape == expect.shape);
            for (std::size_t i = 0; i < expect.data->size(); ++i)
                CHECK((*cap.targets[t].data)[i] == (*expect.data)[i]);
        }
    }
    CHECK_FALSE(rep.aborted);
}
