// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "toktrack/errors.hpp"
#include "toktrack/eval.hpp"

using namespace toktrack;

namespace {

Box unit_box(double x, double y, double w, double h) { return Box{x, y, x + w, y + h}; }

// Box with the given IoU against the unit-square ground truth: a strip
// [0, 0, w, 1] inside the unit square intersects w and unions 1, so IoU = w.
Box box_with_iou(double target) { return unit_box(0.0, 0.0, target, 1.0); }

} // namespace

TEST_CASE("average overlap matches hand-computed values") {
    const Box gt = unit_box(0, 0, 1, 1);
    // Frame 0 excluded: only the second frame scores.
    std::vector<Box> preds{gt, box_with_iou(1.0 / 7.0)};
    std::vector<Box> gts{gt, gt};
    CHECK(average_overlap(preds, gts) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));

    // Three scored frames at IoU 1.0 and 1/7 averaged over both.
    std::vector<Box> p2{gt, gt, box_with_iou(1.0 / 7.0)};
    std::vector<Box> g2{gt, gt, gt};
    CHECK(average_overlap(p2, g2) == doctest::Approx((1.0 + 1.0 / 7.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("success rate uses a strict threshold") {
    const Box gt = unit_box(0, 0, 1, 1);
    std::vector<Box> preds{gt, box_with_iou(1.0), box_with_iou(0.6), box_with_iou(0.4)};
    std::vector<Box> gts{gt, gt, gt, gt};
    CHECK(success_rate(preds, gts, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    // IoU exactly at the threshold does not count.
    std::vector<Box> pe{gt, box_with_iou(0.5)};
    std::vector<Box> ge{gt, gt};
    CHECK(success_rate(pe, ge, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("success AUC on constant overlap counts thresholds below it") {
    const Box gt = unit_box(0, 0, 1, 1);
    std::vector<Box> preds{gt};
    std::vector<Box> gts{gt};
    for (int i = 0; i < 4; ++i) {
        preds.push_back(box_with_iou(0.6));
        gts.push_back(gt);
    }
    // Strict >: thresholds 0.00..0.55 pass (12 of 21 grid points).
    CHECK(success_auc(preds, gts) == doctest::Approx(12.0 / 21.0).epsilon(1e-9));
}

TEST_CASE("precision thresholds: strict success, inclusive distance") {
    const Box gt = unit_box(100, 100, 20, 20);
    // Center offset (3, 4) => distance 5; offset scaled to hit exactly 20.
    Box close = unit_box(103, 104, 20, 20);
    Box exact = unit_box(112, 116, 20, 20);
    std::vector<Box> preds{gt, close, exact};
    std::vector<Box> gts{gt, gt, gt};
    auto [p, pn] = precision(preds, gts);
    CHECK(p == doctest::Approx(1.0)); // 5 <= 20 and 20 <= 20 both count
    // Normalized: diag = sqrt(800) ~ 28.28; errors 5 and 20 => 0.177, 0.707.
    CHECK(pn == doctest::Approx(0.5));
}

TEST_CASE("normalized precision misses when the error exceeds the diagonal fraction") {
    Box g = unit_box(0, 0, 6, 8); // diagonal 10
    Box p = unit_box(3, 4, 6, 8); // center error 5 => normalized 0.5 > 0.2
    std::vector<Box> preds{g, p};
    std::vector<Box> gts{g, g};
    auto [pa, pn] = precision(preds, gts);
    CHECK(pa == doctest::Approx(1.0)); // 5 <= 20 pixels
    CHECK(pn == doctest::Approx(0.0));
}

TEST_CASE("AO approximates the success AUC limit on a fine grid") {
    // Random overlaps; AO should match mean success over 1001 thresholds
    // to within the coarse-grid gap bound.
    const Box gt = unit_box(0, 0, 1, 1);
    std::vector<Box> preds{gt};
    std::vector<Box> gts{gt};
    std::uint64_t s = 12345;
    auto next = [&s]() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        return static_cast<double>(s % 100000) / 100000.0;
    };
    for (int i = 0; i < 400; ++i) {
        preds.push_back(box_with_iou(next()));
        gts.push_back(gt);
    }
    const double ao = average_overlap(preds, gts);
    double fine = 0.0;
    for (int k = 0; k <= 1000; ++k)
        fine += success_rate(preds, gts, static_cast<double>(k) / 1000.0);
    fine /= 1001.0;
    CHECK(std::abs(ao - fine) < 5e-3);
}

TEST_CASE("success rate is monotone in the threshold") {
    const Box gt = unit_box(0, 0, 1, 1);
    std::vector<Box> preds{gt};
    std::vector<Box> gts{gt};
    for (int i = 0; i < 50; ++i) {
        preds.push_back(box_with_iou(0.02 * i));
        gts.push_back(gt);
    }
    double prev = 1.0;
    for (int k = 0; k <= 20; ++k) {
        double cur = success_rate(preds, gts, 0.05 * k);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("overlap metrics are scale invariant, pixel precision is not") {
    const Box gt = unit_box(10, 10, 20, 20);
    const Box pred = unit_box(12, 12, 20, 20);
    auto scale = [](const Box& b, double s) { return Box{b.x_min * s, b.y_min * s, b.x_max * s, b.y_max * s}; };
    std::vector<Box> p1{gt, pred}, g1{gt, gt};
    std::vector<Box> p2{scale(gt, 7), scale(pred, 7)}, g2{scale(gt, 7), scale(gt, 7)};
    CHECK(average_overlap(p1, g1) == doctest::Approx(average_overlap(p2, g2)).epsilon(1e-12));
    CHECK(success_auc(p1, g1) == doctest::Approx(success_auc(p2, g2)).epsilon(1e-12));
    auto [pa, na] = precision(p1, g1);
    auto [pb, nb] = precision(p2, g2);
    CHECK(na == doctest::Approx(nb).epsilon(1e-12)); // normalized stays put
    CHECK(pa == 1.0);                                // 2.83px <= 20
    CHECK(pb == 1.0);                                // 19.8px <= 20 still inside
}

TEST_CASE("evaluate pools frames across sequences and validates input") {
    const Box gt = unit_box(0, 0, 1, 1);
    EvalInput a;
    a.name = "a";
    a.preds = {gt, box_with_iou(1.0)};
    a.gts = {gt, gt};
    a.mean_ms_per_frame = 2.0;
    EvalInput b;
    b.name = "b";
    b.preds = {gt, box_with_iou(0.2), box_with_iou(0.2)};
    b.gts = {gt, gt, gt};
    b.mean_ms_per_frame = 5.0;
    EvalReport rep = evaluate({a, b});
    REQUIRE(rep.sequences.size() == 2);
    CHECK(rep.scored_frames == 3);
    CHECK(rep.ao == doctest::Approx((1.0 + 0.2 + 0.2) / 3.0).epsilon(1e-12));
    CHECK(rep.sr50 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // Frame weighting: (1 * 2.0 + 2 * 5.0) / 3.
    CHECK(rep.mean_ms_per_frame == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(rep.sequences[0].ao == doctest::Approx(1.0));
    CHECK(rep.sequences[1].ao == doctest::Approx(0.2).epsilon(1e-12));

    EvalInput bad;
    bad.name = "bad";
    bad.preds = {gt};
    bad.gts = {gt, gt};
    CHECK_THROWS_AS(evaluate({bad}), InputError);
    CHECK_THROWS_AS(evaluate({}), InputError);
}

TEST_CASE("report and tsv writers emit every sequence") {
    const Box gt = unit_box(0, 0, 1, 1);
    EvalInput a;
    a.name = "seq_one";
    a.preds = {gt, box_with_iou(0.9)};
    a.gts = {gt, gt};
    a.mean_ms_per_frame = 1.0;
    EvalReport rep = evaluate({a});
    std::string text = format_report(rep);
    CHECK(text.find("ALL") != std::string::npos);
    CHECK(text.find("seq_one") != std::string::npos);
    CHECK(text.find("AO") != std::string::npos);

    const std::string mpath = "eval_metrics.tsv";
    const std::string cpath = "eval_curve.tsv";
    write_metrics_tsv(rep, mpath);
    write_curve_tsv({a}, cpath);
    {
        std::ifstream in(mpath);
        std::string line;
        int rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 3); // header + ALL + seq_one
    }
    {
        std::ifstream in(cpath);
        std::string line;
        int rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 22); // header + 21 thresholds
    }
    std::remove(mpath.c_str());
    std::remove(cpath.c_str());
}

TEST_CASE("short sequences yield zero precision and no scored frames") {
    const Box gt = unit_box(0, 0, 1, 1);
    std::vector<Box> preds{gt};
    std::vector<Box> gts{gt};
    auto [p, pn] = precision(preds, gts);
    CHECK(p == 0.0);
    CHECK(pn == 0.0);
    CHECK(average_overlap(preds, gts) == 0.0);
}
