// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "toktrack/errors.hpp"
#include "toktrack/geometry.hpp"
#include "toktrack/rng.hpp"

using namespace toktrack;

namespace {

// Counts unit grid cells covered by both / either box. Exact for integer
// corners, so it is an independent oracle for the analytic IoU.
double raster_iou(const Box& a, const Box& b, int grid) {
    long inter = 0, uni = 0;
    for (int y = 0; y < grid; ++y) {
        for (int x = 0; x < grid; ++x) {
            const double cx = x + 0.5, cy = y + 0.5;
            const bool in_a = cx > a.x_min && cx < a.x_max && cy > a.y_min && cy < a.y_max;
            const bool in_b = cx > b.x_min && cx < b.x_max && cy > b.y_min && cy < b.y_max;
            inter += (in_a && in_b) ? 1 : 0;
            uni += (in_a || in_b) ? 1 : 0;
        }
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Box random_int_box(Rng& rng, int grid) {
    int x1 = rng.range_int(0, grid - 1), x2 = rng.range_int(0, grid);
    int y1 = rng.range_int(0, grid - 1), y2 = rng.range_int(0, grid);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    if (x1 == x2) ++x2;
    if (y1 == y2) ++y2;
    return Box{double(x1), double(y1), double(x2), double(y2)};
}

// Independent scalar transcription of the published SIoU formula, using the
// arcsin form of the angle cost. Kept separate from the library so the two
// derivations can disagree.
double siou_reference(const Box& p0, const Box& gt) {
    const Box p = p0.canonical();
    const double eps = 1e-9;
    const double iw = std::max(0.0, std::min(p.x_max, gt.x_max) - std::max(p.x_min, gt.x_min));
    const double ih = std::max(0.0, std::min(p.y_max, gt.y_max) - std::max(p.y_min, gt.y_min));
    const double inter = iw * ih;
    const double uni = p.area() + gt.area() - inter;
    const double iou_v = inter / std::max(uni, eps);

    const double s_cw = gt.center_x() - p.center_x();
    const double s_ch = gt.center_y() - p.center_y();
    const double sigma = std::sqrt(s_cw * s_cw + s_ch * s_ch);
    double lambda = 0.0;
    if (sigma * sigma > eps) {
        const double x = std::min(1.0, std::fabs(s_ch) / sigma);
        const double s = std::sin(std::asin(x) - M_PI / 4.0);
        lambda = 1.0 - 2.0 * s * s;
    } else {
        lambda = 2.0 * std::fabs(s_cw) * std::fabs(s_ch) / eps;
    }

    const double enc_w = std::max(std::max(p.x_max, gt.x_max) - std::min(p.x_min, gt.x_min), eps);
    const double enc_h = std::max(std::max(p.y_max, gt.y_max) - std::min(p.y_min, gt.y_min), eps);
    const double rho_x = (s_cw / enc_w) * (s_cw / enc_w);
    const double rho_y = (s_ch / enc_h) * (s_ch / enc_h);
    const double gamma = 2.0 - lambda;
    const double delta = (1.0 - std::exp(-gamma * rho_x)) + (1.0 - std::exp(-gamma * rho_y));

    const double omega_w = std::fabs(p.width() - gt.width()) / std::max(std::max(p.width(), gt.width()), eps);
    const double omega_h = std::fabs(p.height() - gt.height()) / std::max(std::max(p.height(), gt.height()), eps);
    const double shape = std::pow(1.0 - std::exp(-omega_w), 4.0) + std::pow(1.0 - std::exp(-omega_h), 4.0);

    return 1.0 - iou_v + 0.5 * (delta + shape);
}

} // namespace

TEST_CASE("iou basics") {
    Box a{0, 0, 2, 2};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, Box{5, 5, 7, 7}) == 0.0);
    CHECK(iou(a, Box{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    CHECK(iou(a, Box{1, 1, 3, 3}) == iou(Box{1, 1, 3, 3}, a));
}

TEST_CASE("iou invariant under joint translation and scaling") {
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
        Box a = random_int_box(rng, 32);
        Box b = random_int_box(rng, 32);
        const double base = iou(a, b);
        const double tx = rng.uniform(-10, 10), ty = rng.uniform(-10, 10), s = rng.uniform(0.5, 3.0);
        auto map = [&](const Box& x) {
            return Box{(x.x_min + tx) * s, (x.y_min + ty) * s, (x.x_max + tx) * s, (x.y_max + ty) * s};
        };
        CHECK(iou(map(a), map(b)) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("analytic iou matches the raster-count oracle on 1000 integer boxes") {
    Rng rng(64);
    for (int i = 0; i < 1000; ++i) {
        Box a = random_int_box(rng, 64);
        Box b = random_int_box(rng, 64);
        CHECK(std::fabs(iou(a, b) - raster_iou(a, b, 64)) <= 1e-9);
    }
}

TEST_CASE("center distance and normalized variant") {
    Box a{-1, -1, 1, 1};          // center (0,0)
    Box b{2, 3, 4, 5};            // center (3,4)
    CHECK(center_distance(a, b) == 5.0);
    CHECK(center_distance(a, a) == 0.0);
    Box gt{0, 0, 6, 8}; // diagonal 10
    CHECK(normalized_center_distance(Box{3 - 1, 4 - 1, 3 + 1, 4 + 1}, gt) ==
          doctest::Approx(center_distance(Box{2, 3, 4, 5}, gt) / 10.0));
}

TEST_CASE("search frame mapping round trips") {
    SearchFrame f{50, 50, 100};
    Box b{25, 25, 75, 75};
    Box n = to_search_frame(b, f);
    CHECK(n.x_min == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(n.y_max == doctest::Approx(0.75).epsilon(1e-15));
    Box window{0, 0, 100, 100};
    Box nw = to_search_frame(window, f);
    CHECK(nw.x_min == doctest::Approx(0.0));
    CHECK(nw.x_max == doctest::Approx(1.0));

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        SearchFrame g{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(1.0, 200.0)};
        Box x{rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30)};
        Box back = from_search_frame(to_search_frame(x, g), g);
        CHECK(std::fabs(back.x_min - x.x_min) < 1e-9);
        CHECK(std::fabs(back.y_min - x.y_min) < 1e-9);
        CHECK(std::fabs(back.x_max - x.x_max) < 1e-9);
        CHECK(std::fabs(back.y_max - x.y_max) < 1e-9);
    }
}

TEST_CASE("siou is zero exactly at pred == gt and positive elsewhere") {
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        Box gt = random_int_box(rng, 64);
        CHECK(std::fabs(siou_loss(gt, gt)) <= 1e-12);
        Box other{gt.x_min + rng.uniform(0.1, 5.0), gt.y_min, gt.x_max + rng.uniform(0.1, 5.0), gt.y_max};
        CHECK(siou_loss(other, gt) > 1e-6);
    }
}

TEST_CASE("siou matches the independent formula transcription") {
    Rng rng(33);
    // Disjoint translated case called out explicitly: pred = gt shifted by (w,0).
    Box gt{10, 10, 20, 18};
    Box shifted{20, 10, 30, 18};
    CHECK(siou_loss(shifted, gt) == doctest::Approx(siou_reference(shifted, gt)).epsilon(1e-9));
    for (int i = 0; i < 200; ++i) {
        Box g = random_int_box(rng, 64);
        Box p{g.x_min + rng.uniform(-8, 8), g.y_min + rng.uniform(-8, 8), g.x_max + rng.uniform(-8, 8),
              g.y_max + rng.uniform(-8, 8)};
        CHECK(siou_loss(p, g) == doctest::Approx(siou_reference(p, g)).epsilon(1e-9));
    }
}

TEST_CASE("siou rejects zero-area gt") {
    CHECK_THROWS_AS(siou_loss(Box{0, 0, 1, 1}, Box{0, 0, 0, 5}), DomainError);
}

TEST_CASE("siou gradient matches central differences") {
    Rng rng(101);
    for (int i = 0; i < 10; ++i) {
        Box gt = random_int_box(rng, 32);
        Tensor pred = Tensor::from_rows({{gt.x_min + rng.uniform(-4, 4), gt.y_min + rng.uniform(-4, 4),
                                          gt.x_max + rng.uniform(-4, 4), gt.y_max + rng.uniform(-4, 4)}});
        const double err = grad_check([&](const Tensor& t) { return siou_loss_graph(t, gt); }, pred, 1e-5);
        CHECK(err <= 1e-5);
    }
}

TEST_CASE("box text forms round trip and xywh conversion is exact") {
    Box b{10, 20, 40, 60};
    CHECK(box_from_xywh_text("10,20,30,40").x_max == 40.0);
    CHECK(box_from_xywh_text("10,20,30,40").y_max == 60.0);
    Box r1 = box_from_corner_text(box_to_corner_text(b));
    Box r2 = box_from_xywh_text(box_to_xywh_text(b));
    CHECK(r1.x_min == b.x_min);
    CHECK(r1.y_max == b.y_max);
    CHECK(r2.x_max == b.x_max);
    CHECK(r2.y_max == b.y_max);
    Box f{1.25, -3.5, 7.75, 9.125};
    Box rf = box_from_corner_text(box_to_corner_text(f));
    CHECK(rf.x_min == f.x_min);
    CHECK(rf.y_min == f.y_min);
    CHECK(rf.x_max == f.x_max);
    CHECK(rf.y_max == f.y_max);
    CHECK_THROWS_AS(box_from_corner_text("1,2,3"), FormatError);
}

TEST_CASE("canonical sorts inverted corners") {
    Box b{5, 7, 2, 3};
    Box c = b.canonical();
    CHECK(c.x_min == 2.0);
    CHECK(c.x_max == 5.0);
    CHECK(c.y_min == 3.0);
    CHECK(c.y_max == 7.0);
    CHECK(c.is_canonical());
}
