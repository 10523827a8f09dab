// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "toktrack/errors.hpp"

namespace toktrack {

namespace {

constexpr double kEps = 1e-9; // denominator guard for degenerate boxes

Tensor ts(double v) { return Tensor::scalar(v); }

} // namespace

double Box::diagonal() const { return std::sqrt(width() * width() + height() * height()); }

Box Box::canonical() const {
    return Box{std::min(x_min, x_max), std::min(y_min, y_max), std::max(x_min, x_max), std::max(y_min, y_max)};
}

Box Box::clamped(double w, double h) const {
    auto clip = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
    return Box{clip(x_min, w), clip(y_min, h), clip(x_max, w), clip(y_max, h)};
}

double iou(const Box& a, const Box& b) {
    if (!a.is_canonical() || !b.is_canonical()) throw DomainError("iou: non-canonical box");
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double center_distance(const Box& a, const Box& b) {
    const double dx = a.center_x() - b.center_x();
    const double dy = a.center_y() - b.center_y();
    return std::sqrt(dx * dx + dy * dy);
}

double normalized_center_distance(const Box& pred, const Box& gt) {
    const double diag = gt.diagonal();
    if (diag <= 0.0) throw DomainError("normalized_center_distance: gt has zero diagonal");
    return center_distance(pred, gt) / diag;
}

Box to_search_frame(const Box& b, const SearchFrame& f) {
    if (f.side <= 0.0) throw DomainError("to_search_frame: non-positive side");
    const double ox = f.center_x - 0.5 * f.side;
    const double oy = f.center_y - 0.5 * f.side;
    return Box{(b.x_min - ox) / f.side, (b.y_min - oy) / f.side, (b.x_max - ox) / f.side, (b.y_max - oy) / f.side};
}

Box from_search_frame(const Box& b, const SearchFrame& f) {
    if (f.side <= 0.0) throw DomainError("from_search_frame: non-positive side");
    const double ox = f.center_x - 0.5 * f.side;
    const double oy = f.center_y - 0.5 * f.side;
    return Box{b.x_min * f.side + ox, b.y_min * f.side + oy, b.x_max * f.side + ox, b.y_max * f.side + oy};
}

Tensor siou_loss_graph(const Tensor& pred_corners, const Box& gt) {
    if (pred_corners.rank() != 2 || pred_corners.shape[0] != 1 || pred_corners.shape[1] != 4)
        throw ShapeError("siou_loss_graph: pred must be [1,4]");
    if (!gt.is_canonical() || gt.area() <= 0.0) throw DomainError("siou_loss_graph: gt must have positive area");

    // Differentiable canonicalization: early argmax/soft boxes may invert.
    Tensor px1 = slice_cols(pred_corners, 0, 1);
    Tensor py1 = slice_cols(pred_corners, 1, 1);
    Tensor px2 = slice_cols(pred_corners, 2, 1);
    Tensor py2 = slice_cols(pred_corners, 3, 1);
    Tensor x_min = minimum(px1, px2), x_max = maximum(px1, px2);
    Tensor y_min = minimum(py1, py2), y_max = maximum(py1, py2);

    Tensor w = sub(x_max, x_min), h = sub(y_max, y_min);
    Tensor area_p = mul(w, h);
    const double area_g = gt.area();

    // IoU with eps-guarded union so identical boxes give exactly 1.
    Tensor zero = ts(0.0);
    Tensor iw = maximum(sub(minimum(x_max, ts(gt.x_max)), maximum(x_min, ts(gt.x_min))), zero);
    Tensor ih = maximum(sub(minimum(y_max, ts(gt.y_max)), maximum(y_min, ts(gt.y_min))), zero);
    Tensor inter = mul(iw, ih);
    Tensor uni = sub(add_const(area_p, area_g), inter);
    Tensor iou_t = divide(inter, maximum(uni, ts(kEps)));

    // Angle cost Lambda = 2*|s_ch|*|s_cw| / sigma^2  (= sin of twice the
    // center-line angle to the nearest axis, branch-free).
    Tensor cx = scale(add(x_min, x_max), 0.5);
    Tensor cy = scale(add(y_min, y_max), 0.5);
    Tensor s_cw = sub(ts(gt.center_x()), cx);
    Tensor s_ch = sub(ts(gt.center_y()), cy);
    Tensor sigma2 = add(mul(s_cw, s_cw), mul(s_ch, s_ch));
    Tensor lambda = divide(scale(mul(abs_t(s_cw), abs_t(s_ch)), 2.0), maximum(sigma2, ts(kEps)));

    // Distance cost over the enclosing box, gamma = 2 - Lambda.
    Tensor enc_w = sub(maximum(x_max, ts(gt.x_max)), minimum(x_min, ts(gt.x_min)));
    Tensor enc_h = sub(maximum(y_max, ts(gt.y_max)), minimum(y_min, ts(gt.y_min)));
    Tensor rho_x = pow_const(divide(s_cw, maximum(enc_w, ts(kEps))), 2.0);
    Tensor rho_y = pow_const(divide(s_ch, maximum(enc_h, ts(kEps))), 2.0);
    Tensor gamma = sub(ts(2.0), lambda);
    Tensor delta = sub(ts(2.0), add(exp_t(neg(mul(gamma, rho_x))), exp_t(neg(mul(gamma, rho_y)))));

    // Shape cost, theta = 4.
    Tensor omega_w = divide(abs_t(add_const(w, -gt.width())), maximum(maximum(w, ts(gt.width())), ts(kEps)));
    Tensor omega_h = divide(abs_t(add_const(h, -gt.height())), maximum(maximum(h, ts(gt.height())), ts(kEps)));
    Tensor shape = add(pow_const(sub(ts(1.0), exp_t(neg(omega_w))), 4.0),
                       pow_const(sub(ts(1.0), exp_t(neg(omega_h))), 4.0));

    return add(sub(ts(1.0), iou_t), scale(add(delta, shape), 0.5));
}

double siou_loss(const Box& pred, const Box& gt) {
    Tensor p = Tensor::from_rows({{pred.x_min, pred.y_min, pred.x_max, pred.y_max}});
    return siou_loss_graph(p, gt).value();
}

namespace {

std::string four_floats(double a, double b, double c, double d) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", a, b, c, d);
    return buf;
}

void parse_four(const std::string& line, double out[4], const char* what) {
    const int n = std::sscanf(line.c_str(), "%lf ,%lf ,%lf ,%lf", &out[0], &out[1], &out[2], &out[3]);
    if (n != 4) throw FormatError(std::string(what) + ": expected 4 comma-separated numbers, got '" + line + "'");
}

} // namespace

std::string box_to_corner_text(const Box& b) { return four_floats(b.x_min, b.y_min, b.x_max, b.y_max); }

Box box_from_corner_text(const std::string& line) {
    double v[4];
    parse_four(line, v, "corner text");
    return Box{v[0], v[1], v[2], v[3]};
}

std::string box_to_xywh_text(const Box& b) { return four_floats(b.x_min, b.y_min, b.width(), b.height()); }

Box box_from_xywh_text(const std::string& line) {
    double v[4];
    parse_four(line, v, "xywh text");
    return Box::from_xywh(v[0], v[1], v[2], v[3]);
}

} // namespace toktrack
