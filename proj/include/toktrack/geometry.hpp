// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <string>

#include "toktrack/tensor.hpp"

namespace toktrack {

// Axis-aligned rectangle. Units are pixels in the image frame or unitless in
// a normalized search frame; the same type serves both.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }
    double diagonal() const;
    bool is_canonical() const { return x_min <= x_max && y_min <= y_max; }

    // Sorts each coordinate pair so min <= max.
    Box canonical() const;
    Box clamped(double w, double h) const;

    static Box from_xywh(double x, double y, double w, double h) { return Box{x, y, x + w, y + h}; }
};

// Square crop window: the common coordinate system boxes are normalized into.
struct SearchFrame {
    double center_x = 0.0;
    double center_y = 0.0;
    double side = 1.0; // must be > 0
};

double iou(const Box& a, const Box& b);
double center_distance(const Box& a, const Box& b);
// Center distance divided by the diagonal of gt.
double normalized_center_distance(const Box& pred, const Box& gt);

// Maps b into f's unit square: the window spans [0,1]x[0,1]. Coordinates of
// boxes outside the window fall outside [0,1]; only the tokenizer clamps.
Box to_search_frame(const Box& b, const SearchFrame& f);
Box from_search_frame(const Box& b, const SearchFrame& f);

// SIoU loss (angle/distance/shape costs around IoU) on a constant gt box.
// pred_corners is a [1,4] tensor (x_min,y_min,x_max,y_max); inverted corner
// pairs are canonicalized differentiably via min/max. gt must have positive
// area. Returns a [1,1] tensor participating in the active graph.
Tensor siou_loss_graph(const Tensor& pred_corners, const Box& gt);
// Scalar convenience wrapper (no gradients).
double siou_loss(const Box& pred, const Box& gt);

// Text forms. Emission uses max-precision decimal so parse(print(b)) == b.
std::string box_to_corner_text(const Box& b);
Box box_from_corner_text(const std::string& line);
std::string box_to_xywh_text(const Box& b);
Box box_from_xywh_text(const std::string& line);

} // namespace toktrack
