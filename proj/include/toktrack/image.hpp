// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <array>
#include <string>
#include <vector>

#include "toktrack/geometry.hpp"

namespace toktrack {

// H x W x 3 image, doubles in [0,1], row-major, channel-interleaved. Values
// written by the synthetic renderer are u8-quantized (k/255) so that the PPM
// round trip is bit-exact.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels; // height * width * 3

    Image() = default;
    Image(int h, int w, std::array<double, 3> fill = {0, 0, 0});

    double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    // Snaps every value to the nearest k/255; the renderer calls this once
    // per frame so in-memory frames equal their on-disk form.
    void quantize_u8();
    std::array<double, 3> mean_pixel() const;
};

// Binary NetPBM, P6 maxval 255.
Image load_ppm(const std::string& path);
void save_ppm(const Image& img, const std::string& path);

// Bilinear crop-resample of the square window onto out_side x out_side.
// Sample points outside the source image blend toward pad_color.
Image crop_resample(const Image& src, const SearchFrame& window, int out_side, std::array<double, 3> pad_color);

} // namespace toktrack
