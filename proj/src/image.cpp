// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "toktrack/errors.hpp"

namespace toktrack {

Image::Image(int h, int w, std::array<double, 3> fill) : height(h), width(w) {
    if (h <= 0 || w <= 0) throw ShapeError("Image: non-positive dimensions");
    pixels.resize(static_cast<std::size_t>(h) * w * 3);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = fill[i % 3];
}

void Image::quantize_u8() {
    for (double& v : pixels) {
        const double c = std::min(std::max(v, 0.0), 1.0);
        v = std::round(c * 255.0) / 255.0;
    }
}

std::array<double, 3> Image::mean_pixel() const {
    std::array<double, 3> m{0, 0, 0};
    const std::size_t n = pixels.size() / 3;
    for (std::size_t i = 0; i < pixels.size(); ++i) m[i % 3] += pixels[i];
    for (auto& v : m) v /= static_cast<double>(n);
    return m;
}

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open image '" + path + "'");
    std::string magic;
    in >> magic;
    if (magic != "P6") throw FormatError("'" + path + "': not a P6 PPM");
    // Header tokens may be separated by whitespace and '#' comments.
    auto next_int = [&in, &path]() {
        for (;;) {
            int ch = in.peek();
            if (ch == EOF) break;
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            if (std::isspace(ch)) {
                in.get();
                continue;
            }
            break;
        }
        int v = -1;
        in >> v;
        if (!in || v < 0) throw FormatError("'" + path + "': bad PPM header");
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (maxval != 255) throw FormatError("'" + path + "': only maxval 255 supported");
    in.get(); // single whitespace before raster
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw FormatError("'" + path + "': truncated raster");
    Image img(h, w);
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] / 255.0;
    return img;
}

void save_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write image '" + path + "'");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double c = std::min(std::max(img.pixels[i], 0.0), 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(c * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw InputError("write failed for '" + path + "'");
}

Image crop_resample(const Image& src, const SearchFrame& window, int out_side, std::array<double, 3> pad_color) {
    if (out_side <= 0) throw ShapeError("crop_resample: non-positive output side");
    if (window.side <= 0.0) throw DomainError("crop_resample: non-positive window side");
    Image out(out_side, out_side);
    const double ox = window.center_x - 0.5 * window.side;
    const double oy = window.center_y - 0.5 * window.side;
    const double step = window.side / out_side;
    // Texel (y,x) has its center at (x+0.5, y+0.5) in source pixel coords.
    auto texel = [&](int y, int x, int c) -> double {
        if (y < 0 || y >= src.height || x < 0 || x >= src.width) return pad_color[c];
        return src.at(y, x, c);
    };
    for (int i = 0; i < out_side; ++i) {
        const double sy = oy + (i + 0.5) * step - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        for (int j = 0; j < out_side; ++j) {
            const double sx = ox + (j + 0.5) * step - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            for (int c = 0; c < 3; ++c) {
                const double v00 = texel(y0, x0, c), v01 = texel(y0, x0 + 1, c);
                const double v10 = texel(y0 + 1, x0, c), v11 = texel(y0 + 1, x0 + 1, c);
                out.at(i, j, c) =
                    (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
            }
        }
    }
    return out;
}

} // namespace toktrack
