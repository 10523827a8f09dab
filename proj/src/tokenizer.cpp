// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/tokenizer.hpp"

#include <algorithm>
#include <cmath>

#include "toktrack/errors.hpp"

namespace toktrack {

std::string box_format_name(BoxFormat f) {
    switch (f) {
    case BoxFormat::CORNERS: return "CORNERS";
    case BoxFormat::CENTER_WH_UNIFIED: return "CENTER_WH_UNIFIED";
    case BoxFormat::CENTER_WH_SPLIT: return "CENTER_WH_SPLIT";
    }
    throw ConfigError("box_format_name: unknown format");
}

BoxFormat box_format_from_name(const std::string& name) {
    if (name == "CORNERS") return BoxFormat::CORNERS;
    if (name == "CENTER_WH_UNIFIED") return BoxFormat::CENTER_WH_UNIFIED;
    if (name == "CENTER_WH_SPLIT") return BoxFormat::CENTER_WH_SPLIT;
    throw ConfigError("unknown box format '" + name + "'");
}

void VocabConfig::validate() const {
    if (size < 2) throw ConfigError("vocab size must be >= 2");
    if (!(lo < hi)) throw ConfigError("vocab range must satisfy lo < hi");
}

int quantize(double c, const VocabConfig& cfg) {
    cfg.validate();
    const double clamped = std::min(std::max(c, cfg.lo), cfg.hi);
    const double scaled = (clamped - cfg.lo) / (cfg.hi - cfg.lo) * (cfg.size - 1);
    return static_cast<int>(std::lround(scaled));
}

double detokenize(int token, const VocabConfig& cfg) {
    cfg.validate();
    if (token < 0 || token >= cfg.size)
        throw VocabRangeError("detokenize: token " + std::to_string(token) + " outside vocabulary");
    return cfg.lo + static_cast<double>(token) / (cfg.size - 1) * (cfg.hi - cfg.lo);
}

TokenizedBox tokenize_box(const Box& b, const VocabConfig& cfg) {
    TokenizedBox t;
    switch (cfg.format) {
    case BoxFormat::CORNERS:
        t.tokens = {quantize(b.x_min, cfg), quantize(b.y_min, cfg), quantize(b.x_max, cfg), quantize(b.y_max, cfg)};
        break;
    case BoxFormat::CENTER_WH_UNIFIED:
    case BoxFormat::CENTER_WH_SPLIT:
        t.tokens = {quantize(b.center_x(), cfg), quantize(b.center_y(), cfg), quantize(b.width(), cfg),
                    quantize(b.height(), cfg)};
        break;
    }
    return t;
}

Box detokenize_box(const TokenizedBox& t, const VocabConfig& cfg) {
    const double a = detokenize(t.tokens[0], cfg);
    const double b = detokenize(t.tokens[1], cfg);
    const double c = detokenize(t.tokens[2], cfg);
    const double d = detokenize(t.tokens[3], cfg);
    switch (cfg.format) {
    case BoxFormat::CORNERS:
        return Box{a, b, c, d}.canonical();
    case BoxFormat::CENTER_WH_UNIFIED:
    case BoxFormat::CENTER_WH_SPLIT:
        // w/h tokens may decode negative when the range extends below 0.
        return Box{a - 0.5 * c, b - 0.5 * d, a + 0.5 * c, b + 0.5 * d}.canonical();
    }
    throw ConfigError("detokenize_box: unknown format");
}

int vocab_table_rows(const VocabConfig& cfg) {
    return cfg.format == BoxFormat::CENTER_WH_SPLIT ? 2 * cfg.size : cfg.size;
}

int vocab_slice_offset(const VocabConfig& cfg, int coord_idx) {
    if (coord_idx < 0 || coord_idx > 3) throw ShapeError("vocab_slice_offset: coordinate index out of range");
    return (cfg.format == BoxFormat::CENTER_WH_SPLIT && coord_idx >= 2) ? cfg.size : 0;
}

} // namespace toktrack
