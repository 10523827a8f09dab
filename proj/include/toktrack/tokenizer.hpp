// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <array>
#include <string>

#include "toktrack/geometry.hpp"

namespace toktrack {

// How a box becomes 4 tokens of a shared coordinate vocabulary.
enum class BoxFormat {
    CORNERS,           // x_min, y_min, x_max, y_max
    CENTER_WH_UNIFIED, // cx, cy, w, h -- one vocabulary for all four
    CENTER_WH_SPLIT,   // cx, cy from a position vocabulary; w, h from a size vocabulary
};

std::string box_format_name(BoxFormat f);
BoxFormat box_format_from_name(const std::string& name);

struct VocabConfig {
    int size = 400;    // V, tokens per vocabulary
    double lo = -0.5;  // search-frame units; <0 lets prompts point outside the crop
    double hi = 1.5;
    BoxFormat format = BoxFormat::CORNERS;

    double bin_width() const { return (hi - lo) / (size - 1); }
    void validate() const;
};

// Exactly 4 tokens, each in [0, V-1]. For CENTER_WH_SPLIT the stored size
// tokens are raw per-vocabulary indices; the +V embedding-table offset is
// applied only by embedding_index().
struct TokenizedBox {
    std::array<int, 4> tokens{0, 0, 0, 0};
};

int quantize(double c, const VocabConfig& cfg);
double detokenize(int token, const VocabConfig& cfg);

TokenizedBox tokenize_box(const Box& b, const VocabConfig& cfg);
// Decoded boxes are canonicalized (inverted corner pairs swapped), never rejected.
Box detokenize_box(const TokenizedBox& t, const VocabConfig& cfg);

// Embedding-table geometry: SPLIT mode appends a second vocabulary of V rows.
int vocab_table_rows(const VocabConfig& cfg);
// Offset added to tokens of box coordinate `coord_idx` (0..3) when looking up
// embeddings or slicing head logits.
int vocab_slice_offset(const VocabConfig& cfg, int coord_idx);

} // namespace toktrack
