// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include "toktrack/geometry.hpp"
#include "toktrack/tensor.hpp"
#include "toktrack/tokenizer.hpp"

namespace toktrack {

// Per-term weights of the frame loss; the cross-entropy weight is fixed at 1.
struct LossWeights {
    double siou = 2.0;
    double mse = 1.0;
    double l1 = 1.0;
    void validate() const;
};

struct FrameLossReport {
    double ce = 0.0;
    double siou = 0.0;
    double mse = 0.0;
    double l1 = 0.0;
    double total = 0.0;
    double predicted_iou = 0.0;
    double actual_iou = 0.0;
    bool visible = true;
};

// Mean over the 4 coordinate positions of -log softmax(logits)[gt].
Tensor coordinate_ce(const Tensor& logits, const TokenizedBox& gt);

// Differentiable box from coordinate logits: per-row softmax expectation of
// the detokenized bin values, converted to corner form. Discrete argmax is
// used only for metrics and prompt propagation, never here.
Tensor soft_argmax_box(const Tensor& logits, const VocabConfig& vocab);

// Highest-probability token per row.
TokenizedBox argmax_box(const Tensor& logits);

// MSE of recon against `target` when visible, against `prev_appearance` when
// not. Both references are constants: gradient flows only into recon.
Tensor reconstruction_mse(const Tensor& recon, const Tensor& target, const Tensor& prev_appearance, bool visible);

// |predicted - actual|; actual is a constant.
Tensor iou_l1(const Tensor& predicted, double actual);

struct FrameLoss {
    Tensor total;
    FrameLossReport report; // prediction/visibility fields filled by the caller
};

// total = ce + w.siou*siou + w.mse*mse + w.l1*l1. Non-finite parts raise.
FrameLoss total_frame_loss(const Tensor& ce, const Tensor& siou, const Tensor& mse, const Tensor& l1,
                           const LossWeights& weights);

} // namespace toktrack
