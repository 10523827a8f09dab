// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/loss.hpp"

#include <cmath>

#include "toktrack/errors.hpp"

namespace toktrack {

void LossWeights::validate() const {
    if (siou < 0.0 || mse < 0.0 || l1 < 0.0) throw ConfigError("loss weights must be non-negative");
}

Tensor coordinate_ce(const Tensor& logits, const TokenizedBox& gt) {
    if (logits.rank() != 2 || logits.shape[0] != 4) throw ShapeError("coordinate_ce: expected [4, V] logits");
    std::vector<int> targets(gt.tokens.begin(), gt.tokens.end());
    return cross_entropy(logits, targets);
}

Tensor soft_argmax_box(const Tensor& logits, const VocabConfig& vocab) {
    if (logits.rank() != 2 || logits.shape[0] != 4 || logits.shape[1] != vocab.size)
        throw ShapeError("soft_argmax_box: expected [4, V] logits");
    Tensor values({vocab.size, 1});
    for (int tok = 0; tok < vocab.size; ++tok) (*values.data)[tok] = detokenize(tok, vocab);
    Tensor coords = transpose(matmul(softmax(logits), values)); // [1,4] expected coordinate values
    if (vocab.format == BoxFormat::CORNERS) return coords;
    // Center form: (cx, cy, w, h) -> corners. Canonicalization happens inside
    // the SIoU graph, so a negative expected extent is representable here.
    Tensor cx = slice_cols(coords, 0, 1);
    Tensor cy = slice_cols(coords, 1, 1);
    Tensor half_w = scale(slice_cols(coords, 2, 1), 0.5);
    Tensor half_h = scale(slice_cols(coords, 3, 1), 0.5);
    return concat_cols({sub(cx, half_w), sub(cy, half_h), add(cx, half_w), add(cy, half_h)});
}

TokenizedBox argmax_box(const Tensor& logits) {
    if (logits.rank() != 2 || logits.shape[0] != 4) throw ShapeError("argmax_box: expected [4, V] logits");
    TokenizedBox out;
    for (int r = 0; r < 4; ++r) {
        int best = 0;
        for (int c = 1; c < logits.shape[1]; ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        out.tokens[r] = best;
    }
    return out;
}

Tensor reconstruction_mse(const Tensor& recon, const Tensor& target, const Tensor& prev_appearance, bool visible) {
    const Tensor& ref = visible ? target : prev_appearance;
    if (recon.shape != ref.shape) throw ShapeError("reconstruction_mse: shape mismatch");
    Tensor diff = sub(recon, ref.detach());
    return mean_all(mul(diff, diff));
}

Tensor iou_l1(const Tensor& predicted, double actual) {
    if (predicted.numel() != 1) throw ShapeError("iou_l1: predicted must be a single value");
    if (!std::isfinite(actual)) throw NumericError("iou_l1: non-finite actual IoU");
    return sum_all(abs_t(add_const(predicted, -actual)));
}

FrameLoss total_frame_loss(const Tensor& ce, const Tensor& siou, const Tensor& mse, const Tensor& l1,
                           const LossWeights& weights) {
    weights.validate();
    for (const Tensor* part : {&ce, &siou, &mse, &l1})
        if (part->numel() != 1 || !std::isfinite(part->value()))
            throw NumericError("total_frame_loss: parts must be finite scalars");
    Tensor total = add(ce, add(scale(siou, weights.siou), add(scale(mse, weights.mse), scale(l1, weights.l1))));
    FrameLoss out;
    out.total = total;
    out.report.ce = ce.value();
    out.report.siou = siou.value();
    out.report.mse = mse.value();
    out.report.l1 = l1.value();
    out.report.total = total.value();
    return out;
}

} // namespace toktrack
