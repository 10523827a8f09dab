// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "toktrack/image.hpp"
#include "toktrack/tensor.hpp"
#include "toktrack/tokenizer.hpp"

namespace toktrack {

enum class ReconTarget { FEATURE, PIXEL };

std::string recon_target_name(ReconTarget t);
ReconTarget recon_target_from_name(const std::string& name);

struct ModelConfig {
    int embed_dim = 64;
    int encoder_layers = 2;
    int heads = 4;
    int patch_size = 8;
    int template_side = 32;
    int search_side = 64;
    VocabConfig vocab;
    int trajectory_len = 4;   // N: frames of box history
    int decoder_layers = 2;
    double mask_ratio = 0.9;
    ReconTarget reconstruction_target = ReconTarget::FEATURE;
    bool use_trajectory = true;
    bool use_appearance = true;
    // Appearance rows may always attend to themselves; keeps their softmax
    // row nonempty even if search attention collapses.
    bool appearance_self_attend = true;
    bool tie_vocab_head = true;
    // Propagate encoder appearance-row outputs instead of decoder outputs.
    bool propagate_encoder_appearance = false;
    double search_scale_factor = 4.0;
    double template_scale_factor = 2.0;

    int template_tokens() const { return (template_side / patch_size) * (template_side / patch_size); }
    int search_tokens() const { return (search_side / patch_size) * (search_side / patch_size); }
    // K: appearance tokens initialize as the template, so the counts match.
    int appearance_tokens() const { return template_tokens(); }
    static constexpr int command_tokens = 4;
    // Width of the reconstruction decoder's projected output.
    int recon_width() const {
        return reconstruction_target == ReconTarget::FEATURE ? embed_dim : 3 * patch_size * patch_size;
    }

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

struct GroupRange {
    int start = 0;
    int len = 0;
    int end() const { return start + len; }
    bool contains(int i) const { return i >= start && i < end(); }
};

// Index ranges of the per-frame token sequence, in assembly order.
struct TokenLayout {
    GroupRange template_g, search, appearance, trajectory, command, confidence;
    int total() const { return confidence.end(); }
    static TokenLayout build(const ModelConfig& cfg);
};

// Named learnable tensors. The map is ordered, so iteration (init, save,
// optimizer state) is deterministic.
struct ModelParams {
    ModelConfig cfg;
    std::map<std::string, Tensor> tensors;

    Tensor& t(const std::string& name);
    const Tensor& t(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    // Backbone group (patch projection + encoder blocks + final norm) gets
    // its own learning rate, like a pretrained trunk would.
    static bool is_backbone(const std::string& name);
    void set_requires_grad(bool v);
    void zero_grads();

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
};

// Appearance and confidence caches carried between frames.
struct AppearanceState {
    Tensor appearance;       // [K, d]
    Tensor confidence_embed; // [1, d]
    double last_predicted_iou = 1.0;
};

// --- frame model -------------------------------------------------------------

// Raw patch matrix: non-overlapping p x p patches, row-major, flattened to
// [count, 3*p*p] (constants, no gradient).
Tensor patchify(const Image& img, int patch_size);
// Projection + per-group positional embedding. `pos_name` selects the
// positional table ("pos_template" or "pos_search").
Tensor patchify_embed(const Image& img, const ModelParams& params, const std::string& pos_name);

Tensor assemble_frame(const Tensor& template_tokens, const Tensor& search_tokens, const AppearanceState& state,
                      const std::vector<TokenizedBox>& traj, const ModelParams& params, const TokenLayout& layout);

BoolMatrix build_oriented_mask(const TokenLayout& layout, bool appearance_self_attend);

// Captured post-softmax attention weights, one [len,len] per (layer, head),
// in execution order. Enable by setting a sink before encoder_forward.
struct AttentionCapture {
    std::vector<Tensor> weights;
};
void set_attention_capture(AttentionCapture* sink);

// Counts encoder_forward invocations on this thread.
std::uint64_t encoder_forward_count();
void reset_encoder_forward_count();

Tensor encoder_forward(const Tensor& sequence, const BoolMatrix& mask, const ModelParams& params);

// [4, V] coordinate logits; vocabulary head tied to the embedding table
// unless cfg.tie_vocab_head is false. For CENTER_WH_SPLIT, rows 2,3 read the
// size-vocabulary slice.
Tensor decode_coordinate_logits(const Tensor& command_outputs, const ModelParams& params);

// Bilinear grid-sample of the region inside gt_box (normalized search-frame
// coordinates), resampled to sqrtK x sqrtK. FEATURE samples the search
// feature grid rows; PIXEL resamples the search crop image and patchifies.
Tensor reconstruction_target_feature(const Tensor& search_feature, const Box& gt_box, const ModelConfig& cfg);
Tensor reconstruction_target_pixel(const Image& search_crop, const Box& gt_box, const ModelConfig& cfg);

struct ReconstructionResult {
    Tensor projected; // [K, recon_width]
    Tensor hidden;    // [K, d] pre-projection, what PIXEL mode propagates
};
ReconstructionResult reconstruct_appearance(const Tensor& appearance_outputs, const std::vector<int>& mask_indices,
                                            const ModelParams& params);

// Three affine layers with gelu between, sigmoid output: Tensor[1,1].
Tensor predict_iou(const Tensor& confidence_output, const ModelParams& params);

// One full frame pass shared by training and tracking.
struct FrameOutputs {
    TokenLayout layout;
    Tensor encoder_out;    // [len, d]
    Tensor logits;         // [4, V]
    Tensor appearance_out; // [K, d] rows at the appearance range (empty len=0 handled by caller)
    Tensor confidence_out; // [1, d]
    Tensor predicted_iou;  // [1, 1]
};
FrameOutputs run_frame(const ModelParams& params, const Tensor& template_tokens, const Tensor& search_tokens,
                       const AppearanceState& state, const std::vector<TokenizedBox>& traj);

// --- checkpoint io -----------------------------------------------------------

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

} // namespace toktrack
