// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "toktrack/errors.hpp"
#include "toktrack/kvtext.hpp"
#include "toktrack/rng.hpp"

namespace toktrack {

namespace {

thread_local std::uint64_t g_encoder_forwards = 0;
thread_local AttentionCapture* g_attn_capture = nullptr;

} // namespace

std::string recon_target_name(ReconTarget t) {
    switch (t) {
    case ReconTarget::FEATURE: return "FEATURE";
    case ReconTarget::PIXEL: return "PIXEL";
    }
    throw ConfigError("recon_target_name: unknown target");
}

ReconTarget recon_target_from_name(const std::string& name) {
    if (name == "FEATURE") return ReconTarget::FEATURE;
    if (name == "PIXEL") return ReconTarget::PIXEL;
    throw ConfigError("unknown reconstruction target '" + name + "'");
}

void ModelConfig::validate() const {
    if (embed_dim < 1 || encoder_layers < 1 || heads < 1 || patch_size < 1 || decoder_layers < 1)
        throw ConfigError("model dimensions must be positive");
    if (embed_dim % heads != 0) throw ConfigError("embed_dim must be divisible by heads");
    if (template_side % patch_size != 0 || search_side % patch_size != 0)
        throw ConfigError("template_side and search_side must be divisible by patch_size");
    if (template_side < patch_size || search_side < patch_size) throw ConfigError("sides must be >= patch_size");
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) throw ConfigError("mask_ratio must be in [0,1)");
    if (trajectory_len < 1) throw ConfigError("trajectory_len must be >= 1");
    if (search_scale_factor <= 0 || template_scale_factor <= 0) throw ConfigError("scale factors must be positive");
    vocab.validate();
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["embed_dim"] = std::to_string(embed_dim);
    kv["encoder_layers"] = std::to_string(encoder_layers);
    kv["heads"] = std::to_string(heads);
    kv["patch_size"] = std::to_string(patch_size);
    kv["template_side"] = std::to_string(template_side);
    kv["search_side"] = std::to_string(search_side);
    kv["vocab_size"] = std::to_string(vocab.size);
    kv["vocab_lo"] = fmt_double(vocab.lo);
    kv["vocab_hi"] = fmt_double(vocab.hi);
    kv["box_format"] = box_format_name(vocab.format);
    kv["trajectory_len"] = std::to_string(trajectory_len);
    kv["decoder_layers"] = std::to_string(decoder_layers);
    kv["mask_ratio"] = fmt_double(mask_ratio);
    kv["reconstruction_target"] = recon_target_name(reconstruction_target);
    kv["use_trajectory"] = use_trajectory ? "true" : "false";
    kv["use_appearance"] = use_appearance ? "true" : "false";
    kv["appearance_self_attend"] = appearance_self_attend ? "true" : "false";
    kv["tie_vocab_head"] = tie_vocab_head ? "true" : "false";
    kv["propagate_encoder_appearance"] = propagate_encoder_appearance ? "true" : "false";
    kv["search_scale_factor"] = fmt_double(search_scale_factor);
    kv["template_scale_factor"] = fmt_double(template_scale_factor);
    return kv;
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig cfg;
    for (const auto& [key, v] : kv) {
        if (key == "embed_dim") cfg.embed_dim = parse_int(v, key);
        else if (key == "encoder_layers") cfg.encoder_layers = parse_int(v, key);
        else if (key == "heads") cfg.heads = parse_int(v, key);
        else if (key == "patch_size") cfg.patch_size = parse_int(v, key);
        else if (key == "template_side") cfg.template_side = parse_int(v, key);
        else if (key == "search_side") cfg.search_side = parse_int(v, key);
        else if (key == "vocab_size") cfg.vocab.size = parse_int(v, key);
        else if (key == "vocab_lo") cfg.vocab.lo = parse_double(v, key);
        else if (key == "vocab_hi") cfg.vocab.hi = parse_double(v, key);
        else if (key == "box_format") cfg.vocab.format = box_format_from_name(v);
        else if (key == "trajectory_len") cfg.trajectory_len = parse_int(v, key);
        else if (key == "decoder_layers") cfg.decoder_layers = parse_int(v, key);
        else if (key == "mask_ratio") cfg.mask_ratio = parse_double(v, key);
        else if (key == "reconstruction_target") cfg.reconstruction_target = recon_target_from_name(v);
        else if (key == "use_trajectory") cfg.use_trajectory = parse_bool(v, key);
        else if (key == "use_appearance") cfg.use_appearance = parse_bool(v, key);
        else if (key == "appearance_self_attend") cfg.appearance_self_attend = parse_bool(v, key);
        else if (key == "tie_vocab_head") cfg.tie_vocab_head = parse_bool(v, key);
        else if (key == "propagate_encoder_appearance") cfg.propagate_encoder_appearance = parse_bool(v, key);
        else if (key == "search_scale_factor") cfg.search_scale_factor = parse_double(v, key);
        else if (key == "template_scale_factor") cfg.template_scale_factor = parse_double(v, key);
        else throw ConfigError("unknown model config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

TokenLayout TokenLayout::build(const ModelConfig& cfg) {
    cfg.validate();
    TokenLayout l;
    int at = 0;
    l.template_g = {at, cfg.template_tokens()};
    at = l.template_g.end();
    l.search = {at, cfg.search_tokens()};
    at = l.search.end();
    l.appearance = {at, cfg.use_appearance ? cfg.appearance_tokens() : 0};
    at = l.appearance.end();
    l.trajectory = {at, cfg.use_trajectory ? 4 * cfg.trajectory_len : 0};
    at = l.trajectory.end();
    l.command = {at, ModelConfig::command_tokens};
    at = l.command.end();
    l.confidence = {at, 1};
    return l;
}

Tensor& ModelParams::t(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("missing parameter tensor '" + name + "'");
    return it->second;
}

const Tensor& ModelParams::t(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("missing parameter tensor '" + name + "'");
    return it->second;
}

bool ModelParams::is_backbone(const std::string& name) {
    return name.rfind("patch_proj", 0) == 0 || name.rfind("enc", 0) == 0 || name.rfind("final_ln", 0) == 0;
}

void ModelParams::set_requires_grad(bool v) {
    for (auto& [name, tensor] : tensors) {
        tensor.requires_grad = v;
        if (v) tensor.ensure_grad();
    }
}

void ModelParams::zero_grads() {
    for (auto& [name, tensor] : tensors) tensor.zero_grad();
}

namespace {

enum class InitKind { WEIGHT, BIAS, ONES };

void add_param(ModelParams& p, Rng& rng, const std::string& name, std::vector<int> shape, InitKind kind) {
    Tensor t(std::move(shape));
    switch (kind) {
    case InitKind::WEIGHT:
        for (double& v : *t.data) v = rng.trunc_normal(0.02);
        break;
    case InitKind::BIAS: break; // zeros
    case InitKind::ONES:
        for (double& v : *t.data) v = 1.0;
        break;
    }
    p.tensors.emplace(name, std::move(t));
}

void add_block(ModelParams& p, Rng& rng, const std::string& prefix, int d) {
    add_param(p, rng, prefix + "_ln1_g", {1, d}, InitKind::ONES);
    add_param(p, rng, prefix + "_ln1_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_q_w", {d, d}, InitKind::WEIGHT);
    add_param(p, rng, prefix + "_q_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_k_w", {d, d}, InitKind::WEIGHT);
    add_param(p, rng, prefix + "_k_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_v_w", {d, d}, InitKind::WEIGHT);
    add_param(p, rng, prefix + "_v_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_attn_out_w", {d, d}, InitKind::WEIGHT);
    add_param(p, rng, prefix + "_attn_out_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_ln2_g", {1, d}, InitKind::ONES);
    add_param(p, rng, prefix + "_ln2_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_mlp1_w", {d, 4 * d}, InitKind::WEIGHT);
    add_param(p, rng, prefix + "_mlp1_b", {1, 4 * d}, InitKind::BIAS);
    add_param(p, rng, prefix + "_mlp2_w", {4 * d, d}, InitKind::WEIGHT);
    add_param(p, rng, prefix + "_mlp2_b", {1, d}, InitKind::BIAS);
}

} // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    Rng rng(seed);
    const int d = cfg.embed_dim;
    const int pp = 3 * cfg.patch_size * cfg.patch_size;
    const int rows = vocab_table_rows(cfg.vocab);

    add_param(p, rng, "patch_proj_w", {pp, d}, InitKind::WEIGHT);
    add_param(p, rng, "patch_proj_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, "vocab_embed", {rows, d}, InitKind::WEIGHT);
    add_param(p, rng, "vocab_head_bias", {1, rows}, InitKind::BIAS);
    if (!cfg.tie_vocab_head) add_param(p, rng, "vocab_head_w", {d, rows}, InitKind::WEIGHT);
    add_param(p, rng, "pos_template", {cfg.template_tokens(), d}, InitKind::WEIGHT);
    add_param(p, rng, "pos_search", {cfg.search_tokens(), d}, InitKind::WEIGHT);
    if (cfg.use_appearance) add_param(p, rng, "pos_appearance", {cfg.appearance_tokens(), d}, InitKind::WEIGHT);
    if (cfg.use_trajectory) add_param(p, rng, "pos_trajectory", {4 * cfg.trajectory_len, d}, InitKind::WEIGHT);
    add_param(p, rng, "cmd_embed", {4, d}, InitKind::WEIGHT);
    add_param(p, rng, "conf_embed", {1, d}, InitKind::WEIGHT);
    add_param(p, rng, "id_template", {1, d}, InitKind::WEIGHT);
    add_param(p, rng, "id_search", {1, d}, InitKind::WEIGHT);
    if (cfg.use_appearance) add_param(p, rng, "id_appearance", {1, d}, InitKind::WEIGHT);
    if (cfg.use_trajectory) add_param(p, rng, "id_trajectory", {1, d}, InitKind::WEIGHT);
    add_param(p, rng, "id_command", {1, d}, InitKind::WEIGHT);
    add_param(p, rng, "id_confidence", {1, d}, InitKind::WEIGHT);
    for (int l = 0; l < cfg.encoder_layers; ++l) add_block(p, rng, "enc" + std::to_string(l), d);
    add_param(p, rng, "final_ln_g", {1, d}, InitKind::ONES);
    add_param(p, rng, "final_ln_b", {1, d}, InitKind::BIAS);
    if (cfg.use_appearance) {
        for (int l = 0; l < cfg.decoder_layers; ++l) add_block(p, rng, "dec" + std::to_string(l), d);
        add_param(p, rng, "dec_ln_g", {1, d}, InitKind::ONES);
        add_param(p, rng, "dec_ln_b", {1, d}, InitKind::BIAS);
        add_param(p, rng, "dec_out_w", {d, cfg.recon_width()}, InitKind::WEIGHT);
        add_param(p, rng, "dec_out_b", {1, cfg.recon_width()}, InitKind::BIAS);
        add_param(p, rng, "mask_token", {1, d}, InitKind::WEIGHT);
    }
    add_param(p, rng, "iou1_w", {d, d}, InitKind::WEIGHT);
    add_param(p, rng, "iou1_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, "iou2_w", {d, d}, InitKind::WEIGHT);
    add_param(p, rng, "iou2_b", {1, d}, InitKind::BIAS);
    add_param(p, rng, "iou3_w", {d, 1}, InitKind::WEIGHT);
    add_param(p, rng, "iou3_b", {1, 1}, InitKind::BIAS);
    return p;
}

Tensor patchify(const Image& img, int patch_size) {
    if (img.height % patch_size != 0 || img.width % patch_size != 0)
        throw ShapeError("patchify: image dimensions not divisible by patch size");
    const int gy = img.height / patch_size, gx = img.width / patch_size;
    Tensor out({gy * gx, 3 * patch_size * patch_size});
    for (int py = 0; py < gy; ++py) {
        for (int px = 0; px < gx; ++px) {
            double* row = out.data->data() + static_cast<std::size_t>(py * gx + px) * out.shape[1];
            int k = 0;
            for (int y = 0; y < patch_size; ++y)
                for (int x = 0; x < patch_size; ++x)
                    for (int c = 0; c < 3; ++c) row[k++] = img.at(py * patch_size + y, px * patch_size + x, c);
        }
    }
    return out;
}

Tensor patchify_embed(const Image& img, const ModelParams& params, const std::string& pos_name) {
    Tensor patches = patchify(img, params.cfg.patch_size);
    Tensor proj = add_rows(matmul(patches, params.t("patch_proj_w")), params.t("patch_proj_b"));
    const Tensor& pos = params.t(pos_name);
    if (pos.shape[0] != proj.shape[0]) throw ShapeError("patchify_embed: positional table size mismatch");
    return add(proj, pos);
}

Tensor assemble_frame(const Tensor& template_tokens, const Tensor& search_tokens, const AppearanceState& state,
                      const std::vector<TokenizedBox>& traj, const ModelParams& params, const TokenLayout& layout) {
    const ModelConfig& cfg = params.cfg;
    if (template_tokens.shape[0] != layout.template_g.len || search_tokens.shape[0] != layout.search.len)
        throw ShapeError("assemble_frame: visual token counts do not match the layout");
    std::vector<Tensor> parts;
    parts.push_back(add_rows(template_tokens, params.t("id_template")));
    parts.push_back(add_rows(search_tokens, params.t("id_search")));
    if (cfg.use_appearance) {
        if (state.appearance.rank() != 2 || state.appearance.shape[0] != cfg.appearance_tokens())
            throw ShapeError("assemble_frame: appearance state has wrong row count");
        parts.push_back(
            add_rows(add(state.appearance, params.t("pos_appearance")), params.t("id_appearance")));
    }
    if (cfg.use_trajectory) {
        if (static_cast<int>(traj.size()) != cfg.trajectory_len)
            throw ShapeError("assemble_frame: expected " + std::to_string(cfg.trajectory_len) +
                             " trajectory boxes, got " + std::to_string(traj.size()));
        std::vector<int> indices;
        indices.reserve(4 * traj.size());
        for (const TokenizedBox& tb : traj)
            for (int j = 0; j < 4; ++j) {
                const int tok = tb.tokens[j];
                if (tok < 0 || tok >= cfg.vocab.size)
                    throw VocabRangeError("assemble_frame: trajectory token outside vocabulary");
                indices.push_back(tok + vocab_slice_offset(cfg.vocab, j));
            }
        Tensor emb = embedding_lookup(params.t("vocab_embed"), indices);
        parts.push_back(add_rows(add(emb, params.t("pos_trajectory")), params.t("id_trajectory")));
    }
    parts.push_back(add_rows(params.t("cmd_embed"), params.t("id_command")));
    if (state.confidence_embed.rank() != 2 || state.confidence_embed.shape[0] != 1)
        throw ShapeError("assemble_frame: confidence embed must be [1,d]");
    parts.push_back(add(state.confidence_embed, params.t("id_confidence")));
    Tensor seq = concat_rows(parts);
    if (seq.shape[0] != layout.total()) throw ShapeError("assemble_frame: assembled length mismatch");
    return seq;
}

BoolMatrix build_oriented_mask(const TokenLayout& layout, bool appearance_self_attend) {
    const int n = layout.total();
    BoolMatrix mask(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mask.set(i, j, true);
    const int conf_col = layout.confidence.start;
    for (int i = layout.appearance.start; i < layout.appearance.end(); ++i) {
        for (int j = 0; j < n; ++j) {
            const bool allowed = layout.search.contains(j) || j == conf_col ||
                                 (appearance_self_attend && j == i);
            mask.set(i, j, allowed);
        }
    }
    return mask;
}

void set_attention_capture(AttentionCapture* sink) { g_attn_capture = sink; }

std::uint64_t encoder_forward_count() { return g_encoder_forwards; }
void reset_encoder_forward_count() { g_encoder_forwards = 0; }

namespace {

// Pre-norm block: x + MHA(LN(x)), then x + MLP(LN(x)).
Tensor transformer_block(const Tensor& x, const BoolMatrix& mask, const ModelParams& params,
                         const std::string& prefix, AttentionCapture* cap) {
    const int d = params.cfg.embed_dim;
    const int h = params.cfg.heads;
    const int hd = d / h;
    Tensor normed = layer_norm(x, params.t(prefix + "_ln1_g"), params.t(prefix + "_ln1_b"));
    Tensor q = add_rows(matmul(normed, params.t(prefix + "_q_w")), params.t(prefix + "_q_b"));
    Tensor k = add_rows(matmul(normed, params.t(prefix + "_k_w")), params.t(prefix + "_k_b"));
    Tensor v = add_rows(matmul(normed, params.t(prefix + "_v_w")), params.t(prefix + "_v_b"));
    std::vector<Tensor> heads_out;
    heads_out.reserve(h);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int i = 0; i < h; ++i) {
        Tensor qh = slice_cols(q, i * hd, hd);
        Tensor kh = slice_cols(k, i * hd, hd);
        Tensor vh = slice_cols(v, i * hd, hd);
        Tensor scores = matmul(scale(qh, inv_scale), transpose(kh));
        Tensor weights = masked_softmax(scores, mask);
        if (cap != nullptr) cap->weights.push_back(weights.clone_data());
        heads_out.push_back(matmul(weights, vh));
    }
    Tensor attn = add_rows(matmul(concat_cols(heads_out), params.t(prefix + "_attn_out_w")),
                           params.t(prefix + "_attn_out_b"));
    Tensor x1 = add(x, attn);
    Tensor normed2 = layer_norm(x1, params.t(prefix + "_ln2_g"), params.t(prefix + "_ln2_b"));
    Tensor hidden = gelu(add_rows(matmul(normed2, params.t(prefix + "_mlp1_w")), params.t(prefix + "_mlp1_b")));
    Tensor mlp = add_rows(matmul(hidden, params.t(prefix + "_mlp2_w")), params.t(prefix + "_mlp2_b"));
    return add(x1, mlp);
}

} // namespace

Tensor encoder_forward(const Tensor& sequence, const BoolMatrix& mask, const ModelParams& params) {
    if (sequence.rank() != 2 || sequence.shape[1] != params.cfg.embed_dim)
        throw ShapeError("encoder_forward: sequence must be [len, embed_dim]");
    if (mask.rows != sequence.shape[0] || mask.cols != sequence.shape[0])
        throw ShapeError("encoder_forward: mask shape mismatch");
    ++g_encoder_forwards;
    Tensor x = sequence;
    for (int l = 0; l < params.cfg.encoder_layers; ++l)
        x = transformer_block(x, mask, params, "enc" + std::to_string(l), g_attn_capture);
    return layer_norm(x, params.t("final_ln_g"), params.t("final_ln_b"));
}

Tensor decode_coordinate_logits(const Tensor& command_outputs, const ModelParams& params) {
    if (command_outputs.rank() != 2 || command_outputs.shape[0] != 4)
        throw ShapeError("decode_coordinate_logits: expected [4, d] command outputs");
    const ModelConfig& cfg = params.cfg;
    Tensor full;
    if (cfg.tie_vocab_head)
        full = matmul(command_outputs, transpose(params.t("vocab_embed")));
    else
        full = matmul(command_outputs, params.t("vocab_head_w"));
    full = add_rows(full, params.t("vocab_head_bias"));
    if (cfg.vocab.format != BoxFormat::CENTER_WH_SPLIT) return full;
    // Each coordinate row reads its own vocabulary slice.
    std::vector<Tensor> rows;
    rows.reserve(4);
    for (int j = 0; j < 4; ++j)
        rows.push_back(slice_cols(slice_rows(full, j, 1), vocab_slice_offset(cfg.vocab, j), cfg.vocab.size));
    return concat_rows(rows);
}

namespace {

// Bilinear sample positions for a sqrtK x sqrtK grid inside gt_box (in unit
// search coordinates), mapped onto a g x g cell grid with border clamp.
struct GridSample {
    int i0, i1;
    double f;
};

GridSample axis_sample(double coord, int g) {
    double f = coord * g - 0.5;
    f = std::min(std::max(f, 0.0), static_cast<double>(g - 1));
    const int i0 = std::min(static_cast<int>(std::floor(f)), g - 2 < 0 ? 0 : g - 2);
    const double frac = f - i0;
    return {i0, std::min(i0 + 1, g - 1), frac};
}

} // namespace

Tensor reconstruction_target_feature(const Tensor& search_feature, const Box& gt_box, const ModelConfig& cfg) {
    const int g = cfg.search_side / cfg.patch_size;
    if (search_feature.rank() != 2 || search_feature.shape[0] != g * g)
        throw ShapeError("reconstruction_target_feature: feature grid size mismatch");
    if (!(gt_box.width() > 0.0) || !(gt_box.height() > 0.0))
        throw DomainError("reconstruction_target_feature: degenerate box");
    const int sk = cfg.template_side / cfg.patch_size; // sqrt(K)
    const int d = search_feature.shape[1];
    Tensor out({sk * sk, d}); // constant: reads data only, never joins the graph
    for (int ki = 0; ki < sk; ++ki) {
        const double y = gt_box.y_min + (ki + 0.5) / sk * gt_box.height();
        const GridSample sy = axis_sample(y, g);
        for (int kj = 0; kj < sk; ++kj) {
            const double x = gt_box.x_min + (kj + 0.5) / sk * gt_box.width();
            const GridSample sx = axis_sample(x, g);
            double* row = out.data->data() + static_cast<std::size_t>(ki * sk + kj) * d;
            const double* r00 = search_feature.data->data() + static_cast<std::size_t>(sy.i0 * g + sx.i0) * d;
            const double* r01 = search_feature.data->data() + static_cast<std::size_t>(sy.i0 * g + sx.i1) * d;
            const double* r10 = search_feature.data->data() + static_cast<std::size_t>(sy.i1 * g + sx.i0) * d;
            const double* r11 = search_feature.data->data() + static_cast<std::size_t>(sy.i1 * g + sx.i1) * d;
            for (int c = 0; c < d; ++c)
                row[c] = (1 - sy.f) * ((1 - sx.f) * r00[c] + sx.f * r01[c]) +
                         sy.f * ((1 - sx.f) * r10[c] + sx.f * r11[c]);
        }
    }
    return out;
}

Tensor reconstruction_target_pixel(const Image& search_crop, const Box& gt_box, const ModelConfig& cfg) {
    if (search_crop.height != cfg.search_side || search_crop.width != cfg.search_side)
        throw ShapeError("reconstruction_target_pixel: crop size mismatch");
    if (!(gt_box.width() > 0.0) || !(gt_box.height() > 0.0))
        throw DomainError("reconstruction_target_pixel: degenerate box");
    const int sk = cfg.template_side / cfg.patch_size;
    const int side = sk * cfg.patch_size;
    Image region(side, side);
    // Bilinear resample of the (unit-coordinate) box region with border clamp.
    for (int i = 0; i < side; ++i) {
        const double y = gt_box.y_min + (i + 0.5) / side * gt_box.height();
        const GridSample sy = axis_sample(y, cfg.search_side);
        for (int j = 0; j < side; ++j) {
            const double x = gt_box.x_min + (j + 0.5) / side * gt_box.width();
            const GridSample sx = axis_sample(x, cfg.search_side);
            for (int c = 0; c < 3; ++c) {
                const double v00 = search_crop.at(sy.i0, sx.i0, c), v01 = search_crop.at(sy.i0, sx.i1, c);
                const double v10 = search_crop.at(sy.i1, sx.i0, c), v11 = search_crop.at(sy.i1, sx.i1, c);
                region.at(i, j, c) =
                    (1 - sy.f) * ((1 - sx.f) * v00 + sx.f * v01) + sy.f * ((1 - sx.f) * v10 + sx.f * v11);
            }
        }
    }
    return patchify(region, cfg.patch_size);
}

ReconstructionResult reconstruct_appearance(const Tensor& appearance_outputs, const std::vector<int>& mask_indices,
                                            const ModelParams& params) {
    const ModelConfig& cfg = params.cfg;
    if (!cfg.use_appearance) throw ConfigError("reconstruct_appearance: appearance disabled");
    const int K = cfg.appearance_tokens();
    if (appearance_outputs.rank() != 2 || appearance_outputs.shape[0] != K)
        throw ShapeError("reconstruct_appearance: expected [K, d] appearance outputs");
    std::vector<std::uint8_t> masked(K, 0);
    for (int idx : mask_indices) {
        if (idx < 0 || idx >= K) throw ShapeError("reconstruct_appearance: mask index out of range");
        if (masked[idx]) throw ShapeError("reconstruct_appearance: duplicate mask index");
        masked[idx] = 1;
    }
    const Tensor& pos = params.t("pos_appearance");
    const Tensor& mask_token = params.t("mask_token");
    std::vector<Tensor> rows;
    rows.reserve(K);
    for (int k = 0; k < K; ++k) {
        if (masked[k])
            rows.push_back(add(mask_token, slice_rows(pos, k, 1)));
        else
            rows.push_back(slice_rows(appearance_outputs, k, 1));
    }
    Tensor x = concat_rows(rows);
    BoolMatrix full(K, K);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) full.set(i, j, true);
    for (int l = 0; l < cfg.decoder_layers; ++l)
        x = transformer_block(x, full, params, "dec" + std::to_string(l), nullptr);
    Tensor hidden = layer_norm(x, params.t("dec_ln_g"), params.t("dec_ln_b"));
    Tensor projected = add_rows(matmul(hidden, params.t("dec_out_w")), params.t("dec_out_b"));
    return {projected, hidden};
}

Tensor predict_iou(const Tensor& confidence_output, const ModelParams& params) {
    if (confidence_output.rank() != 2 || confidence_output.shape[0] != 1)
        throw ShapeError("predict_iou: expected [1, d] confidence output");
    Tensor h1 = gelu(add_rows(matmul(confidence_output, params.t("iou1_w")), params.t("iou1_b")));
    Tensor h2 = gelu(add_rows(matmul(h1, params.t("iou2_w")), params.t("iou2_b")));
    return sigmoid(add_rows(matmul(h2, params.t("iou3_w")), params.t("iou3_b")));
}

FrameOutputs run_frame(const ModelParams& params, const Tensor& template_tokens, const Tensor& search_tokens,
                       const AppearanceState& state, const std::vector<TokenizedBox>& traj) {
    FrameOutputs out;
    out.layout = TokenLayout::build(params.cfg);
    Tensor seq = assemble_frame(template_tokens, search_tokens, state, traj, params, out.layout);
    BoolMatrix mask = build_oriented_mask(out.layout, params.cfg.appearance_self_attend);
    out.encoder_out = encoder_forward(seq, mask, params);
    out.logits = decode_coordinate_logits(slice_rows(out.encoder_out, out.layout.command.start, 4), params);
    if (params.cfg.use_appearance)
        out.appearance_out = slice_rows(out.encoder_out, out.layout.appearance.start, out.layout.appearance.len);
    out.confidence_out = slice_rows(out.encoder_out, out.layout.confidence.start, 1);
    out.predicted_iou = predict_iou(out.confidence_out, params);
    return out;
}

// --- checkpoint io -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'O', 'K', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw FormatError("'" + path + "': truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint '" + path + "'");
    out.write(kMagic, 8);
    write_u32(out, kVersion);
    const std::string cfg_text = format_kv_text(params.cfg.to_kv());
    write_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
    out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    write_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, tensor] : params.tensors) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(tensor.shape.size()));
        for (int dim : tensor.shape) write_u32(out, static_cast<std::uint32_t>(dim));
        // Raw doubles; this codebase targets little-endian hosts.
        out.write(reinterpret_cast<const char*>(tensor.data->data()),
                  static_cast<std::streamsize>(tensor.data->size() * sizeof(double)));
    }
    if (!out) throw InputError("write failed for checkpoint '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("'" + path + "': not a checkpoint file");
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw FormatError("'" + path + "': unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t cfg_len = read_u32(in, path);
    std::string cfg_text(cfg_len, '\0');
    in.read(cfg_text.data(), cfg_len);
    if (!in) throw FormatError("'" + path + "': truncated config block");
    std::map<std::string, std::string> kv;
    try {
        kv = parse_kv_text(cfg_text);
    } catch (const ConfigError& e) {
        throw FormatError("'" + path + "': " + std::string(e.what()));
    }
    ModelParams params;
    params.cfg = ModelConfig::from_kv(kv);
    const std::uint32_t n_tensors = read_u32(in, path);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const std::uint32_t name_len = read_u32(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in, path);
        std::vector<int> shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(read_u32(in, path)));
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data->data()),
                static_cast<std::streamsize>(t.data->size() * sizeof(double)));
        if (!in) throw FormatError("'" + path + "': truncated tensor '" + name + "'");
        params.tensors.emplace(std::move(name), std::move(t));
    }
    return params;
}

} // namespace toktrack
