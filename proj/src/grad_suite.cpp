// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/grad_suite.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "toktrack/geometry.hpp"
#include "toktrack/loss.hpp"
#include "toktrack/model.hpp"
#include "toktrack/rng.hpp"
#include "toktrack/tensor.hpp"

namespace toktrack {

namespace {

Tensor randn(Rng& rng, int r, int c, double scale = 1.0) {
    Tensor t({r, c});
    for (double& v : *t.data) v = rng.normal() * scale;
    return t;
}

// Weighted scalarization: sum_all alone is blind to directions that preserve
// totals (softmax rows, layer_norm rows), so project onto a random constant.
Tensor dot_scalar(const Tensor& y, const Tensor& w) { return sum_all(mul(y, w)); }

ModelConfig suite_cfg() {
    ModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.encoder_layers = 1;
    cfg.heads = 2;
    cfg.patch_size = 4;
    cfg.template_side = 8;
    cfg.search_side = 8;
    cfg.vocab.size = 8;
    cfg.trajectory_len = 1;
    cfg.decoder_layers = 1;
    return cfg;
}

BoolMatrix random_mask(Rng& rng, int rows, int cols) {
    BoolMatrix mask(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) mask.set(i, j, rng.bernoulli(0.7));
        mask.set(i, rng.range_int(0, cols - 1), true); // no empty softmax row
    }
    return mask;
}

Box random_box(Rng& rng) {
    const double x0 = rng.uniform(0.05, 0.4);
    const double y0 = rng.uniform(0.05, 0.4);
    return Box{x0, y0, x0 + rng.uniform(0.2, 0.5), y0 + rng.uniform(0.2, 0.5)};
}

using CheckFn = std::function<double(Rng&)>;

double check_matmul(Rng& rng) {
    const int m = rng.range_int(2, 5), k = rng.range_int(2, 5), n = rng.range_int(2, 5);
    Tensor a = randn(rng, m, k), b = randn(rng, k, n), w = randn(rng, m, n);
    double err = grad_check([&](const Tensor& t) { return dot_scalar(matmul(t, b), w); }, a);
    err = std::max(err, grad_check([&](const Tensor& t) { return dot_scalar(matmul(a, t), w); }, b));
    return err;
}

double check_softmax(Rng& rng) {
    const int r = rng.range_int(2, 5), c = rng.range_int(2, 8);
    Tensor x = randn(rng, r, c), w = randn(rng, r, c);
    return grad_check([&](const Tensor& t) { return dot_scalar(softmax(t), w); }, x);
}

double check_layer_norm(Rng& rng) {
    const int r = rng.range_int(2, 5), c = rng.range_int(3, 8);
    Tensor x = randn(rng, r, c), w = randn(rng, r, c);
    Tensor gamma({1, c}), beta = randn(rng, 1, c);
    for (double& v : *gamma.data) v = rng.uniform(0.5, 1.5);
    double err = grad_check([&](const Tensor& t) { return dot_scalar(layer_norm(t, gamma, beta), w); }, x);
    err = std::max(err, grad_check([&](const Tensor& t) { return dot_scalar(layer_norm(x, t, beta), w); }, gamma));
    err = std::max(err, grad_check([&](const Tensor& t) { return dot_scalar(layer_norm(x, gamma, t), w); }, beta));
    return err;
}

double check_gelu(Rng& rng) {
    const int r = rng.range_int(2, 5), c = rng.range_int(2, 8);
    Tensor x = randn(rng, r, c), w = randn(rng, r, c);
    return grad_check([&](const Tensor& t) { return dot_scalar(gelu(t), w); }, x);
}

double check_masked_attention(Rng& rng) {
    const int nq = rng.range_int(2, 5), nk = rng.range_int(2, 5), dk = rng.range_int(2, 4);
    const int dv = rng.range_int(2, 4);
    Tensor q = randn(rng, nq, dk), k = randn(rng, nk, dk), v = randn(rng, nk, dv);
    Tensor w = randn(rng, nq, dv);
    BoolMatrix mask = random_mask(rng, nq, nk);
    double err = grad_check([&](const Tensor& t) { return dot_scalar(masked_attention(t, k, v, mask), w); }, q);
    err = std::max(err,
                   grad_check([&](const Tensor& t) { return dot_scalar(masked_attention(q, t, v, mask), w); }, k));
    err = std::max(err,
                   grad_check([&](const Tensor& t) { return dot_scalar(masked_attention(q, k, t, mask), w); }, v));
    return err;
}

double check_encoder_block(Rng& rng) {
    const ModelConfig cfg = suite_cfg();
    ModelParams params = ModelParams::init(cfg, rng.next_u64());
    const int tokens = rng.range_int(5, 9);
    Tensor x = randn(rng, tokens, cfg.embed_dim, 0.5), w = randn(rng, tokens, cfg.embed_dim);
    BoolMatrix mask = random_mask(rng, tokens, tokens);
    double err = grad_check([&](const Tensor& t) { return dot_scalar(encoder_forward(t, mask, params), w); }, x);
    auto with_param = [&](const char* name) {
        return grad_check(
            [&, name](const Tensor& t) {
                ModelParams p2 = params;
                p2.tensors[name] = t;
                return dot_scalar(encoder_forward(x, mask, p2), w);
            },
            params.t(name));
    };
    err = std::max(err, with_param("enc0_q_w"));
    err = std::max(err, with_param("enc0_mlp1_w"));
    err = std::max(err, with_param("final_ln_g"));
    return err;
}

double check_reconstruction_decoder(Rng& rng) {
    const ModelConfig cfg = suite_cfg();
    ModelParams params = ModelParams::init(cfg, rng.next_u64());
    const int k_tokens = cfg.appearance_tokens();
    Tensor z = randn(rng, k_tokens, cfg.embed_dim, 0.5);
    Tensor w = randn(rng, k_tokens, cfg.recon_width());
    std::vector<int> masked = rng.sample_without_replacement(k_tokens, k_tokens / 2);
    auto project = [&](const Tensor& t, const ModelParams& p) {
        return dot_scalar(reconstruct_appearance(t, masked, p).projected, w);
    };
    double err = grad_check([&](const Tensor& t) { return project(t, params); }, z);
    auto with_param = [&](const char* name) {
        return grad_check(
            [&, name](const Tensor& t) {
                ModelParams p2 = params;
                p2.tensors[name] = t;
                return project(z, p2);
            },
            params.t(name));
    };
    err = std::max(err, with_param("mask_token"));
    err = std::max(err, with_param("dec0_v_w"));
    err = std::max(err, with_param("dec_out_w"));
    return err;
}

double check_iou_perceptron(Rng& rng) {
    const ModelConfig cfg = suite_cfg();
    ModelParams params = ModelParams::init(cfg, rng.next_u64());
    Tensor conf = randn(rng, 1, cfg.embed_dim);
    double err = grad_check([&](const Tensor& t) { return predict_iou(t, params); }, conf);
    auto with_param = [&](const char* name) {
        return grad_check(
            [&, name](const Tensor& t) {
                ModelParams p2 = params;
                p2.tensors[name] = t;
                return predict_iou(conf, p2);
            },
            params.t(name));
    };
    err = std::max(err, with_param("iou1_w"));
    err = std::max(err, with_param("iou3_w"));
    err = std::max(err, with_param("iou3_b"));
    return err;
}

double check_siou(Rng& rng) {
    const Box gt = random_box(rng);
    const Box pred = random_box(rng);
    Tensor corners({1, 4});
    (*corners.data)[0] = pred.x_min;
    (*corners.data)[1] = pred.y_min;
    (*corners.data)[2] = pred.x_max;
    (*corners.data)[3] = pred.y_max;
    return grad_check([&](const Tensor& t) { return siou_loss_graph(t, gt); }, corners);
}

double check_cross_entropy(Rng& rng) {
    const int v = rng.range_int(5, 12);
    Tensor logits = randn(rng, 4, v);
    std::vector<int> targets(4);
    for (int& t : targets) t = rng.range_int(0, v - 1);
    return grad_check([&](const Tensor& t) { return cross_entropy(t, targets); }, logits);
}

double check_mse(Rng& rng) {
    const int k = rng.range_int(2, 5), d = rng.range_int(2, 6);
    Tensor recon = randn(rng, k, d), target = randn(rng, k, d), prev = randn(rng, k, d);
    const bool visible = rng.bernoulli(0.5);
    return grad_check([&](const Tensor& t) { return reconstruction_mse(t, target, prev, visible); }, recon);
}

double check_l1(Rng& rng) {
    // Keep the prediction away from |x - a|'s kink so central differences hold.
    const double actual = rng.uniform(0.1, 0.45);
    Tensor pred({1, 1});
    (*pred.data)[0] = actual + rng.uniform(0.1, 0.45);
    return grad_check([&](const Tensor& t) { return iou_l1(t, actual); }, pred);
}

double check_total_loss(Rng& rng) {
    VocabConfig vocab;
    vocab.size = 8;
    LossWeights weights;
    const Box gt = random_box(rng);
    TokenizedBox gt_tokens = tokenize_box(gt, vocab);
    Tensor logits = randn(rng, 4, vocab.size);
    const int k = 3, d = 4;
    Tensor recon = randn(rng, k, d), target = randn(rng, k, d), prev = randn(rng, k, d);
    Tensor pred_iou({1, 1});
    (*pred_iou.data)[0] = rng.uniform(0.55, 0.9);
    const double actual_iou = rng.uniform(0.1, 0.45);
    auto total = [&](const Tensor& lg, const Tensor& rc, const Tensor& pi) {
        Tensor ce = coordinate_ce(lg, gt_tokens);
        Tensor s = siou_loss_graph(soft_argmax_box(lg, vocab), gt);
        Tensor m = reconstruction_mse(rc, target, prev, true);
        Tensor l = iou_l1(pi, actual_iou);
        return total_frame_loss(ce, s, m, l, weights).total;
    };
    double err = grad_check([&](const Tensor& t) { return total(t, recon, pred_iou); }, logits);
    err = std::max(err, grad_check([&](const Tensor& t) { return total(logits, t, pred_iou); }, recon));
    err = std::max(err, grad_check([&](const Tensor& t) { return total(logits, recon, t); }, pred_iou));
    return err;
}

} // namespace

bool GradSuiteResult::passed() const {
    for (const GradCheckEntry& e : entries)
        if (!e.passed) return false;
    return !entries.empty();
}

GradSuiteResult run_grad_suite(std::uint64_t seed, int inputs, double tolerance) {
    const std::pair<const char*, CheckFn> checks[] = {
        {"matmul", check_matmul},
        {"softmax", check_softmax},
        {"layer_norm", check_layer_norm},
        {"gelu", check_gelu},
        {"masked_attention", check_masked_attention},
        {"encoder_block", check_encoder_block},
        {"reconstruction_decoder", check_reconstruction_decoder},
        {"iou_perceptron", check_iou_perceptron},
        {"siou_loss", check_siou},
        {"cross_entropy", check_cross_entropy},
        {"reconstruction_mse", check_mse},
        {"iou_l1", check_l1},
        {"total_loss", check_total_loss},
    };
    GradSuiteResult result;
    result.tolerance = tolerance;
    Rng rng(seed);
    for (const auto& [name, fn] : checks) {
        Rng sub = rng.split();
        GradCheckEntry entry;
        entry.op = name;
        entry.inputs = inputs;
        for (int i = 0; i < inputs; ++i) entry.max_rel_err = std::max(entry.max_rel_err, fn(sub));
        entry.passed = entry.max_rel_err <= tolerance;
        result.entries.push_back(entry);
    }
    return result;
}

std::string format_grad_report(const GradSuiteResult& result) {
    std::string out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s %6s %12s  %s\n", "op", "inputs", "max_rel_err", "status");
    out += line;
    for (const GradCheckEntry& e : result.entries) {
        std::snprintf(line, sizeof(line), "%-24s %6d %12.3e  %s\n", e.op.c_str(), e.inputs, e.max_rel_err,
                      e.passed ? "ok" : "FAIL");
        out += line;
    }
    std::snprintf(line, sizeof(line), "grad suite: %s (tolerance %g)\n", result.passed() ? "PASS" : "FAIL",
                  result.tolerance);
    out += line;
    return out;
}

} // namespace toktrack
