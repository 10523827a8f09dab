// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "toktrack/errors.hpp"

namespace toktrack {

std::string interval_mode_text(IntervalMode mode, int interval) {
    switch (mode) {
    case IntervalMode::NONE: return "NONE";
    case IntervalMode::FIXED: return "FIXED(" + std::to_string(interval) + ")";
    case IntervalMode::RANDOM: return "RANDOM(" + std::to_string(interval) + ")";
    }
    throw ConfigError("interval_mode_text: unknown mode");
}

void parse_interval_mode(const std::string& text, IntervalMode* mode, int* interval) {
    if (text == "NONE") {
        *mode = IntervalMode::NONE;
        *interval = 1;
        return;
    }
    for (auto [name, m] : {std::pair<const char*, IntervalMode>{"FIXED", IntervalMode::FIXED},
                           {"RANDOM", IntervalMode::RANDOM}}) {
        const std::string prefix = std::string(name) + "(";
        if (text.rfind(prefix, 0) == 0 && text.back() == ')') {
            const std::string num = text.substr(prefix.size(), text.size() - prefix.size() - 1);
            std::size_t pos = 0;
            int k = 0;
            try {
                k = std::stoi(num, &pos);
            } catch (const std::exception&) {
                throw ConfigError("interval_mode: bad stride in '" + text + "'");
            }
            if (pos != num.size() || k < 1) throw ConfigError("interval_mode: bad stride in '" + text + "'");
            *mode = m;
            *interval = k;
            return;
        }
    }
    throw ConfigError("interval_mode: expected NONE, FIXED(k), or RANDOM(max), got '" + text + "'");
}

void TrainConfig::validate() const {
    if (clip_len < 2) throw ConfigError("clip_len must be >= 2");
    if (reverse_prob < 0.0 || reverse_prob > 1.0) throw ConfigError("reverse_prob must be in [0,1]");
    if (interval < 1) throw ConfigError("interval must be >= 1");
    if (lr_backbone <= 0.0 || lr_other <= 0.0) throw ConfigError("learning rates must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
    // Full backprop through time is only for short-clip tests.
    if (!detach_prompts && clip_len > 4)
        throw ConfigError("detach_prompts=false requires clip_len <= 4");
    weights.validate();
}

Clip reverse_clip(const Clip& clip) {
    Clip out = clip;
    std::reverse(out.frames.begin(), out.frames.end());
    std::reverse(out.boxes.begin(), out.boxes.end());
    std::reverse(out.visibility.begin(), out.visibility.end());
    return out;
}

Clip sample_clip(const std::vector<Sequence>& dataset, const TrainConfig& cfg, Rng& rng) {
    if (dataset.empty()) throw InputError("sample_clip: empty dataset");
    const int T = cfg.clip_len;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const Sequence& seq = dataset[static_cast<std::size_t>(rng.below(dataset.size()))];
        int stride = 1;
        if (cfg.interval_mode == IntervalMode::FIXED) stride = cfg.interval;
        if (cfg.interval_mode == IntervalMode::RANDOM) stride = rng.range_int(1, cfg.interval);
        const int span = (T - 1) * stride + 1;
        if (seq.size() < span) continue; // too short for this stride: resample
        const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(seq.size() - span + 1)));
        Clip clip;
        for (int j = 0; j < T; ++j) {
            const int i = start + j * stride;
            clip.frames.push_back(seq.frames[i]);
            clip.boxes.push_back(seq.boxes[i]);
            clip.visibility.push_back(seq.visibility[i]);
        }
        if (rng.bernoulli(cfg.reverse_prob)) clip = reverse_clip(clip);
        return clip;
    }
    throw InputError("sample_clip: no sequence admits a " + std::to_string(T) + "-frame window");
}

std::vector<int> mask_selection(int k, double ratio, Rng& rng) {
    if (k < 0) throw ConfigError("mask_selection: negative token count");
    if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("mask_selection: ratio must be in [0,1)");
    const int count = static_cast<int>(std::floor(ratio * k));
    return rng.sample_without_replacement(k, count);
}

double clip_gradients(ModelParams& params, double max_norm) {
    double sq = 0.0;
    for (auto& [name, t] : params.tensors) {
        if (!t.grad) continue;
        for (double g : *t.grad) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && std::isfinite(norm) && norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& [name, t] : params.tensors) {
            if (!t.grad) continue;
            for (double& g : *t.grad) g *= factor;
        }
    }
    return norm;
}

double warmup_scale(int step_index, int warmup_steps) {
    if (warmup_steps <= 0) return 1.0;
    return std::min(1.0, (step_index + 1) / static_cast<double>(warmup_steps));
}

bool optimizer_step(ModelParams& params, AdamState& opt, const TrainConfig& cfg, double lr_scale) {
    for (auto& [name, t] : params.tensors) {
        if (!t.grad) t.ensure_grad();
        for (double g : *t.grad)
            if (!std::isfinite(g)) return false;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++opt.step_count;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.step_count));
    for (auto& [name, t] : params.tensors) {
        const double lr = lr_scale * (ModelParams::is_backbone(name) ? cfg.lr_backbone : cfg.lr_other);
        std::vector<double>& m = opt.m_buf[name];
        std::vector<double>& v = opt.v_buf[name];
        if (m.size() != static_cast<std::size_t>(t.numel())) {
            m.assign(t.numel(), 0.0);
            v.assign(t.numel(), 0.0);
        }
        std::vector<double>& w = *t.data;
        const std::vector<double>& g = *t.grad;
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] *= 1.0 - lr * cfg.weight_decay; // decoupled decay, pre-update
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
    return true;
}

SearchFrame scaled_window(const Box& box, double scale) {
    const double side = std::max(std::max(box.width(), box.height()) * scale, 1.0);
    return SearchFrame{box.center_x(), box.center_y(), side};
}

StepReport rollout_train_step(const Clip& clip, ModelParams& params, const TrainConfig& cfg, AdamState& opt,
                              Rng& rng, double lr_scale, RolloutCapture* capture) {
    cfg.validate();
    if (clip.size() < 2) throw InputError("rollout_train_step: clip needs at least 2 frames");
    if (clip.boxes.size() != clip.frames.size() || clip.visibility.size() != clip.frames.size())
        throw InputError("rollout_train_step: clip fields disagree in length");
    const ModelConfig& mc = params.cfg;
    StepReport report;
    params.zero_grads();
    Graph graph;
    try {
        GraphScope scope(graph);
        const Box& box0 = clip.boxes[0];
        if (!(box0.width() > 0.0) || !(box0.height() > 0.0))
            throw InputError("rollout_train_step: frame-0 box must have positive area");
        const Image& frame0 = clip.frames[0];
        Image tmpl_crop =
            crop_resample(frame0, scaled_window(box0, mc.template_scale_factor), mc.template_side,
                          frame0.mean_pixel());
        Tensor z0 = patchify_embed(tmpl_crop, params, "pos_template");
        AppearanceState state;
        if (mc.use_appearance) state.appearance = z0; // appearance initializes as the template
        state.confidence_embed = params.t("conf_embed");
        std::vector<Box> window(static_cast<std::size_t>(mc.trajectory_len), box0);
        Tensor last_pixel_target;
        if (mc.use_appearance && mc.reconstruction_target == ReconTarget::PIXEL)
            last_pixel_target = patchify(tmpl_crop, mc.patch_size);
        std::vector<Tensor> totals;
        for (int t = 1; t < clip.size(); ++t) {
            const SearchFrame sf = scaled_window(window.back(), mc.search_scale_factor);
            Image crop = crop_resample(clip.frames[t], sf, mc.search_side, clip.frames[t].mean_pixel());
            Tensor st = patchify_embed(crop, params, "pos_search");
            std::vector<TokenizedBox> traj;
            if (mc.use_trajectory)
                for (const Box& b : window) traj.push_back(tokenize_box(to_search_frame(b, sf), mc.vocab));
            FrameOutputs out = run_frame(params, z0, st, state, traj);

            const Box& gt_img = clip.boxes[t];
            const Box gt_s = to_search_frame(gt_img, sf);
            const bool gt_usable = gt_s.width() > 0.0 && gt_s.height() > 0.0;
            const bool visible = clip.visibility[t] >= 0.5;

            Tensor ce = coordinate_ce(out.logits, tokenize_box(gt_s, mc.vocab));
            Tensor siou =
                gt_usable ? siou_loss_graph(soft_argmax_box(out.logits, mc.vocab), gt_s) : Tensor::scalar(0.0);

            const Box pred_img = from_search_frame(detokenize_box(argmax_box(out.logits), mc.vocab), sf);
            const double actual = gt_usable ? iou(pred_img, gt_img.canonical()) : 0.0;
            Tensor l1 = iou_l1(out.predicted_iou, actual);

            Tensor mse = Tensor::scalar(0.0);
            ReconstructionResult recon;
            if (mc.use_appearance) {
                const std::vector<int> masked = mask_selection(mc.appearance_tokens(), mc.mask_ratio, rng);
                if (capture != nullptr) capture->mask_counts.push_back(static_cast<int>(masked.size()));
                recon = reconstruct_appearance(out.appearance_out, masked, params);
                const bool use_search_target = visible && gt_usable;
                if (mc.reconstruction_target == ReconTarget::FEATURE) {
                    Tensor search_feature =
                        slice_rows(out.encoder_out, out.layout.search.start, out.layout.search.len);
                    Tensor target = state.appearance;
                    if (use_search_target) target = reconstruction_target_feature(search_feature, gt_s, mc);
                    mse = reconstruction_mse(recon.projected, target, state.appearance, use_search_target);
                    if (capture != nullptr) {
                        capture->targets.push_back(target.clone_data());
                        capture->prev_appearance.push_back(state.appearance.clone_data());
                        capture->search_features.push_back(search_feature.clone_data());
                        capture->gt_search.push_back(gt_s);
                        capture->used_search_target.push_back(use_search_target);
                    }
                } else {
                    Tensor target = last_pixel_target;
                    if (use_search_target) target = reconstruction_target_pixel(crop, gt_s, mc);
                    mse = reconstruction_mse(recon.projected, target, last_pixel_target, use_search_target);
                    if (capture != nullptr) {
                        capture->targets.push_back(target.clone_data());
                        capture->prev_appearance.push_back(last_pixel_target.clone_data());
                        capture->gt_search.push_back(gt_s);
                        capture->used_search_target.push_back(use_search_target);
                    }
                    if (use_search_target) last_pixel_target = target;
                }
            }

            FrameLoss fl = total_frame_loss(ce, siou, mse, l1, cfg.weights);
            fl.report.predicted_iou = out.predicted_iou.value();
            fl.report.actual_iou = actual;
            fl.report.visible = visible;
            report.frames.push_back(fl.report);
            totals.push_back(fl.total);

            window.erase(window.begin());
            window.push_back(cfg.teacher_forcing ? gt_img : pred_img);
            if (mc.use_appearance) {
                Tensor next = mc.propagate_encoder_appearance
                                  ? out.appearance_out
                                  : (mc.reconstruction_target == ReconTarget::FEATURE ? recon.projected
                                                                                      : recon.hidden);
                state.appearance = cfg.detach_prompts ? next.detach() : next;
            }
            state.confidence_embed = cfg.detach_prompts ? out.confidence_out.detach() : out.confidence_out;
            state.last_predicted_iou = out.predicted_iou.value();
        }
        Tensor sum = totals[0];
        for (std::size_t i = 1; i < totals.size(); ++i) sum = add(sum, totals[i]);
        Tensor mean_loss = scale(sum, 1.0 / static_cast<double>(totals.size()));
        graph.backward(mean_loss);
    } catch (const NumericError&) {
        report.aborted = true;
        params.zero_grads();
        return report;
    }
    for (const FrameLossReport& f : report.frames) {
        report.ce += f.ce;
        report.siou += f.siou;
        report.mse += f.mse;
        report.l1 += f.l1;
        report.total += f.total;
    }
    const double inv = 1.0 / static_cast<double>(report.frames.size());
    report.ce *= inv;
    report.siou *= inv;
    report.mse *= inv;
    report.l1 *= inv;
    report.total *= inv;
    report.grad_norm = clip_gradients(params, cfg.grad_clip);
    if (!optimizer_step(params, opt, cfg, lr_scale)) report.skipped = true;
    return report;
}

TrainResult train_loop(const std::vector<Sequence>& dataset, ModelParams& params, const TrainConfig& cfg,
                       std::ostream* log_stream) {
    cfg.validate();
    params.cfg.validate();
    if (dataset.empty()) throw InputError("train_loop: empty dataset");
    params.set_requires_grad(true);
    AdamState opt;
    Rng rng(cfg.seed);
    TrainResult result;
    for (int step = 0; step < cfg.steps; ++step) {
        Clip clip = sample_clip(dataset, cfg, rng);
        const double lrs = warmup_scale(step, cfg.warmup_steps);
        StepReport rep = rollout_train_step(clip, params, cfg, opt, rng, lrs);
        if (rep.aborted) {
            ++result.aborted_steps;
            continue;
        }
        if (rep.skipped) ++result.skipped_steps;
        TrainLogEntry entry{step, rep.ce, rep.siou, rep.mse, rep.l1, rep.total, lrs * cfg.lr_other};
        result.log.push_back(entry);
        if (log_stream != nullptr) {
            char line[256];
            std::snprintf(line, sizeof(line), "%d\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n", entry.step,
                          entry.ce, entry.siou, entry.mse, entry.l1, entry.total, entry.lr);
            *log_stream << line;
        }
    }
    params.set_requires_grad(false);
    return result;
}

} // namespace toktrack
