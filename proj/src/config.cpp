// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack/config.hpp"

#include <fstream>
#include <sstream>

#include "toktrack/errors.hpp"
#include "toktrack/kvtext.hpp"

namespace toktrack {

namespace {

std::string interval_mode_name(IntervalMode mode) {
    switch (mode) {
    case IntervalMode::NONE: return "NONE";
    case IntervalMode::FIXED: return "FIXED";
    case IntervalMode::RANDOM: return "RANDOM";
    }
    throw ConfigError("unknown interval mode");
}

IntervalMode interval_mode_from_name(const std::string& v) {
    if (v == "NONE") return IntervalMode::NONE;
    if (v == "FIXED") return IntervalMode::FIXED;
    if (v == "RANDOM") return IntervalMode::RANDOM;
    throw ConfigError("key 'interval_mode': expected NONE, FIXED, or RANDOM, got '" + v + "'");
}

void put_train(std::map<std::string, std::string>& kv, const TrainConfig& t) {
    kv["clip_len"] = std::to_string(t.clip_len);
    kv["reverse_prob"] = fmt_double(t.reverse_prob);
    kv["interval_mode"] = interval_mode_name(t.interval_mode);
    kv["interval"] = std::to_string(t.interval);
    kv["lr_backbone"] = fmt_double(t.lr_backbone);
    kv["lr_other"] = fmt_double(t.lr_other);
    kv["weight_decay"] = fmt_double(t.weight_decay);
    kv["steps"] = std::to_string(t.steps);
    kv["seed"] = std::to_string(t.seed);
    kv["grad_clip"] = fmt_double(t.grad_clip);
    kv["detach_prompts"] = t.detach_prompts ? "true" : "false";
    kv["warmup_steps"] = std::to_string(t.warmup_steps);
    kv["teacher_forcing"] = t.teacher_forcing ? "true" : "false";
    kv["lambda_siou"] = fmt_double(t.weights.siou);
    kv["lambda_mse"] = fmt_double(t.weights.mse);
    kv["lambda_l1"] = fmt_double(t.weights.l1);
}

// Returns true when the key belongs to the training group.
bool take_train(TrainConfig& t, const std::string& key, const std::string& v) {
    if (key == "clip_len") t.clip_len = parse_int(v, key);
    else if (key == "reverse_prob") t.reverse_prob = parse_double(v, key);
    else if (key == "interval_mode") t.interval_mode = interval_mode_from_name(v);
    else if (key == "interval") t.interval = parse_int(v, key);
    else if (key == "lr_backbone") t.lr_backbone = parse_double(v, key);
    else if (key == "lr_other") t.lr_other = parse_double(v, key);
    else if (key == "weight_decay") t.weight_decay = parse_double(v, key);
    else if (key == "steps") t.steps = parse_int(v, key);
    else if (key == "seed") t.seed = parse_u64(v, key);
    else if (key == "grad_clip") t.grad_clip = parse_double(v, key);
    else if (key == "detach_prompts") t.detach_prompts = parse_bool(v, key);
    else if (key == "warmup_steps") t.warmup_steps = parse_int(v, key);
    else if (key == "teacher_forcing") t.teacher_forcing = parse_bool(v, key);
    else if (key == "lambda_siou") t.weights.siou = parse_double(v, key);
    else if (key == "lambda_mse") t.weights.mse = parse_double(v, key);
    else if (key == "lambda_l1") t.weights.l1 = parse_double(v, key);
    else return false;
    return true;
}

void put_synth(std::map<std::string, std::string>& kv, const SyntheticConfig& s) {
    kv["synth_canvas_h"] = std::to_string(s.canvas_h);
    kv["synth_canvas_w"] = std::to_string(s.canvas_w);
    kv["synth_target_kind"] = target_kind_name(s.kind);
    kv["synth_min_size"] = fmt_double(s.min_size);
    kv["synth_max_size"] = fmt_double(s.max_size);
    kv["synth_max_speed"] = fmt_double(s.max_speed);
    kv["synth_accel_sigma"] = fmt_double(s.accel_sigma);
    kv["synth_drift_rate"] = fmt_double(s.drift_rate);
    kv["synth_occluder_start"] = std::to_string(s.occluder_start);
    kv["synth_occluder_duration"] = std::to_string(s.occluder_duration);
    kv["synth_occluder_coverage"] = fmt_double(s.occluder_coverage);
    kv["synth_allow_out_of_view"] = s.allow_out_of_view ? "true" : "false";
    kv["synth_distractors"] = std::to_string(s.distractors);
    kv["synth_noise_sigma"] = fmt_double(s.noise_sigma);
    kv["synth_length"] = std::to_string(s.length);
}

bool take_synth(SyntheticConfig& s, const std::string& key, const std::string& v) {
    if (key == "synth_canvas_h") s.canvas_h = parse_int(v, key);
    else if (key == "synth_canvas_w") s.canvas_w = parse_int(v, key);
    else if (key == "synth_target_kind") s.kind = target_kind_from_name(v);
    else if (key == "synth_min_size") s.min_size = parse_double(v, key);
    else if (key == "synth_max_size") s.max_size = parse_double(v, key);
    else if (key == "synth_max_speed") s.max_speed = parse_double(v, key);
    else if (key == "synth_accel_sigma") s.accel_sigma = parse_double(v, key);
    else if (key == "synth_drift_rate") s.drift_rate = parse_double(v, key);
    else if (key == "synth_occluder_start") s.occluder_start = parse_int(v, key);
    else if (key == "synth_occluder_duration") s.occluder_duration = parse_int(v, key);
    else if (key == "synth_occluder_coverage") s.occluder_coverage = parse_double(v, key);
    else if (key == "synth_allow_out_of_view") s.allow_out_of_view = parse_bool(v, key);
    else if (key == "synth_distractors") s.distractors = parse_int(v, key);
    else if (key == "synth_noise_sigma") s.noise_sigma = parse_double(v, key);
    else if (key == "synth_length") s.length = parse_int(v, key);
    else return false;
    return true;
}

} // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    synth.validate();
    if (gen_sequences < 1) throw ConfigError("gen_sequences must be >= 1");
}

std::map<std::string, std::string> RunConfig::to_kv() const {
    std::map<std::string, std::string> kv = model.to_kv();
    put_train(kv, train);
    put_synth(kv, synth);
    kv["gen_sequences"] = std::to_string(gen_sequences);
    return kv;
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    const std::map<std::string, std::string> model_keys = ModelConfig().to_kv();
    std::map<std::string, std::string> model_kv;
    for (const auto& [key, v] : kv) {
        if (model_keys.count(key)) model_kv[key] = v;
        else if (take_train(cfg.train, key, v)) continue;
        else if (take_synth(cfg.synth, key, v)) continue;
        else if (key == "gen_sequences") cfg.gen_sequences = parse_int(v, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.model = ModelConfig::from_kv(model_kv);
    cfg.validate();
    return cfg;
}

RunConfig parse_run_config(const std::string& text) { return RunConfig::from_kv(parse_kv_text(text)); }

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string format_run_config(const RunConfig& cfg) { return format_kv_text(cfg.to_kv()); }

} // namespace toktrack
