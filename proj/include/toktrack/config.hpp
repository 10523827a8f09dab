// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#pragma once

#include <map>
#include <string>

#include "toktrack/data.hpp"
#include "toktrack/model.hpp"
#include "toktrack/train.hpp"

namespace toktrack {

// Every run option in one flat "key = value" space: model keys as in
// ModelConfig::to_kv, training keys named after TrainConfig fields (loss
// weights as lambda_siou / lambda_mse / lambda_l1, interval_mode split into
// the mode name plus an interval key), synthetic-data keys with a synth_
// prefix, and gen_sequences for dataset generation. Unknown keys are
// rejected.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SyntheticConfig synth;
    int gen_sequences = 8;

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static RunConfig from_kv(const std::map<std::string, std::string>& kv);
};

RunConfig parse_run_config(const std::string& text);
// InputError if the file cannot be read; ConfigError on bad content.
RunConfig load_run_config(const std::string& path);
// Full key set, parseable by parse_run_config.
std::string format_run_config(const RunConfig& cfg);

} // namespace toktrack
