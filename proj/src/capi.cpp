// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include "toktrack.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "toktrack/config.hpp"
#include "toktrack/errors.hpp"
#include "toktrack/eval.hpp"
#include "toktrack/grad_suite.hpp"
#include "toktrack/kvtext.hpp"
#include "toktrack/track.hpp"
#include "toktrack/train.hpp"

namespace fs = std::filesystem;
using namespace toktrack;

extern "C" {
struct ttk_config {
    RunConfig cfg;
};
struct ttk_model {
    ModelParams params;
};
}

namespace {

thread_local std::string g_last_error;

ttk_status fail(ttk_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Maps library exceptions onto status codes; body must not return TTK_OK
// implicitly.
template <typename Fn> ttk_status wrap(Fn&& body) {
    try {
        body();
        return TTK_OK;
    } catch (const ConfigError& e) {
        return fail(TTK_ERR_CONFIG, e.what());
    } catch (const DomainError& e) {
        return fail(TTK_ERR_CONFIG, e.what());
    } catch (const InputError& e) {
        return fail(TTK_ERR_IO, e.what());
    } catch (const FormatError& e) {
        return fail(TTK_ERR_FORMAT, e.what());
    } catch (const NumericError& e) {
        return fail(TTK_ERR_NUMERIC, e.what());
    } catch (const std::exception& e) {
        return fail(TTK_ERR_INTERNAL, e.what());
    }
}

bool require(const void* p, const char* what, ttk_status* st) {
    if (p) return false;
    *st = fail(TTK_ERR_INVALID_ARGUMENT, std::string(what) + " must not be null");
    return true;
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string seq_dir_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%04d", i);
    return buf;
}

std::vector<Sequence> load_dataset(const std::string& root) {
    std::vector<Sequence> dataset;
    for (const std::string& name : list_sequences(root)) dataset.push_back(load_sequence(root + "/" + name));
    if (dataset.empty()) throw InputError("no sequences under '" + root + "'");
    return dataset;
}

void track_dataset_impl(const ModelParams& params, const std::string& dataset_dir,
                        const std::string& results_dir, int jobs) {
    const std::vector<std::string> names = list_sequences(dataset_dir);
    if (names.empty()) throw InputError("no sequences under '" + dataset_dir + "'");
    fs::create_directories(results_dir);
    int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (workers > static_cast<int>(names.size())) workers = static_cast<int>(names.size());

    std::atomic<std::size_t> next{0};
    std::mutex error_lock;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= names.size()) return;
            try {
                Sequence seq = load_sequence(dataset_dir + "/" + names[i]);
                TrackResult res = run_tracker(params, seq.frames, seq.boxes.at(0));
                save_track_result(res, results_dir + "/" + names[i] + ".txt");
            } catch (...) {
                std::lock_guard<std::mutex> hold(error_lock);
                if (!first_error) first_error = std::current_exception();
                next.store(names.size()); // stop handing out work
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

EvalReport evaluate_results(const std::string& dataset_dir, const std::string& results_dir,
                            std::vector<EvalInput>* out_inputs) {
    std::vector<EvalInput> inputs;
    for (const std::string& name : list_sequences(dataset_dir)) {
        Sequence seq = load_sequence(dataset_dir + "/" + name);
        TrackResult res = load_track_result(results_dir + "/" + name + ".txt");
        EvalInput in;
        in.name = name;
        for (const TrackedFrame& f : res.frames) in.preds.push_back(f.box);
        in.gts = seq.boxes;
        in.mean_ms_per_frame = res.mean_ms_per_frame;
        inputs.push_back(std::move(in));
    }
    EvalReport report = evaluate(inputs);
    if (out_inputs) *out_inputs = std::move(inputs);
    return report;
}

// "key=v1,v2 key2=a,b" -> ordered cells of the full cross product.
std::vector<std::map<std::string, std::string>> parse_grid(const std::string& grid) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    std::size_t pos = 0;
    while (pos < grid.size()) {
        while (pos < grid.size() && (grid[pos] == ' ' || grid[pos] == '\t')) ++pos;
        if (pos >= grid.size()) break;
        std::size_t end = grid.find_first_of(" \t", pos);
        if (end == std::string::npos) end = grid.size();
        const std::string token = grid.substr(pos, end - pos);
        pos = end;
        const std::size_t eq = token.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 >= token.size())
            throw ConfigError("ablation grid token '" + token + "' is not key=v1,v2,...");
        const std::string key = token.substr(0, eq);
        std::vector<std::string> values;
        std::size_t vstart = eq + 1;
        while (vstart <= token.size()) {
            std::size_t comma = token.find(',', vstart);
            if (comma == std::string::npos) comma = token.size();
            if (comma == vstart) throw ConfigError("ablation grid key '" + key + "' has an empty value");
            values.push_back(token.substr(vstart, comma - vstart));
            vstart = comma + 1;
        }
        axes.emplace_back(key, std::move(values));
    }
    if (axes.empty()) throw ConfigError("ablation grid is empty");
    std::vector<std::map<std::string, std::string>> cells{{}};
    for (const auto& [key, values] : axes) {
        std::vector<std::map<std::string, std::string>> expanded;
        for (const auto& cell : cells) {
            for (const std::string& v : values) {
                auto next_cell = cell;
                if (!next_cell.emplace(key, v).second)
                    throw ConfigError("ablation grid repeats key '" + key + "'");
                expanded.push_back(std::move(next_cell));
            }
        }
        cells = std::move(expanded);
    }
    return cells;
}

std::string cell_label(const std::map<std::string, std::string>& cell) {
    std::string label;
    for (const auto& [k, v] : cell) {
        if (!label.empty()) label += ",";
        label += k + "=" + v;
    }
    return label;
}

} // namespace

extern "C" {

const char* ttk_last_error(void) { return g_last_error.c_str(); }

const char* ttk_version(void) { return "0.1.0"; }

void ttk_string_free(char* text) { std::free(text); }

ttk_status ttk_config_create(ttk_config** out) {
    ttk_status st = TTK_OK;
    if (require(out, "out", &st)) return st;
    return wrap([&] { *out = new ttk_config{RunConfig{}}; });
}

ttk_status ttk_config_load(const char* path, ttk_config** out) {
    ttk_status st = TTK_OK;
    if (require(path, "path", &st) || require(out, "out", &st)) return st;
    return wrap([&] { *out = new ttk_config{load_run_config(path)}; });
}

ttk_status ttk_config_parse(const char* text, ttk_config** out) {
    ttk_status st = TTK_OK;
    if (require(text, "text", &st) || require(out, "out", &st)) return st;
    return wrap([&] { *out = new ttk_config{parse_run_config(text)}; });
}

ttk_status ttk_config_set(ttk_config* cfg, const char* key, const char* value) {
    ttk_status st = TTK_OK;
    if (require(cfg, "cfg", &st) || require(key, "key", &st) || require(value, "value", &st)) return st;
    return wrap([&] {
        auto kv = cfg->cfg.to_kv();
        if (!kv.count(key)) throw ConfigError("unknown config key '" + std::string(key) + "'");
        kv[key] = value;
        cfg->cfg = RunConfig::from_kv(kv);
    });
}

ttk_status ttk_config_format(const ttk_config* cfg, char** out_text) {
    ttk_status st = TTK_OK;
    if (require(cfg, "cfg", &st) || require(out_text, "out_text", &st)) return st;
    return wrap([&] { *out_text = copy_string(format_run_config(cfg->cfg)); });
}

void ttk_config_destroy(ttk_config* cfg) { delete cfg; }

ttk_status ttk_model_init(const ttk_config* cfg, uint64_t seed, ttk_model** out) {
    ttk_status st = TTK_OK;
    if (require(cfg, "cfg", &st) || require(out, "out", &st)) return st;
    return wrap([&] { *out = new ttk_model{ModelParams::init(cfg->cfg.model, seed)}; });
}

ttk_status ttk_model_load(const char* checkpoint_path, ttk_model** out) {
    ttk_status st = TTK_OK;
    if (require(checkpoint_path, "checkpoint_path", &st) || require(out, "out", &st)) return st;
    return wrap([&] { *out = new ttk_model{load_checkpoint(checkpoint_path)}; });
}

ttk_status ttk_model_save(const ttk_model* model, const char* checkpoint_path) {
    ttk_status st = TTK_OK;
    if (require(model, "model", &st) || require(checkpoint_path, "checkpoint_path", &st)) return st;
    return wrap([&] { save_checkpoint(model->params, checkpoint_path); });
}

void ttk_model_destroy(ttk_model* model) { delete model; }

ttk_status ttk_gen_data(const ttk_config* cfg, uint64_t seed, const char* out_dir) {
    ttk_status st = TTK_OK;
    if (require(cfg, "cfg", &st) || require(out_dir, "out_dir", &st)) return st;
    return wrap([&] {
        cfg->cfg.validate();
        fs::create_directories(out_dir);
        for (int i = 0; i < cfg->cfg.gen_sequences; ++i) {
            Sequence seq = generate_sequence(cfg->cfg.synth, seed + static_cast<std::uint64_t>(i));
            seq.name = seq_dir_name(i);
            save_sequence(seq, std::string(out_dir) + "/" + seq.name);
        }
    });
}

ttk_status ttk_train(ttk_model* model, const ttk_config* cfg, const char* dataset_dir, const char* log_path) {
    ttk_status st = TTK_OK;
    if (require(model, "model", &st) || require(cfg, "cfg", &st) || require(dataset_dir, "dataset_dir", &st))
        return st;
    return wrap([&] {
        const std::vector<Sequence> dataset = load_dataset(dataset_dir);
        if (log_path) {
            std::ofstream log(log_path);
            if (!log) throw InputError("cannot write loss log '" + std::string(log_path) + "'");
            train_loop(dataset, model->params, cfg->cfg.train, &log);
        } else {
            train_loop(dataset, model->params, cfg->cfg.train, nullptr);
        }
    });
}

ttk_status ttk_track_sequence(const ttk_model* model, const char* sequence_dir, const char* result_path,
                              double* out_mean_ms) {
    ttk_status st = TTK_OK;
    if (require(model, "model", &st) || require(sequence_dir, "sequence_dir", &st) ||
        require(result_path, "result_path", &st))
        return st;
    return wrap([&] {
        Sequence seq = load_sequence(sequence_dir);
        TrackResult res = run_tracker(model->params, seq.frames, seq.boxes.at(0));
        save_track_result(res, result_path);
        if (out_mean_ms) *out_mean_ms = res.mean_ms_per_frame;
    });
}

ttk_status ttk_track_dataset(const ttk_model* model, const char* dataset_dir, const char* results_dir,
                             int jobs) {
    ttk_status st = TTK_OK;
    if (require(model, "model", &st) || require(dataset_dir, "dataset_dir", &st) ||
        require(results_dir, "results_dir", &st))
        return st;
    return wrap([&] { track_dataset_impl(model->params, dataset_dir, results_dir, jobs); });
}

ttk_status ttk_evaluate(const char* dataset_dir, const char* results_dir, const char* metrics_path,
                        const char* curve_path, char** out_report) {
    ttk_status st = TTK_OK;
    if (require(dataset_dir, "dataset_dir", &st) || require(results_dir, "results_dir", &st)) return st;
    return wrap([&] {
        std::vector<EvalInput> inputs;
        EvalReport report = evaluate_results(dataset_dir, results_dir, &inputs);
        if (metrics_path) write_metrics_tsv(report, metrics_path);
        if (curve_path) write_curve_tsv(inputs, curve_path);
        if (out_report) *out_report = copy_string(format_report(report));
    });
}

ttk_status ttk_grad_check(uint64_t seed, int inputs, double tolerance, char** out_report, int* out_passed) {
    return wrap([&] {
        if (inputs < 1) throw ConfigError("grad check needs at least one input per op");
        if (!(tolerance >= 0.0)) throw ConfigError("grad check tolerance must be >= 0");
        GradSuiteResult res = run_grad_suite(seed, inputs, tolerance);
        if (out_report) *out_report = copy_string(format_grad_report(res));
        if (out_passed) *out_passed = res.passed() ? 1 : 0;
    });
}

ttk_status ttk_ablate(const ttk_config* cfg, const char* grid, const char* dataset_dir, const char* out_dir,
                      char** out_table) {
    ttk_status st = TTK_OK;
    if (require(cfg, "cfg", &st) || require(grid, "grid", &st) || require(dataset_dir, "dataset_dir", &st) ||
        require(out_dir, "out_dir", &st))
        return st;
    return wrap([&] {
        const auto cells = parse_grid(grid);
        const std::vector<Sequence> dataset = load_dataset(dataset_dir);
        fs::create_directories(out_dir);
        std::string table = "cell\tao\tsr50\tsr75\tauc\tp\tp_norm\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto kv = cfg->cfg.to_kv();
            for (const auto& [k, v] : cells[i]) {
                if (!kv.count(k)) throw ConfigError("unknown config key '" + k + "' in ablation grid");
                kv[k] = v;
            }
            const RunConfig cell_cfg = RunConfig::from_kv(kv);
            const std::string cell_dir = std::string(out_dir) + "/cell_" + std::to_string(i);
            fs::create_directories(cell_dir);
            ModelParams params = ModelParams::init(cell_cfg.model, cell_cfg.train.seed);
            {
                std::ofstream log(cell_dir + "/loss_log.tsv");
                train_loop(dataset, params, cell_cfg.train, &log);
            }
            save_checkpoint(params, cell_dir + "/checkpoint.bin");
            track_dataset_impl(params, dataset_dir, cell_dir + "/results", 1);
            EvalReport report = evaluate_results(dataset_dir, cell_dir + "/results", nullptr);
            write_metrics_tsv(report, cell_dir + "/metrics.tsv");
            char row[256];
            std::snprintf(row, sizeof(row), "%s\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n",
                          cell_label(cells[i]).c_str(), report.ao, report.sr50, report.sr75, report.auc,
                          report.p, report.p_norm);
            table += row;
        }
        std::ofstream summary(std::string(out_dir) + "/ablation.tsv");
        if (!summary) throw InputError("cannot write ablation summary under '" + std::string(out_dir) + "'");
        summary << table;
        if (out_table) *out_table = copy_string(table);
    });
}

} // extern "C"
