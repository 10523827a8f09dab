// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "toktrack.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error, 3 numeric.
int exit_code_for(ttk_status st) {
    switch (st) {
    case TTK_OK: return 0;
    case TTK_ERR_INVALID_ARGUMENT:
    case TTK_ERR_CONFIG: return 2;
    case TTK_ERR_NUMERIC: return 3;
    default: return 1;
    }
}

[[noreturn]] void die(ttk_status st) {
    std::fprintf(stderr, "error: %s\n", ttk_last_error());
    std::exit(exit_code_for(st));
}

void check(ttk_status st) {
    if (st != TTK_OK) die(st);
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Every run records its invocation before any output is produced; the
// timestamps live here so other artifacts stay byte-reproducible.
void manifest_start(const std::string& out_dir, const std::string& command, const std::string& config_path,
                    std::uint64_t seed) {
    fs::create_directories(out_dir);
    std::ofstream m(out_dir + "/manifest.txt");
    if (!m) {
        std::fprintf(stderr, "error: cannot write manifest under '%s'\n", out_dir.c_str());
        std::exit(1);
    }
    m << "command = " << command << "\n";
    m << "config = " << (config_path.empty() ? "(defaults)" : config_path) << "\n";
    m << "seed = " << seed << "\n";
    m << "version = " << ttk_version() << "\n";
    m << "out = " << out_dir << "\n";
    m << "start = " << utc_now() << "\n";
}

void manifest_end(const std::string& out_dir) {
    std::ofstream m(out_dir + "/manifest.txt", std::ios::app);
    m << "end = " << utc_now() << "\n";
    m << "status = ok\n";
}

ttk_config* load_config_or_die(const std::string& path) {
    ttk_config* cfg = nullptr;
    check(path.empty() ? ttk_config_create(&cfg) : ttk_config_load(path.c_str(), &cfg));
    return cfg;
}

// The CLI reads config values back through the formatted text so it only
// depends on the C interface.
std::string config_value(const ttk_config* cfg, const std::string& key) {
    char* text = nullptr;
    check(ttk_config_format(cfg, &text));
    std::string all(text);
    ttk_string_free(text);
    const std::string needle = key + " = ";
    std::size_t pos = 0;
    while (pos < all.size()) {
        std::size_t nl = all.find('\n', pos);
        if (nl == std::string::npos) nl = all.size();
        const std::string line = all.substr(pos, nl - pos);
        if (line.rfind(needle, 0) == 0) return line.substr(needle.size());
        pos = nl + 1;
    }
    return "";
}

std::uint64_t resolve_seed(ttk_config* cfg, bool seed_given, std::uint64_t seed_flag) {
    if (seed_given) {
        check(ttk_config_set(cfg, "seed", std::to_string(seed_flag).c_str()));
        return seed_flag;
    }
    const std::string text = config_value(cfg, "seed");
    return text.empty() ? 0 : std::stoull(text);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        std::fprintf(stderr, "error: cannot write '%s'\n", path.c_str());
        std::exit(1);
    }
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-vocabulary tracker pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir, dataset_dir, results_dir, sequence_dir, checkpoint_path;
    std::uint64_t seed_flag = 0;
    int jobs = 0;
    int gc_inputs = 10;
    double gc_tolerance = 1e-5;
    std::vector<std::string> grid_tokens;

    auto add_common = [&](CLI::App* cmd, bool need_out) {
        cmd->add_option("--config", config_path, "flat key = value config file");
        cmd->add_option("--seed", seed_flag, "run seed (overrides the config's seed key)");
        auto* out_opt = cmd->add_option("--out", out_dir, "output directory");
        if (need_out) out_opt->required();
    };

    CLI::App* gen = app.add_subcommand("gen-data", "write synthetic sequences");
    add_common(gen, true);

    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    add_common(train, true);
    train->add_option("--dataset", dataset_dir, "dataset root directory")->required();

    CLI::App* track = app.add_subcommand("track", "run the tracker, writing result files");
    add_common(track, true);
    track->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    track->add_option("--dataset", dataset_dir, "track every sequence under this root");
    track->add_option("--sequence", sequence_dir, "track one sequence directory");
    track->add_option("--jobs", jobs, "parallel workers (0 = hardware threads)");

    CLI::App* eval = app.add_subcommand("eval", "score result files against ground truth");
    add_common(eval, true);
    eval->add_option("--dataset", dataset_dir, "ground-truth dataset root")->required();
    eval->add_option("--results", results_dir, "directory of track result files")->required();

    CLI::App* gradcheck = app.add_subcommand("grad-check", "autodiff vs central differences");
    add_common(gradcheck, false);
    gradcheck->add_option("--inputs", gc_inputs, "random instances per op");
    gradcheck->add_option("--tolerance", gc_tolerance, "max relative error");

    CLI::App* ablate = app.add_subcommand("ablate", "config-grid training and evaluation");
    add_common(ablate, true);
    ablate->add_option("--dataset", dataset_dir, "dataset root directory")->required();
    ablate->add_option("grid", grid_tokens, "key=v1,v2 axes (cross product)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (gen->parsed()) {
        ttk_config* cfg = load_config_or_die(config_path);
        const std::uint64_t seed = resolve_seed(cfg, gen->count("--seed") > 0, seed_flag);
        manifest_start(out_dir, "gen-data", config_path, seed);
        check(ttk_gen_data(cfg, seed, out_dir.c_str()));
        const std::string n = config_value(cfg, "gen_sequences");
        manifest_end(out_dir);
        std::printf("wrote %s sequences under %s\n", n.c_str(), out_dir.c_str());
        ttk_config_destroy(cfg);
        return 0;
    }

    if (train->parsed()) {
        ttk_config* cfg = load_config_or_die(config_path);
        const std::uint64_t seed = resolve_seed(cfg, train->count("--seed") > 0, seed_flag);
        manifest_start(out_dir, "train", config_path, seed);
        ttk_model* model = nullptr;
        check(ttk_model_init(cfg, seed, &model));
        check(ttk_train(model, cfg, dataset_dir.c_str(), (out_dir + "/loss_log.tsv").c_str()));
        check(ttk_model_save(model, (out_dir + "/checkpoint.bin").c_str()));
        char* cfg_text = nullptr;
        check(ttk_config_format(cfg, &cfg_text));
        write_text(out_dir + "/config.txt", cfg_text);
        ttk_string_free(cfg_text);
        manifest_end(out_dir);
        std::printf("checkpoint: %s/checkpoint.bin\n", out_dir.c_str());
        ttk_model_destroy(model);
        ttk_config_destroy(cfg);
        return 0;
    }

    if (track->parsed()) {
        if (dataset_dir.empty() == sequence_dir.empty()) {
            std::fprintf(stderr, "error: pass exactly one of --dataset or --sequence\n");
            return 2;
        }
        manifest_start(out_dir, "track", config_path, seed_flag);
        ttk_model* model = nullptr;
        check(ttk_model_load(checkpoint_path.c_str(), &model));
        if (!dataset_dir.empty()) {
            check(ttk_track_dataset(model, dataset_dir.c_str(), out_dir.c_str(), jobs));
            std::printf("results under %s\n", out_dir.c_str());
        } else {
            const std::string name = fs::path(sequence_dir).filename().string();
            double ms = 0.0;
            check(ttk_track_sequence(model, sequence_dir.c_str(), (out_dir + "/" + name + ".txt").c_str(), &ms));
            std::printf("result: %s/%s.txt (%.3f ms/frame)\n", out_dir.c_str(), name.c_str(), ms);
        }
        manifest_end(out_dir);
        ttk_model_destroy(model);
        return 0;
    }

    if (eval->parsed()) {
        manifest_start(out_dir, "eval", config_path, seed_flag);
        char* report = nullptr;
        check(ttk_evaluate(dataset_dir.c_str(), results_dir.c_str(), (out_dir + "/metrics.tsv").c_str(),
                           (out_dir + "/curve.tsv").c_str(), &report));
        write_text(out_dir + "/report.txt", report);
        std::fputs(report, stdout);
        ttk_string_free(report);
        manifest_end(out_dir);
        return 0;
    }

    if (gradcheck->parsed()) {
        if (!out_dir.empty()) manifest_start(out_dir, "grad-check", config_path, seed_flag);
        char* report = nullptr;
        int passed = 0;
        check(ttk_grad_check(seed_flag, gc_inputs, gc_tolerance, &report, &passed));
        std::fputs(report, stdout);
        if (!out_dir.empty()) {
            write_text(out_dir + "/grad_report.txt", report);
            manifest_end(out_dir);
        }
        ttk_string_free(report);
        return passed ? 0 : 1;
    }

    if (ablate->parsed()) {
        std::string grid;
        for (const std::string& token : grid_tokens) {
            if (!grid.empty()) grid += " ";
            grid += token;
        }
        ttk_config* cfg = load_config_or_die(config_path);
        const std::uint64_t seed = resolve_seed(cfg, ablate->count("--seed") > 0, seed_flag);
        manifest_start(out_dir, "ablate", config_path, seed);
        char* table = nullptr;
        check(ttk_ablate(cfg, grid.c_str(), dataset_dir.c_str(), out_dir.c_str(), &table));
        std::fputs(table, stdout);
        ttk_string_free(table);
        manifest_end(out_dir);
        ttk_config_destroy(cfg);
        return 0;
    }

    return 2;
}
