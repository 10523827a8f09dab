// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 toktrack contributors
//
// Exercises the shared-library surface through the C header alone.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "toktrack.h"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "embed_dim = 16\n"
    "encoder_layers = 1\n"
    "heads = 2\n"
    "patch_size = 8\n"
    "template_side = 16\n"
    "search_side = 32\n"
    "vocab_size = 32\n"
    "trajectory_len = 2\n"
    "decoder_layers = 1\n"
    "steps = 3\n"
    "clip_len = 3\n"
    "warmup_steps = 2\n"
    "gen_sequences = 2\n"
    "synth_length = 5\n";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("capi_tmp") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        fs::remove_all(path);
        std::error_code ec;
        fs::remove(path.parent_path(), ec); // parent goes too once empty
    }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path.string() : (path / sub).string();
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

ttk_config* tiny_config() {
    ttk_config* cfg = nullptr;
    REQUIRE(ttk_config_parse(kTinyConfig, &cfg) == TTK_OK);
    return cfg;
}

} // namespace

TEST_CASE("version and error strings are always available") {
    CHECK(ttk_version() != nullptr);
    CHECK(ttk_last_error() != nullptr);
}

TEST_CASE("config create, set, format, and parse round trip") {
    ttk_config* cfg = nullptr;
    REQUIRE(ttk_config_create(&cfg) == TTK_OK);
    CHECK(ttk_config_set(cfg, "embed_dim", "32") == TTK_OK);
    CHECK(ttk_config_set(cfg, "lambda_siou", "1.5") == TTK_OK);
    char* text = nullptr;
    REQUIRE(ttk_config_format(cfg, &text) == TTK_OK);
    std::string formatted(text);
    ttk_string_free(text);
    CHECK(formatted.find("embed_dim = 32\n") != std::string::npos);
    CHECK(formatted.find("lambda_siou = 1.5\n") != std::string::npos);
    ttk_config* back = nullptr;
    REQUIRE(ttk_config_parse(formatted.c_str(), &back) == TTK_OK);
    char* text2 = nullptr;
    REQUIRE(ttk_config_format(back, &text2) == TTK_OK);
    CHECK(formatted == text2);
    ttk_string_free(text2);
    ttk_config_destroy(cfg);
    ttk_config_destroy(back);
}

TEST_CASE("config errors carry status codes and messages") {
    ttk_config* cfg = nullptr;
    CHECK(ttk_config_create(nullptr) == TTK_ERR_INVALID_ARGUMENT);
    CHECK(std::string(ttk_last_error()).find("out") != std::string::npos);
    REQUIRE(ttk_config_create(&cfg) == TTK_OK);
    CHECK(ttk_config_set(cfg, "no_such_key", "1") == TTK_ERR_CONFIG);
    CHECK(std::string(ttk_last_error()).find("no_such_key") != std::string::npos);
    CHECK(ttk_config_set(cfg, "embed_dim", "banana") == TTK_ERR_CONFIG);
    CHECK(ttk_config_parse("embed_dim = 13\n", &cfg) == TTK_ERR_CONFIG); // not divisible by heads
    CHECK(ttk_config_load("no_such_file.cfg", &cfg) == TTK_ERR_IO);
    ttk_config_destroy(cfg);
}

TEST_CASE("model init is deterministic and checkpoints round trip") {
    TempDir tmp("model");
    ttk_config* cfg = tiny_config();
    ttk_model* a = nullptr;
    ttk_model* b = nullptr;
    REQUIRE(ttk_model_init(cfg, 42, &a) == TTK_OK);
    REQUIRE(ttk_model_init(cfg, 42, &b) == TTK_OK);
    REQUIRE(ttk_model_save(a, tmp.str("a.bin").c_str()) == TTK_OK);
    REQUIRE(ttk_model_save(b, tmp.str("b.bin").c_str()) == TTK_OK);
    CHECK(read_file(tmp.str("a.bin")) == read_file(tmp.str("b.bin")));
    ttk_model* loaded = nullptr;
    REQUIRE(ttk_model_load(tmp.str("a.bin").c_str(), &loaded) == TTK_OK);
    REQUIRE(ttk_model_save(loaded, tmp.str("c.bin").c_str()) == TTK_OK);
    CHECK(read_file(tmp.str("a.bin")) == read_file(tmp.str("c.bin")));
    CHECK(ttk_model_load(tmp.str("missing.bin").c_str(), &loaded) == TTK_ERR_IO);
    {
        std::ofstream junk(tmp.str("junk.bin"), std::ios::binary);
        junk << "definitely not a checkpoint";
    }
    CHECK(ttk_model_load(tmp.str("junk.bin").c_str(), &loaded) == TTK_ERR_FORMAT);
    ttk_model_destroy(a);
    ttk_model_destroy(b);
    ttk_model_destroy(loaded);
    ttk_config_destroy(cfg);
}

TEST_CASE("pipeline: gen-data, train, track, evaluate through the C surface") {
    TempDir tmp("pipe");
    ttk_config* cfg = tiny_config();

    REQUIRE(ttk_gen_data(cfg, 11, tmp.str("data").c_str()) == TTK_OK);
    CHECK(fs::exists(tmp.path / "data" / "seq_0000" / "groundtruth.txt"));
    CHECK(fs::exists(tmp.path / "data" / "seq_0001" / "frames" / "000000.ppm"));

    ttk_model* model = nullptr;
    REQUIRE(ttk_model_init(cfg, 11, &model) == TTK_OK);
    REQUIRE(ttk_train(model, cfg, tmp.str("data").c_str(), tmp.str("loss_log.tsv").c_str()) == TTK_OK);
    std::string log = read_file(tmp.str("loss_log.tsv"));
    int lines = 0;
    for (char c : log) lines += c == '\n';
    CHECK(lines == 3); // one per training step

    REQUIRE(ttk_track_dataset(model, tmp.str("data").c_str(), tmp.str("results").c_str(), 2) == TTK_OK);
    CHECK(fs::exists(tmp.path / "results" / "seq_0000.txt"));
    CHECK(fs::exists(tmp.path / "results" / "seq_0001.txt"));

    double ms = -1.0;
    REQUIRE(ttk_track_sequence(model, tmp.str("data/seq_0000").c_str(), tmp.str("single.txt").c_str(), &ms) ==
            TTK_OK);
    CHECK(ms >= 0.0);

    char* report = nullptr;
    REQUIRE(ttk_evaluate(tmp.str("data").c_str(), tmp.str("results").c_str(), tmp.str("metrics.tsv").c_str(),
                         tmp.str("curve.tsv").c_str(), &report) == TTK_OK);
    std::string report_text(report);
    ttk_string_free(report);
    CHECK(report_text.find("ALL") != std::string::npos);
    CHECK(report_text.find("seq_0001") != std::string::npos);
    std::string metrics = read_file(tmp.str("metrics.tsv"));
    CHECK(metrics.find("name\tframes\tao") == 0);
    std::string curve = read_file(tmp.str("curve.tsv"));
    int curve_lines = 0;
    for (char c : curve) curve_lines += c == '\n';
    CHECK(curve_lines == 22);

    CHECK(ttk_evaluate(tmp.str("data").c_str(), tmp.str("nowhere").c_str(), nullptr, nullptr, nullptr) ==
          TTK_ERR_IO);
    ttk_model_destroy(model);
    ttk_config_destroy(cfg);
}

TEST_CASE("grad check reports pass state through the C surface") {
    char* report = nullptr;
    int passed = -1;
    REQUIRE(ttk_grad_check(0, 2, 1e-5, &report, &passed) == TTK_OK);
    CHECK(passed == 1);
    CHECK(std::string(report).find("PASS") != std::string::npos);
    ttk_string_free(report);
    CHECK(ttk_grad_check(0, 0, 1e-5, nullptr, nullptr) == TTK_ERR_CONFIG);
    REQUIRE(ttk_grad_check(0, 1, 0.0, nullptr, &passed) == TTK_OK);
    CHECK(passed == 0); // nothing is exact to zero tolerance
}

TEST_CASE("ablation grids cross keys and validate tokens") {
    TempDir tmp("ablate");
    ttk_config* cfg = tiny_config();
    REQUIRE(ttk_gen_data(cfg, 3, tmp.str("data").c_str()) == TTK_OK);
    char* table = nullptr;
    REQUIRE(ttk_ablate(cfg, "use_trajectory=true,false use_appearance=true,false", tmp.str("data").c_str(),
                       tmp.str("ab").c_str(), &table) == TTK_OK);
    std::string text(table);
    ttk_string_free(table);
    int rows = 0;
    for (char c : text) rows += c == '\n';
    CHECK(rows == 5); // header + 2x2 cells
    CHECK(fs::exists(tmp.path / "ab" / "cell_3" / "metrics.tsv"));
    CHECK(fs::exists(tmp.path / "ab" / "ablation.tsv"));
    CHECK(ttk_ablate(cfg, "", tmp.str("data").c_str(), tmp.str("ab2").c_str(), nullptr) == TTK_ERR_CONFIG);
    CHECK(ttk_ablate(cfg, "mask_ratio=0.5 mask_ratio=0.9", tmp.str("data").c_str(), tmp.str("ab3").c_str(),
                     nullptr) == TTK_ERR_CONFIG);
    CHECK(ttk_ablate(cfg, "no_such=1", tmp.str("data").c_str(), tmp.str("ab4").c_str(), nullptr) ==
          TTK_ERR_CONFIG);
    ttk_config_destroy(cfg);
}
