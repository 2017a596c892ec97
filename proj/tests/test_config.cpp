#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "swat/config.hpp"
#include "swat/presets.hpp"

using namespace swat;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("empty document yields defaults with a coupled dataset") {
    RunConfig run = parse_run_config("{}");
    CHECK(run.model.depth == 12);
    CHECK(run.model.embed == 192);
    CHECK(run.model.image_size == 224);
    CHECK(run.model.variant == Variant::transformer);
    CHECK(run.seed == 0);
    // dataset geometry follows the model unless overridden
    CHECK(run.dataset.classes == run.model.classes);
    CHECK(run.dataset.image_size == 224);
    CHECK(run.dataset.channels == 3);
    CHECK(run.optimizer.lr == 1e-3);
    CHECK(run.optimizer.epochs == 20);
}

TEST_CASE("preset expands first, explicit fields override") {
    RunConfig run = parse_run_config(R"({
        "model": { "preset": "tiny-mixer-swat", "depth": 3, "swat_channel_mix": false }
    })");
    CHECK(run.model.variant == Variant::mixer);
    CHECK(run.model.embed == 16);        // from the preset
    CHECK(run.model.depth == 3);         // overridden
    CHECK(run.model.swat_tokenize);      // from the preset
    CHECK_FALSE(run.model.swat_channel_mix);  // overridden
    CHECK(run.dataset.classes == 4);
    CHECK(run.dataset.image_size == 16);
}

TEST_CASE("the swat switch applies before individual flags") {
    RunConfig run = parse_run_config(R"({
        "model": { "preset": "deit-ti", "swat": true, "swat_token_mix": false }
    })");
    CHECK(run.model.swat_tokenize);
    CHECK_FALSE(run.model.swat_token_mix);
    CHECK(run.model.swat_channel_mix);

    RunConfig off = parse_run_config(R"({
        "model": { "preset": "tiny-mixer-swat", "swat": false }
    })");
    CHECK_FALSE(off.model.swat_tokenize);
    CHECK_FALSE(off.model.swat_token_mix);
    CHECK_FALSE(off.model.swat_channel_mix);
}

TEST_CASE("every section parses and the result builds") {
    RunConfig run = parse_run_config(R"({
        "seed": 42,
        "model": { "variant": "transformer", "depth": 2, "embed": 16, "heads": 2,
                   "patch": 4, "alpha": 2, "image_size": 16, "classes": 5,
                   "pos_emb": false, "token_mix_kernel": 3, "channel_mix_kernel": 3 },
        "dataset": { "n_samples": 32, "period": 2, "noise": 0.05, "seed": 7 },
        "optimizer": { "lr": 0.01, "beta1": 0.8, "beta2": 0.95, "eps": 1e-9,
                       "weight_decay": 0.05, "epochs": 3, "batch": 8 }
    })");
    CHECK(run.seed == 42);
    CHECK(run.model.alpha == 2);
    CHECK(run.dataset.n_samples == 32);
    CHECK(run.dataset.classes == 5);     // inherited
    CHECK(run.dataset.image_size == 16);  // inherited
    CHECK(run.dataset.seed == 7);
    CHECK(run.optimizer.beta1 == 0.8);
    CHECK(run.optimizer.weight_decay == 0.05);
    CHECK_NOTHROW(run.model.validate());
    CHECK_NOTHROW(run.optimizer.validate());
    Model m = build_model(run.model, run.seed);
    CHECK(m.cfg.channel_hidden == 64);  // transformer default 4 * embed
}

TEST_CASE("explicit dataset keys beat inherited ones") {
    RunConfig run = parse_run_config(R"({
        "model": { "preset": "tiny-mixer-swat" },
        "dataset": { "classes": 3, "image_size": 32, "channels": 1 }
    })");
    CHECK(run.dataset.classes == 3);
    CHECK(run.dataset.image_size == 32);
    CHECK(run.dataset.channels == 1);
}

TEST_CASE("unknown keys are rejected wherever they appear") {
    CHECK_THROWS_AS(parse_run_config(R"({ "sed": 1 })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "depht": 2 } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "dataset": { "samples": 8 } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "optimizer": { "momentum": 0.9 } })"), ConfigError);
}

TEST_CASE("type mismatches are rejected, not coerced") {
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "depth": 1.5 } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "depth": true } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "pos_emb": 1 } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "variant": "cnn" } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "preset": 3 } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": { "preset": "nope" } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "seed": -1 })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "dataset": { "noise": "high" } })"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({ "model": [1, 2] })"), ConfigError);
    // integers are acceptable where doubles are expected
    CHECK(parse_run_config(R"({ "optimizer": { "lr": 1 } })").optimizer.lr == 1.0);
}

TEST_CASE("malformed json and missing files") {
    CHECK_THROWS_AS(parse_run_config("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(""), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[1, 2, 3]"), ConfigError);
    CHECK_THROWS_AS(load_run_config("/definitely/not/here.json"), IoError);

    const std::string path = temp_file("swat_config_ok.json", R"({ "seed": 9 })");
    CHECK(load_run_config(path).seed == 9);
    std::remove(path.c_str());
}
