#include "swat/config.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "swat/presets.hpp"

namespace swat {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ConfigError("config " + where + ": " + what);
}

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) bad(where, "expected an object");
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> known) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (item.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) bad(where, "unknown key '" + item.key() + "'");
    }
}

template <typename T>
void read_field(const json& j, const std::string& where, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        bad(where, "key '" + std::string(key) + "' has the wrong type");
    }
}

// Exact numeric kinds only: get<int>() would happily truncate 1.5, accept
// true as 1, or wrap a negative into an unsigned seed.
template <typename T>
void read_number(const json& j, const std::string& where, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if constexpr (std::is_integral_v<T>) {
        const bool ok = std::is_unsigned_v<T> ? it->is_number_unsigned() : it->is_number_integer();
        if (!ok) bad(where, "key '" + std::string(key) + "' must be an integer");
    } else {
        if (!it->is_number()) bad(where, "key '" + std::string(key) + "' must be a number");
    }
    out = it->get<T>();
}

void read_flag(const json& j, const std::string& where, const char* key, bool& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_boolean()) bad(where, "key '" + std::string(key) + "' must be a boolean");
    out = it->get<bool>();
}

ModelConfig parse_model(const json& j) {
    const std::string where = "model";
    require_object(j, where);
    reject_unknown(j, where,
                   {"preset", "variant", "depth", "embed", "heads", "token_hidden",
                    "channel_hidden", "patch", "alpha", "image_size", "in_channels", "classes",
                    "pos_emb", "swat", "swat_tokenize", "swat_token_mix", "swat_channel_mix",
                    "token_mix_kernel", "channel_mix_kernel"});

    ModelConfig cfg;
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) bad(where, "key 'preset' must be a string");
        cfg = preset(j["preset"].get<std::string>());
    }
    if (j.contains("variant")) {
        if (!j["variant"].is_string()) bad(where, "key 'variant' must be a string");
        const std::string v = j["variant"].get<std::string>();
        if (v == "transformer") {
            cfg.variant = Variant::transformer;
        } else if (v == "mixer") {
            cfg.variant = Variant::mixer;
        } else {
            bad(where, "variant must be 'transformer' or 'mixer', got '" + v + "'");
        }
    }
    if (j.contains("swat")) {
        bool on = false;
        read_flag(j, where, "swat", on);
        cfg = with_swat(cfg, on);
    }
    read_number(j, where, "depth", cfg.depth);
    read_number(j, where, "embed", cfg.embed);
    read_number(j, where, "heads", cfg.heads);
    read_number(j, where, "token_hidden", cfg.token_hidden);
    read_number(j, where, "channel_hidden", cfg.channel_hidden);
    read_number(j, where, "patch", cfg.patch);
    read_number(j, where, "alpha", cfg.alpha);
    read_number(j, where, "image_size", cfg.image_size);
    read_number(j, where, "in_channels", cfg.in_channels);
    read_number(j, where, "classes", cfg.classes);
    read_flag(j, where, "pos_emb", cfg.pos_emb);
    read_flag(j, where, "swat_tokenize", cfg.swat_tokenize);
    read_flag(j, where, "swat_token_mix", cfg.swat_token_mix);
    read_flag(j, where, "swat_channel_mix", cfg.swat_channel_mix);
    read_number(j, where, "token_mix_kernel", cfg.token_mix_kernel);
    read_number(j, where, "channel_mix_kernel", cfg.channel_mix_kernel);
    return cfg;
}

DatasetSpec parse_dataset(const json& j, const ModelConfig& model) {
    const std::string where = "dataset";
    require_object(j, where);
    reject_unknown(j, where,
                   {"n_samples", "classes", "image_size", "channels", "period", "noise", "seed"});

    DatasetSpec spec;
    spec.classes = model.classes;
    spec.image_size = model.image_size;
    spec.channels = model.in_channels;
    read_number(j, where, "n_samples", spec.n_samples);
    read_number(j, where, "classes", spec.classes);
    read_number(j, where, "image_size", spec.image_size);
    read_number(j, where, "channels", spec.channels);
    read_number(j, where, "period", spec.period);
    read_number(j, where, "noise", spec.noise);
    read_number(j, where, "seed", spec.seed);
    return spec;
}

OptimizerConfig parse_optimizer(const json& j) {
    const std::string where = "optimizer";
    require_object(j, where);
    reject_unknown(j, where,
                   {"lr", "beta1", "beta2", "eps", "weight_decay", "epochs", "batch"});

    OptimizerConfig opt;
    read_number(j, where, "lr", opt.lr);
    read_number(j, where, "beta1", opt.beta1);
    read_number(j, where, "beta2", opt.beta2);
    read_number(j, where, "eps", opt.eps);
    read_number(j, where, "weight_decay", opt.weight_decay);
    read_number(j, where, "epochs", opt.epochs);
    read_number(j, where, "batch", opt.batch);
    return opt;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_object(root, "document root");
    reject_unknown(root, "document root", {"seed", "model", "dataset", "optimizer"});

    RunConfig run;
    if (root.contains("model")) run.model = parse_model(root["model"]);
    run.dataset = root.contains("dataset") ? parse_dataset(root["dataset"], run.model)
                                           : parse_dataset(json::object(), run.model);
    if (root.contains("optimizer")) run.optimizer = parse_optimizer(root["optimizer"]);
    read_number(root, "document root", "seed", run.seed);
    return run;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

}  // namespace swat
