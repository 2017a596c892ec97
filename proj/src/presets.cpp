#include "swat/presets.hpp"

namespace swat {

namespace {

ModelConfig deit(int embed, int heads, int patch, int alpha) {
    ModelConfig cfg;
    cfg.variant = Variant::transformer;
    cfg.depth = 12;
    cfg.embed = embed;
    cfg.heads = heads;
    cfg.patch = patch;
    cfg.alpha = alpha;
    cfg.image_size = 224;
    cfg.classes = 1000;
    cfg.pos_emb = true;
    return cfg;  // channel_hidden stays 0 -> 4*embed
}

ModelConfig mixer(int embed, int token_hidden, int channel_hidden) {
    ModelConfig cfg;
    cfg.variant = Variant::mixer;
    cfg.depth = 8;
    cfg.embed = embed;
    cfg.token_hidden = token_hidden;
    cfg.channel_hidden = channel_hidden;
    cfg.patch = 16;
    cfg.alpha = 8;
    cfg.image_size = 224;
    cfg.classes = 1000;
    cfg.pos_emb = false;
    return cfg;
}

}  // namespace

ModelConfig preset(const std::string& name) {
    if (name == "deit-ti") return deit(192, 3, 16, 8);
    if (name == "deit-s") return deit(384, 6, 16, 8);
    if (name == "deit-b32") return deit(768, 12, 32, 16);
    if (name == "mixer-ti") return mixer(256, 128, 1024);
    if (name == "mixer-s16") return mixer(512, 256, 2048);
    if (name == "tiny-mixer-swat") {
        ModelConfig cfg;
        cfg.variant = Variant::mixer;
        cfg.depth = 2;
        cfg.embed = 16;
        cfg.token_hidden = 8;
        cfg.channel_hidden = 32;
        cfg.patch = 8;
        cfg.alpha = 2;
        cfg.image_size = 16;
        cfg.classes = 4;
        cfg.pos_emb = false;
        cfg.channel_mix_kernel = 3;
        return with_swat(cfg);
    }
    throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    return {"deit-ti", "deit-s", "deit-b32", "mixer-ti", "mixer-s16", "tiny-mixer-swat"};
}

ModelConfig with_swat(ModelConfig cfg, bool on) {
    cfg.swat_tokenize = on;
    cfg.swat_token_mix = on;
    cfg.swat_channel_mix = on;
    return cfg;
}

}  // namespace swat
