#include "swat/complexity.hpp"

#include <stdexcept>

namespace swat {

const ComplexityRow& ComplexityReport::row(const std::string& path) const {
    for (const auto& r : rows) {
        if (r.path == path) return r;
    }
    throw ContractError("no complexity row named " + path);
}

int64_t conv_flops(int64_t out_channels, int64_t out_h, int64_t out_w, int64_t kernel,
                   int64_t in_channels, int64_t groups) {
    return out_channels * out_h * out_w * (kernel * kernel * in_channels / groups);
}

int64_t linear_flops(int64_t rows, int64_t in, int64_t out) { return rows * in * out; }

namespace {

int64_t linear_params(int64_t in, int64_t out) { return out * in + out; }

int64_t conv_params(int64_t in, int64_t out, int64_t kernel, int64_t groups) {
    return out * (in / groups) * kernel * kernel + out;
}

ComplexityRow tokenizer_row(const ModelConfig& cfg, int image_size) {
    ComplexityRow row{"tokenizer", 0, 0};
    if (!cfg.swat_tokenize) {
        const int64_t side = image_size / cfg.patch;
        row.params = conv_params(cfg.in_channels, cfg.embed, cfg.patch, 1);
        row.flops = conv_flops(cfg.embed, side, side, cfg.patch, cfg.in_channels, 1);
        return row;
    }
    const StructureDescriptor desc = cfg.structure();
    int64_t h = image_size, w = image_size, channels = cfg.in_channels;
    for (const StemStage& s : default_stem_config(cfg.in_channels, desc).stages) {
        const int64_t oh = (h + 2 * s.padding - s.kernel) / s.stride + 1;
        const int64_t ow = (w + 2 * s.padding - s.kernel) / s.stride + 1;
        row.params += conv_params(channels, s.out_channels, s.kernel, 1);
        row.flops += conv_flops(s.out_channels, oh, ow, s.kernel, channels, 1);
        h = oh;
        w = ow;
        channels = s.out_channels;
    }
    return row;
}

ComplexityRow token_mix_row(const ModelConfig& cfg, int64_t n, const std::string& path) {
    ComplexityRow row{path, 0, 0};
    const int64_t C = cfg.embed;
    const StructureDescriptor desc = cfg.structure();
    const int64_t k = cfg.token_mix_kernel;
    if (cfg.variant == Variant::transformer) {
        row.params = linear_params(C, 3 * C) + linear_params(C, C);
        // qkv and output projections plus the two attention matmuls
        row.flops = linear_flops(n, C, 3 * C) + 2 * n * n * C + linear_flops(n, C, C);
        if (cfg.swat_token_mix) {
            row.params += conv_params(desc.chan, 3 * desc.chan, k, 1) +
                          conv_params(desc.chan, desc.chan, k, 1);
            row.flops += conv_flops(3 * desc.chan, desc.sub_h, desc.sub_w, k, desc.chan, 1) * n +
                         conv_flops(desc.chan, desc.sub_h, desc.sub_w, k, desc.chan, 1) * n;
        }
        return row;
    }
    const int64_t dt = cfg.token_hidden;
    row.params = linear_params(n, dt) + linear_params(dt, n);
    row.flops = linear_flops(C, n, dt) + linear_flops(C, dt, n);
    if (cfg.swat_token_mix) {
        row.params += conv_params(dt, dt, k, dt);
        // one depthwise pass over every sub-patch map: alpha-independent
        row.flops += conv_flops(dt, desc.sub_h, desc.sub_w, k, dt, dt) * desc.chan;
    }
    return row;
}

ComplexityRow channel_mix_row(const ModelConfig& cfg, int64_t n, const std::string& path) {
    ComplexityRow row{path, 0, 0};
    const int64_t C = cfg.embed;
    const int64_t dc = cfg.channel_hidden;
    row.params = linear_params(C, dc) + linear_params(dc, C);
    row.flops = linear_flops(n, C, dc) + linear_flops(n, dc, C);
    if (cfg.swat_channel_mix) {
        const int64_t k = cfg.channel_mix_kernel;
        row.params += conv_params(dc, dc, k, dc);
        row.flops += n * dc * k * k;  // depthwise over the token grid
    }
    return row;
}

}  // namespace

ComplexityReport count_model(const ModelConfig& raw) {
    return count_model(raw, raw.image_size);
}

ComplexityReport count_model(const ModelConfig& raw, int image_size) {
    const ModelConfig cfg = raw.resolved();
    if (image_size < cfg.patch || image_size % cfg.patch != 0) {
        throw ConfigError("input side " + std::to_string(image_size) +
                          " must be a positive multiple of patch " + std::to_string(cfg.patch));
    }
    const int64_t side = image_size / cfg.patch;
    const int64_t n = side * side;
    const int64_t C = cfg.embed;

    ComplexityReport rep;
    rep.rows.push_back(tokenizer_row(cfg, image_size));
    if (cfg.pos_emb) rep.rows.push_back({"embed.pos_emb", cfg.tokens_n() * C, 0});
    for (int i = 0; i < cfg.depth; ++i) {
        const std::string p = "block" + std::to_string(i);
        rep.rows.push_back({p + ".norm1", 2 * C, 0});
        rep.rows.push_back(token_mix_row(cfg, n, p + ".token_mix"));
        rep.rows.push_back({p + ".norm2", 2 * C, 0});
        rep.rows.push_back(channel_mix_row(cfg, n, p + ".channel_mix"));
    }
    rep.rows.push_back({"final_norm", 2 * C, 0});
    rep.rows.push_back(
        {"head", linear_params(C, cfg.classes), linear_flops(1, C, cfg.classes)});

    for (const auto& r : rep.rows) {
        rep.total_params += r.params;
        rep.total_flops += r.flops;
    }
    return rep;
}

ComplexityReport count_params(const Model& m) { return count_model(m.cfg, m.cfg.image_size); }

ComplexityReport count_flops(const Model& m, int image_size) {
    return count_model(m.cfg, image_size);
}

std::vector<SweepEntry> sweep(const ModelConfig& base, const std::string& axis,
                              const std::vector<std::string>& values) {
    if (axis != "alpha" && axis != "kernel" && axis != "flags") {
        throw ConfigError("unknown sweep axis '" + axis + "' (want alpha, kernel, or flags)");
    }
    auto parse_int = [](const std::string& s) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("not an integer: '" + s + "'");
        }
        if (used != s.size()) throw ConfigError("not an integer: '" + s + "'");
        return v;
    };

    std::vector<SweepEntry> out;
    for (const std::string& value : values) {
        SweepEntry entry;
        entry.value = value;
        try {
            ModelConfig cfg = base;
            if (axis == "alpha") {
                const int a = parse_int(value);
                cfg.alpha = a;
                if (a == 1) {
                    // a 1x1 structure within tokens is no structure: the
                    // sweep endpoint is the plain baseline
                    cfg.swat_tokenize = false;
                    cfg.swat_token_mix = false;
                    cfg.swat_channel_mix = false;
                }
            } else if (axis == "kernel") {
                cfg.channel_mix_kernel = parse_int(value);
            } else {
                if (value.size() != 3 || value.find_first_not_of("01") != std::string::npos) {
                    throw ConfigError("flags value must be three 0/1 characters, got '" + value +
                                      "'");
                }
                cfg.swat_tokenize = value[0] == '1';
                cfg.swat_token_mix = value[1] == '1';
                cfg.swat_channel_mix = value[2] == '1';
            }
            entry.report = count_model(cfg);
            entry.ok = true;
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace swat
