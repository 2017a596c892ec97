#include "swat/blocks.hpp"

namespace swat {

void ModelConfig::validate() const {
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (embed < 1) throw ConfigError("embed width must be >= 1");
    if (classes < 2) throw ConfigError("classifier needs at least 2 classes");
    if (patch < 1) throw ConfigError("patch must be >= 1");
    if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
    if (image_size < patch || image_size % patch != 0) {
        throw ConfigError("image size " + std::to_string(image_size) +
                          " must be a positive multiple of patch " + std::to_string(patch));
    }
    if (variant == Variant::transformer) {
        if (heads < 1 || embed % heads != 0) {
            throw ConfigError("embed " + std::to_string(embed) + " not divisible by heads " +
                              std::to_string(heads));
        }
    } else {
        if (token_hidden < 1) throw ConfigError("mixer needs token_hidden >= 1");
        if (channel_hidden < 1) throw ConfigError("mixer needs channel_hidden >= 1");
    }
    if (token_mix_kernel < 1 || token_mix_kernel % 2 == 0) {
        throw ConfigError("token_mix_kernel must be odd, got " + std::to_string(token_mix_kernel));
    }
    if (channel_mix_kernel < 1 || channel_mix_kernel % 2 == 0) {
        throw ConfigError("channel_mix_kernel must be odd, got " +
                          std::to_string(channel_mix_kernel));
    }
    if (alpha < 1) throw ConfigError("alpha must be >= 1");
    try {
        (void)StructureDescriptor::make(patch, alpha, embed);
    } catch (const StructureError& e) {
        throw ConfigError(e.what());
    }
}

ModelConfig ModelConfig::resolved() const {
    ModelConfig out = *this;
    if (out.variant == Variant::transformer && out.channel_hidden == 0) {
        out.channel_hidden = 4 * out.embed;
    }
    out.validate();
    return out;
}

StructureDescriptor ModelConfig::structure() const {
    return StructureDescriptor::make(patch, alpha, embed);
}

// ---- token mixing: attention ----

Tensor TokenMixAttention::forward(const Tensor& x, const ForwardCtx& ctx) const {
    Tensor* cap = (ctx.attn_capture && ctx.layer == ctx.capture_layer) ? ctx.attn_capture : nullptr;
    return attn.forward(x, cap);
}

void TokenMixAttention::register_params(ParamRegistry& r, const std::string& prefix) const {
    attn.register_params(r, prefix);
}

TokenMixAttentionSwat::TokenMixAttentionSwat(const StructureDescriptor& d, int heads, int kernel)
    : desc(d),
      heads(heads),
      qkv_lin(d.embed, 3 * d.embed),
      qkv_conv(d.chan, 3 * d.chan, kernel, 1, kernel / 2),
      proj_lin(d.embed, d.embed),
      proj_conv(d.chan, d.chan, kernel, 1, kernel / 2) {
    if (heads < 1 || d.embed % heads != 0) {
        throw ConfigError("embed " + std::to_string(d.embed) + " not divisible by heads " +
                          std::to_string(heads));
    }
}

Tensor TokenMixAttentionSwat::forward(const Tensor& x, const ForwardCtx& ctx) const {
    const int64_t B = x.extent(0), N = x.extent(1), C = x.extent(2);
    if (C != desc.embed) {
        throw ShapeError("token width " + std::to_string(C) + " does not match structure embed " +
                         std::to_string(desc.embed));
    }
    // Each token's features, viewed as a (c, h, w) sub-patch map. The conv
    // branch mixes only within the token; output channel blocks [q|k|v] line
    // up with the linear branch because both flatten channel-major.
    Tensor maps = reshape(x, {B * N, desc.chan, desc.sub_h, desc.sub_w});
    Tensor qkv_c = reshape(qkv_conv.forward(maps), {B, N, 3 * C});
    Tensor qkv = add(scale(qkv_lin.forward(x), 0.5), scale(qkv_c, 0.5));

    Tensor* cap = (ctx.attn_capture && ctx.layer == ctx.capture_layer) ? ctx.attn_capture : nullptr;
    Tensor mixed = attention_core(qkv, heads, cap);

    Tensor mixed_maps = reshape(mixed, {B * N, desc.chan, desc.sub_h, desc.sub_w});
    Tensor proj_c = reshape(proj_conv.forward(mixed_maps), {B, N, C});
    return add(scale(proj_lin.forward(mixed), 0.5), scale(proj_c, 0.5));
}

void TokenMixAttentionSwat::register_params(ParamRegistry& r, const std::string& prefix) const {
    qkv_lin.register_params(r, prefix + ".qkv");
    qkv_conv.register_params(r, prefix + ".qkv_conv");
    proj_lin.register_params(r, prefix + ".proj");
    proj_conv.register_params(r, prefix + ".proj_conv");
}

// ---- token mixing: mlp / sandwich ----

Tensor TokenMixMlp::forward(const Tensor& x, const ForwardCtx&) const {
    Tensor t = permute(x, {0, 2, 1});  // (B, C, N)
    Tensor y = fc2.forward(gelu(fc1.forward(t)));
    return permute(y, {0, 2, 1});
}

void TokenMixMlp::register_params(ParamRegistry& r, const std::string& prefix) const {
    fc1.register_params(r, prefix + ".fc1");
    fc2.register_params(r, prefix + ".fc2");
}

TokenMixSandwich::TokenMixSandwich(const StructureDescriptor& d, int64_t tokens, int64_t hidden,
                                   int kernel)
    : desc(d),
      tokens(tokens),
      pw1(tokens, hidden, 1, 1, 0),
      dw(hidden, hidden, kernel, 1, kernel / 2, static_cast<int>(hidden)),
      pw2(hidden, tokens, 1, 1, 0) {}

Tensor TokenMixSandwich::forward(const Tensor& x, const ForwardCtx&) const {
    const int64_t B = x.extent(0), N = x.extent(1), C = x.extent(2);
    if (N != tokens) {
        throw ShapeError("token mix built for " + std::to_string(tokens) + " tokens, got " +
                         std::to_string(N));
    }
    if (C != desc.embed) {
        throw ShapeError("token width " + std::to_string(C) + " does not match structure embed " +
                         std::to_string(desc.embed));
    }
    // (B, N, c, h, w) -> (B*c, N, h, w): tokens act as channels, the shared
    // sub-patch grid is the spatial domain.
    Tensor split = reshape(x, {B, N, desc.chan, desc.sub_h, desc.sub_w});
    Tensor grouped = reshape(permute(split, {0, 2, 1, 3, 4}),
                             {B * desc.chan, N, desc.sub_h, desc.sub_w});
    Tensor y = pw2.forward(gelu(dw.forward(pw1.forward(grouped))));
    Tensor back = permute(reshape(y, {B, desc.chan, N, desc.sub_h, desc.sub_w}), {0, 2, 1, 3, 4});
    return reshape(back, {B, N, C});
}

void TokenMixSandwich::register_params(ParamRegistry& r, const std::string& prefix) const {
    pw1.register_params(r, prefix + ".pw1");
    dw.register_params(r, prefix + ".dw");
    pw2.register_params(r, prefix + ".pw2");
}

// ---- channel mixing ----

Tensor ChannelMixMlp::forward(const Tensor& x, const ForwardCtx&) const {
    return fc2.forward(gelu(fc1.forward(x)));
}

void ChannelMixMlp::register_params(ParamRegistry& r, const std::string& prefix) const {
    fc1.register_params(r, prefix + ".fc1");
    fc2.register_params(r, prefix + ".fc2");
}

ChannelMixSandwich::ChannelMixSandwich(int64_t embed, int64_t hidden, int kernel)
    : pw1(embed, hidden, 1, 1, 0),
      dw(hidden, hidden, kernel, 1, kernel / 2, static_cast<int>(hidden)),
      pw2(hidden, embed, 1, 1, 0) {}

Tensor ChannelMixSandwich::forward(const Tensor& x, const ForwardCtx& ctx) const {
    const int64_t B = x.extent(0), N = x.extent(1), C = x.extent(2);
    if (ctx.ht < 1 || ctx.wt < 1 || ctx.ht * ctx.wt != N) {
        throw StructureError("channel mix needs the token grid shape; got " +
                             std::to_string(ctx.ht) + "x" + std::to_string(ctx.wt) + " for " +
                             std::to_string(N) + " tokens");
    }
    Tensor map = permute(reshape(x, {B, ctx.ht, ctx.wt, C}), {0, 3, 1, 2});
    Tensor u = gelu(pw1.forward(map));
    Tensor d = dw.forward(u);
    if (!second_gelu_identity) d = gelu(d);
    Tensor y = pw2.forward(d);
    return reshape(permute(y, {0, 2, 3, 1}), {B, N, C});
}

void ChannelMixSandwich::register_params(ParamRegistry& r, const std::string& prefix) const {
    pw1.register_params(r, prefix + ".pw1");
    dw.register_params(r, prefix + ".dw");
    pw2.register_params(r, prefix + ".pw2");
}

// ---- model assembly ----

TokenGrid Model::tokenize(const Tensor& images) const {
    if (stem_tok) return stem_tok->forward(images);
    return baseline_tok->forward(images);
}

Tensor Model::forward_tokens(const Tensor& tokens, int64_t ht, int64_t wt, Tensor* attn_capture,
                             int capture_layer) const {
    if (tokens.dim() != 3) {
        throw ShapeError("expected (B, N, C) tokens, got " + shape_str(tokens.shape()));
    }
    Tensor x = tokens;
    if (pos_emb.defined()) {
        if (pos_emb.extent(0) != tokens.extent(1)) {
            throw ShapeError("position table covers " + std::to_string(pos_emb.extent(0)) +
                             " tokens, input has " + std::to_string(tokens.extent(1)));
        }
        x = add(x, pos_emb);
    }
    if (attn_capture && capture_layer >= 0) {
        if (cfg.variant != Variant::transformer) {
            throw ContractError("attention capture requires an attention token mixer");
        }
        if (capture_layer >= cfg.depth) {
            throw ContractError("capture layer " + std::to_string(capture_layer) +
                                " outside depth " + std::to_string(cfg.depth));
        }
    }
    ForwardCtx ctx;
    ctx.ht = ht;
    ctx.wt = wt;
    ctx.attn_capture = attn_capture;
    ctx.capture_layer = capture_layer;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        ctx.layer = static_cast<int>(i);
        const Block& b = blocks[i];
        x = add(x, b.token_mix->forward(b.norm1.forward(x), ctx));
        x = add(x, b.channel_mix->forward(b.norm2.forward(x), ctx));
    }
    x = final_norm.forward(x);
    return head.forward(mean_axis(x, 1));
}

Tensor Model::forward(const Tensor& images, Tensor* attn_capture, int capture_layer) const {
    TokenGrid grid = tokenize(images);
    return forward_tokens(grid.tokens(), grid.ht(), grid.wt(), attn_capture, capture_layer);
}

ParamRegistry Model::params() const {
    ParamRegistry r;
    if (stem_tok) {
        stem_tok->register_params(r, "tokenizer");
    } else {
        baseline_tok->register_params(r, "tokenizer");
    }
    if (pos_emb.defined()) r.add("embed.pos_emb", pos_emb);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "block" + std::to_string(i);
        blocks[i].norm1.register_params(r, p + ".norm1");
        blocks[i].token_mix->register_params(r, p + ".token_mix");
        blocks[i].norm2.register_params(r, p + ".norm2");
        blocks[i].channel_mix->register_params(r, p + ".channel_mix");
    }
    final_norm.register_params(r, "final_norm");
    head.register_params(r, "head");
    return r;
}

Model build_model(const ModelConfig& raw, uint64_t seed) {
    const ModelConfig cfg = raw.resolved();
    Model m;
    m.cfg = cfg;

    const StructureDescriptor desc = cfg.structure();
    if (cfg.swat_tokenize) {
        m.stem_tok = std::make_unique<BottleneckStem>(
            make_bottleneck_stem(cfg.in_channels, default_stem_config(cfg.in_channels, desc), desc));
    } else {
        m.baseline_tok = std::make_unique<BaselineTokenizer>(cfg.in_channels, cfg.patch, cfg.embed);
    }
    if (cfg.pos_emb) m.pos_emb = Tensor::zeros({cfg.tokens_n(), cfg.embed}, true);

    for (int i = 0; i < cfg.depth; ++i) {
        Model::Block b;
        b.norm1 = LayerNormLayer(cfg.embed);
        b.norm2 = LayerNormLayer(cfg.embed);
        if (cfg.variant == Variant::transformer) {
            if (cfg.swat_token_mix) {
                b.token_mix = std::make_unique<TokenMixAttentionSwat>(desc, cfg.heads,
                                                                      cfg.token_mix_kernel);
            } else {
                b.token_mix = std::make_unique<TokenMixAttention>(cfg.embed, cfg.heads);
            }
        } else {
            if (cfg.swat_token_mix) {
                b.token_mix = std::make_unique<TokenMixSandwich>(desc, cfg.tokens_n(),
                                                                 cfg.token_hidden,
                                                                 cfg.token_mix_kernel);
            } else {
                b.token_mix = std::make_unique<TokenMixMlp>(cfg.tokens_n(), cfg.token_hidden);
            }
        }
        if (cfg.swat_channel_mix) {
            b.channel_mix = std::make_unique<ChannelMixSandwich>(cfg.embed, cfg.channel_hidden,
                                                                 cfg.channel_mix_kernel);
        } else {
            b.channel_mix = std::make_unique<ChannelMixMlp>(cfg.embed, cfg.channel_hidden);
        }
        m.blocks.push_back(std::move(b));
    }
    m.final_norm = LayerNormLayer(cfg.embed);
    m.head = LinearLayer(cfg.embed, cfg.classes);

    init_params(m.params(), {0.02, seed});
    return m;
}

}  // namespace swat
