#pragma once

#include <memory>
#include <string>
#include <vector>

#include "swat/layers.hpp"
#include "swat/tokenizer.hpp"

namespace swat {

enum class Variant { transformer, mixer };

struct ModelConfig {
    Variant variant = Variant::transformer;
    int depth = 12;
    int embed = 192;
    int heads = 3;            // transformer only
    int token_hidden = 0;     // mixer token-mix hidden width
    int channel_hidden = 0;   // channel-mix hidden width; 0 means 4*embed on transformers
    int patch = 16;
    int alpha = 1;
    int image_size = 224;
    int in_channels = 3;
    int classes = 1000;
    bool pos_emb = true;
    bool swat_tokenize = false;
    bool swat_token_mix = false;
    bool swat_channel_mix = false;
    int token_mix_kernel = 3;    // parallel-conv / token-mix depthwise kernel
    int channel_mix_kernel = 5;  // channel-mix depthwise kernel

    void validate() const;
    // validate() plus defaulting: transformers get channel_hidden = 4*embed.
    ModelConfig resolved() const;
    StructureDescriptor structure() const;
    int64_t grid_side() const { return image_size / patch; }
    int64_t tokens_n() const { return grid_side() * grid_side(); }
};

// Shared state threaded through the mixing sublayers during a forward pass.
struct ForwardCtx {
    int64_t ht = 0;
    int64_t wt = 0;
    Tensor* attn_capture = nullptr;  // filled by attention sublayers
    int capture_layer = -1;
    int layer = -1;
};

struct MixSublayer {
    virtual ~MixSublayer() = default;
    virtual Tensor forward(const Tensor& x, const ForwardCtx& ctx) const = 0;
    virtual void register_params(ParamRegistry& r, const std::string& prefix) const = 0;
};

// Plain multi-head self-attention.
struct TokenMixAttention final : MixSublayer {
    MhsaLayer attn;

    TokenMixAttention(int64_t embed, int heads) : attn(embed, heads) {}
    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const override;
    void register_params(ParamRegistry& r, const std::string& prefix) const override;
};

// Attention whose qkv and output projections each average a Linear branch
// with a small conv applied over every token's sub-patch grid.
struct TokenMixAttentionSwat final : MixSublayer {
    StructureDescriptor desc;
    int heads;
    LinearLayer qkv_lin;    // C -> 3C
    Conv2dLayer qkv_conv;   // c -> 3c over (h, w)
    LinearLayer proj_lin;   // C -> C
    Conv2dLayer proj_conv;  // c -> c over (h, w)

    TokenMixAttentionSwat(const StructureDescriptor& desc, int heads, int kernel);
    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const override;
    void register_params(ParamRegistry& r, const std::string& prefix) const override;
};

// Token-mixing MLP shared across channels: N -> hidden -> N.
struct TokenMixMlp final : MixSublayer {
    LinearLayer fc1;
    LinearLayer fc2;

    TokenMixMlp(int64_t tokens, int64_t hidden) : fc1(tokens, hidden), fc2(hidden, tokens) {}
    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const override;
    void register_params(ParamRegistry& r, const std::string& prefix) const override;
};

// Token mixing as a pointwise/depthwise/pointwise sandwich over (B*c, N, h, w):
// tokens become conv channels and the sub-patch grid becomes the spatial domain.
struct TokenMixSandwich final : MixSublayer {
    StructureDescriptor desc;
    int64_t tokens;
    Conv2dLayer pw1;  // N -> hidden, 1x1
    Conv2dLayer dw;   // depthwise over (h, w)
    Conv2dLayer pw2;  // hidden -> N, 1x1

    TokenMixSandwich(const StructureDescriptor& desc, int64_t tokens, int64_t hidden, int kernel);
    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const override;
    void register_params(ParamRegistry& r, const std::string& prefix) const override;
};

// Per-token MLP: C -> hidden -> C.
struct ChannelMixMlp final : MixSublayer {
    LinearLayer fc1;
    LinearLayer fc2;

    ChannelMixMlp(int64_t embed, int64_t hidden) : fc1(embed, hidden), fc2(hidden, embed) {}
    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const override;
    void register_params(ParamRegistry& r, const std::string& prefix) const override;
};

// Channel mixing with a depthwise conv over the token grid between the two
// pointwise projections, so neighboring tokens leak into each other.
struct ChannelMixSandwich final : MixSublayer {
    Conv2dLayer pw1;  // C -> hidden, 1x1
    Conv2dLayer dw;   // depthwise over the token grid
    Conv2dLayer pw2;  // hidden -> C, 1x1
    // Test hook: drop the nonlinearity after the depthwise stage so a delta
    // kernel collapses the sandwich onto the plain MLP.
    bool second_gelu_identity = false;

    ChannelMixSandwich(int64_t embed, int64_t hidden, int kernel);
    Tensor forward(const Tensor& x, const ForwardCtx& ctx) const override;
    void register_params(ParamRegistry& r, const std::string& prefix) const override;
};

struct Model {
    ModelConfig cfg;
    std::unique_ptr<BaselineTokenizer> baseline_tok;
    std::unique_ptr<BottleneckStem> stem_tok;
    Tensor pos_emb;  // (N, C) when enabled

    struct Block {
        LayerNormLayer norm1;
        std::unique_ptr<MixSublayer> token_mix;
        LayerNormLayer norm2;
        std::unique_ptr<MixSublayer> channel_mix;
    };
    std::vector<Block> blocks;
    LayerNormLayer final_norm;
    LinearLayer head;

    ParamRegistry params() const;
    TokenGrid tokenize(const Tensor& images) const;
    // Runs the blocks, final norm, mean pooling, and classifier head over
    // already-tokenized input. Exposed so probes can permute tokens first.
    Tensor forward_tokens(const Tensor& tokens, int64_t ht, int64_t wt,
                          Tensor* attn_capture = nullptr, int capture_layer = -1) const;
    Tensor forward(const Tensor& images, Tensor* attn_capture = nullptr,
                   int capture_layer = -1) const;
};

Model build_model(const ModelConfig& cfg, uint64_t seed);

}  // namespace swat
