#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swat/layers.hpp"
#include "swat/tensor.hpp"

namespace swat {

// Describes how a token's feature vector is laid out: `chan` sub-patch
// channels over a sub_h x sub_w spatial grid inside the patch, flattened
// channel-major, so feature k decodes to (k / (h*w), (k % (h*w)) / w, k % w).
struct StructureDescriptor {
    int patch = 16;   // patch side in pixels
    int alpha = 1;    // sub-patches per patch side
    int chan = 0;     // channels per sub-patch
    int sub_h = 1;
    int sub_w = 1;
    int embed = 0;    // chan * sub_h * sub_w

    static StructureDescriptor make(int patch, int alpha, int embed);
    static StructureDescriptor baseline(int patch, int embed) { return make(patch, 1, embed); }
    void validate() const;

    struct ChannelPos {
        int chan, row, col;
    };
    ChannelPos decode_channel(int k) const;
};

// A batch of tokens that remembers its 2-D arrangement: data is
// (B, Ht, Wt, embed). tokens() flattens the grid axes to (B, N, embed).
struct TokenGrid {
    Tensor data;
    StructureDescriptor structure;

    int64_t batch() const { return data.extent(0); }
    int64_t ht() const { return data.extent(1); }
    int64_t wt() const { return data.extent(2); }
    int64_t tokens_n() const { return ht() * wt(); }
    Tensor tokens() const;

    static TokenGrid from_tokens(const Tensor& tok, int64_t ht, int64_t wt,
                                 StructureDescriptor structure);
};

// (B, c, Ht*h, Wt*w) feature map -> (B, Ht, Wt, c*h*w) token tensor, grouping
// each h x w neighborhood into one token with the channel-major layout above.
Tensor restructure(const Tensor& map, int sub_h, int sub_w);
// Exact inverse of restructure.
Tensor unrestructure(const Tensor& grid, int sub_h, int sub_w);

// Single p x p conv at stride p; every token sees one whole patch.
struct BaselineTokenizer {
    Conv2dLayer conv;
    StructureDescriptor desc;
    int in_channels = 3;

    BaselineTokenizer() = default;
    BaselineTokenizer(int in_channels, int patch, int embed);
    TokenGrid forward(const Tensor& image) const;
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

// Single (p/alpha) x (p/alpha) conv at stride p/alpha followed by restructure:
// tokens carry alpha^2 sub-patch embeddings of chan channels each.
struct SwatTokenizer {
    Conv2dLayer conv;
    StructureDescriptor desc;
    int in_channels = 3;

    SwatTokenizer() = default;
    SwatTokenizer(int in_channels, StructureDescriptor desc);
    TokenGrid forward(const Tensor& image) const;
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

struct StemStage {
    int out_channels;
    int kernel;
    int stride;
    int padding;
    bool gelu_after;
};

struct StemConfig {
    std::vector<StemStage> stages;
};

// Strided 3x3 stages doubling width up to max(16, chan), a refinement stage
// when there is only one (or no) strided stage, then a 1x1 projection to chan.
StemConfig default_stem_config(int in_channels, const StructureDescriptor& desc);

// Multi-conv stem that lands on the same sub-patch grid as the single-conv
// tokenizer (cumulative stride p/alpha) before the restructure step.
struct BottleneckStem {
    std::vector<Conv2dLayer> convs;
    std::vector<bool> gelu_after;
    StructureDescriptor desc;
    int in_channels = 3;

    TokenGrid forward(const Tensor& image) const;
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

BottleneckStem make_bottleneck_stem(int in_channels, const StemConfig& config,
                                    StructureDescriptor desc);

// 3x3 stride-2 conv on the unrestructured map: halves the token grid, doubles
// the per-sub-patch channels, keeps the sub-patch layout.
struct PatchMergeLayer {
    Conv2dLayer conv;

    PatchMergeLayer() = default;
    explicit PatchMergeLayer(const StructureDescriptor& in_desc);
    TokenGrid forward(const TokenGrid& grid) const;
    static StructureDescriptor merged_descriptor(const StructureDescriptor& in_desc);
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

}  // namespace swat
