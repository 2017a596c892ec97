#include "swat/tokenizer.hpp"

#include <algorithm>

namespace swat {

StructureDescriptor StructureDescriptor::make(int patch, int alpha, int embed) {
    StructureDescriptor d;
    d.patch = patch;
    d.alpha = alpha;
    d.sub_h = alpha;
    d.sub_w = alpha;
    d.embed = embed;
    if (alpha < 1) throw StructureError("alpha must be >= 1, got " + std::to_string(alpha));
    if (embed % (alpha * alpha) != 0) {
        throw StructureError("embed width " + std::to_string(embed) + " not divisible by alpha^2=" +
                             std::to_string(alpha * alpha));
    }
    d.chan = embed / (alpha * alpha);
    d.validate();
    return d;
}

void StructureDescriptor::validate() const {
    if (patch < 1 || alpha < 1 || chan < 1 || sub_h < 1 || sub_w < 1) {
        throw StructureError("structure extents must be positive");
    }
    if (patch % alpha != 0) {
        throw StructureError("patch " + std::to_string(patch) + " not divisible by alpha " +
                             std::to_string(alpha));
    }
    if (sub_h != alpha || sub_w != alpha) {
        throw StructureError("sub-patch grid must be alpha x alpha");
    }
    if (embed != chan * sub_h * sub_w) {
        throw StructureError("embed width " + std::to_string(embed) + " != chan*h*w");
    }
}

StructureDescriptor::ChannelPos StructureDescriptor::decode_channel(int k) const {
    if (k < 0 || k >= embed) {
        throw StructureError("feature index " + std::to_string(k) + " outside embed width " +
                             std::to_string(embed));
    }
    const int hw = sub_h * sub_w;
    return {k / hw, (k % hw) / sub_w, k % sub_w};
}

Tensor TokenGrid::tokens() const { return reshape(data, {batch(), tokens_n(), data.extent(3)}); }

TokenGrid TokenGrid::from_tokens(const Tensor& tok, int64_t ht, int64_t wt,
                                 StructureDescriptor structure) {
    if (tok.dim() != 3) throw StructureError("token tensor must be (B, N, C), got " + shape_str(tok.shape()));
    if (tok.extent(1) != ht * wt) {
        throw StructureError("token count " + std::to_string(tok.extent(1)) +
                             " does not tile a " + std::to_string(ht) + "x" + std::to_string(wt) +
                             " grid");
    }
    if (tok.extent(2) != structure.embed) {
        throw StructureError("token width " + std::to_string(tok.extent(2)) +
                             " does not match structure embed " + std::to_string(structure.embed));
    }
    return {reshape(tok, {tok.extent(0), ht, wt, tok.extent(2)}), structure};
}

Tensor restructure(const Tensor& map, int sub_h, int sub_w) {
    if (map.dim() != 4) throw StructureError("restructure expects (B, c, H, W), got " + shape_str(map.shape()));
    if (sub_h < 1 || sub_w < 1) throw StructureError("sub-patch extents must be positive");
    const int64_t B = map.extent(0), c = map.extent(1), H = map.extent(2), W = map.extent(3);
    if (H % sub_h != 0 || W % sub_w != 0) {
        throw StructureError("map " + shape_str(map.shape()) + " does not tile into " +
                             std::to_string(sub_h) + "x" + std::to_string(sub_w) + " neighborhoods");
    }
    const int64_t Ht = H / sub_h, Wt = W / sub_w;
    Tensor split = reshape(map, {B, c, Ht, sub_h, Wt, sub_w});
    Tensor moved = permute(split, {0, 2, 4, 1, 3, 5});  // (B, Ht, Wt, c, h, w)
    return reshape(moved, {B, Ht, Wt, c * sub_h * sub_w});
}

Tensor unrestructure(const Tensor& grid, int sub_h, int sub_w) {
    if (grid.dim() != 4) throw StructureError("unrestructure expects (B, Ht, Wt, C), got " + shape_str(grid.shape()));
    if (sub_h < 1 || sub_w < 1) throw StructureError("sub-patch extents must be positive");
    const int64_t B = grid.extent(0), Ht = grid.extent(1), Wt = grid.extent(2), C = grid.extent(3);
    if (C % (sub_h * sub_w) != 0) {
        throw StructureError("token width " + std::to_string(C) + " not divisible by sub-patch area " +
                             std::to_string(sub_h * sub_w));
    }
    const int64_t c = C / (sub_h * sub_w);
    Tensor split = reshape(grid, {B, Ht, Wt, c, sub_h, sub_w});
    Tensor moved = permute(split, {0, 3, 1, 4, 2, 5});  // (B, c, Ht, h, Wt, w)
    return reshape(moved, {B, c, Ht * sub_h, Wt * sub_w});
}

namespace {

void check_image(const Tensor& image, int in_channels, int patch) {
    if (image.dim() != 4) {
        throw StructureError("image batch must be (B, C, H, W), got " + shape_str(image.shape()));
    }
    if (image.extent(1) != in_channels) {
        throw StructureError("image has " + std::to_string(image.extent(1)) + " channels, expected " +
                             std::to_string(in_channels));
    }
    if (image.extent(2) % patch != 0 || image.extent(3) % patch != 0) {
        throw StructureError("image " + shape_str(image.shape()) + " not divisible into " +
                             std::to_string(patch) + "x" + std::to_string(patch) + " patches");
    }
}

}  // namespace

BaselineTokenizer::BaselineTokenizer(int in_channels, int patch, int embed)
    : conv(in_channels, embed, patch, patch, 0),
      desc(StructureDescriptor::baseline(patch, embed)),
      in_channels(in_channels) {}

TokenGrid BaselineTokenizer::forward(const Tensor& image) const {
    check_image(image, in_channels, desc.patch);
    Tensor map = conv.forward(image);                    // (B, C, Ht, Wt)
    return {permute(map, {0, 2, 3, 1}), desc};
}

void BaselineTokenizer::register_params(ParamRegistry& r, const std::string& prefix) const {
    conv.register_params(r, prefix + ".proj");
}

SwatTokenizer::SwatTokenizer(int in_channels, StructureDescriptor d)
    : conv(in_channels, d.chan, d.patch / d.alpha, d.patch / d.alpha, 0),
      desc(d),
      in_channels(in_channels) {
    desc.validate();
}

TokenGrid SwatTokenizer::forward(const Tensor& image) const {
    check_image(image, in_channels, desc.patch);
    Tensor map = conv.forward(image);  // (B, chan, alpha*Ht, alpha*Wt)
    return {restructure(map, desc.sub_h, desc.sub_w), desc};
}

void SwatTokenizer::register_params(ParamRegistry& r, const std::string& prefix) const {
    conv.register_params(r, prefix + ".proj");
}

StemConfig default_stem_config(int in_channels, const StructureDescriptor& desc) {
    desc.validate();
    (void)in_channels;
    const int stride_total = desc.patch / desc.alpha;
    const int wide = std::max(16, desc.chan);

    StemConfig cfg;
    int s = stride_total;
    int doublings = 0;
    while (s % 2 == 0) {
        s /= 2;
        ++doublings;
    }
    if (s != 1) {
        // Not a power of two: patchify in one strided step, then refine.
        cfg.stages.push_back({wide, stride_total, stride_total, 0, true});
        cfg.stages.push_back({wide, 3, 1, 1, true});
    } else if (doublings == 0) {
        cfg.stages.push_back({wide, 3, 1, 1, true});
    } else {
        for (int i = 1; i <= doublings; ++i) {
            const int width = std::max(16, wide >> (doublings - i));
            cfg.stages.push_back({width, 3, 2, 1, true});
        }
        if (doublings == 1) cfg.stages.push_back({wide, 3, 1, 1, true});
    }
    cfg.stages.push_back({desc.chan, 1, 1, 0, false});
    return cfg;
}

BottleneckStem make_bottleneck_stem(int in_channels, const StemConfig& config,
                                    StructureDescriptor desc) {
    desc.validate();
    if (config.stages.empty()) throw ConfigError("stem needs at least one stage");
    int64_t cumulative = 1;
    for (const auto& st : config.stages) {
        if (st.out_channels < 1 || st.kernel < 1 || st.stride < 1 || st.padding < 0) {
            throw ConfigError("stem stage extents must be positive");
        }
        cumulative *= st.stride;
    }
    if (cumulative != desc.patch / desc.alpha) {
        throw ConfigError("stem cumulative stride " + std::to_string(cumulative) +
                          " must equal patch/alpha = " + std::to_string(desc.patch / desc.alpha));
    }
    if (config.stages.back().out_channels != desc.chan) {
        throw ConfigError("stem must end at " + std::to_string(desc.chan) + " channels, got " +
                          std::to_string(config.stages.back().out_channels));
    }

    BottleneckStem stem;
    stem.desc = desc;
    stem.in_channels = in_channels;
    int prev = in_channels;
    for (const auto& st : config.stages) {
        stem.convs.emplace_back(prev, st.out_channels, st.kernel, st.stride, st.padding);
        stem.gelu_after.push_back(st.gelu_after);
        prev = st.out_channels;
    }
    return stem;
}

TokenGrid BottleneckStem::forward(const Tensor& image) const {
    check_image(image, in_channels, desc.patch);
    Tensor x = image;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        x = convs[i].forward(x);
        if (gelu_after[i]) x = gelu(x);
    }
    const int64_t want_h = image.extent(2) / desc.patch * desc.alpha;
    const int64_t want_w = image.extent(3) / desc.patch * desc.alpha;
    if (x.extent(2) != want_h || x.extent(3) != want_w) {
        throw StructureError("stem produced a " + shape_str(x.shape()) + " map; expected spatial " +
                             std::to_string(want_h) + "x" + std::to_string(want_w));
    }
    return {restructure(x, desc.sub_h, desc.sub_w), desc};
}

void BottleneckStem::register_params(ParamRegistry& r, const std::string& prefix) const {
    for (std::size_t i = 0; i < convs.size(); ++i) {
        convs[i].register_params(r, prefix + ".stage" + std::to_string(i));
    }
}

StructureDescriptor PatchMergeLayer::merged_descriptor(const StructureDescriptor& in_desc) {
    StructureDescriptor out = in_desc;
    out.patch = in_desc.patch * 2;
    out.chan = in_desc.chan * 2;
    out.embed = in_desc.embed * 2;
    out.validate();
    return out;
}

PatchMergeLayer::PatchMergeLayer(const StructureDescriptor& in_desc)
    : conv(in_desc.chan, in_desc.chan * 2, 3, 2, 1) {}

TokenGrid PatchMergeLayer::forward(const TokenGrid& grid) const {
    grid.structure.validate();
    if (grid.ht() % 2 != 0 || grid.wt() % 2 != 0) {
        throw StructureError("patch merge needs an even token grid, got " +
                             std::to_string(grid.ht()) + "x" + std::to_string(grid.wt()));
    }
    if (grid.structure.chan != conv.weight.extent(1)) {
        throw StructureError("patch merge built for " + std::to_string(conv.weight.extent(1)) +
                             " channels, applied to " + std::to_string(grid.structure.chan));
    }
    Tensor map = unrestructure(grid.data, grid.structure.sub_h, grid.structure.sub_w);
    Tensor merged = conv.forward(map);
    return {restructure(merged, grid.structure.sub_h, grid.structure.sub_w),
            merged_descriptor(grid.structure)};
}

void PatchMergeLayer::register_params(ParamRegistry& r, const std::string& prefix) const {
    conv.register_params(r, prefix + ".merge");
}

}  // namespace swat
