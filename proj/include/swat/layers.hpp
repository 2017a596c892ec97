#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "swat/tensor.hpp"

namespace swat {

struct ParamEntry {
    std::string name;
    Tensor tensor;
};

// Ordered, uniquely named collection of trainable tensors. Registration order
// is the model traversal order, which makes initialization and optimizer state
// deterministic for a given seed.
class ParamRegistry {
  public:
    void add(std::string name, Tensor t);
    const std::vector<ParamEntry>& entries() const { return items_; }
    Tensor find(const std::string& name) const;
    int64_t total_count() const;
    void zero_grads() const;

  private:
    std::vector<ParamEntry> items_;
};

// Deterministic truncated normal sampler: Box-Muller over mt19937_64 with
// rejection of |z| > 2. Not std::normal_distribution, whose output sequence
// is implementation-defined.
class TruncNormal {
  public:
    explicit TruncNormal(uint64_t seed) : rng_(seed) {}
    double next();  // unit sigma, |z| <= 2

  private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct InitPolicy {
    double sigma = 0.02;
    uint64_t seed = 0;
};

// Fills every registered parameter according to its name suffix: .weight and
// .pos_emb get sigma-scaled truncated normal draws, .bias and .beta get zeros,
// .gamma gets ones. Any other suffix is a naming-discipline violation.
void init_params(const ParamRegistry& params, const InitPolicy& policy);

struct LinearLayer {
    Tensor weight;  // (out, in)
    Tensor bias;    // (out)

    LinearLayer() = default;
    LinearLayer(int64_t in, int64_t out);
    Tensor forward(const Tensor& x) const;  // x: (..., in) -> (..., out)
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

struct LayerNormLayer {
    Tensor gamma;
    Tensor beta;
    double eps = 1e-6;

    LayerNormLayer() = default;
    explicit LayerNormLayer(int64_t width);
    Tensor forward(const Tensor& x) const;  // normalizes the last axis
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

struct Conv2dLayer {
    Tensor weight;  // (out, in/groups, k, k)
    Tensor bias;    // (out)
    int stride = 1;
    int padding = 0;
    int groups = 1;

    Conv2dLayer() = default;
    Conv2dLayer(int64_t in, int64_t out, int kernel, int stride, int padding, int groups = 1);
    Tensor forward(const Tensor& x) const;
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

// Scaled dot-product attention over already-projected qkv: (B, N, 3C) -> (B, N, C).
// When attn_out is non-null it receives the post-softmax attention (B, heads, N, N).
Tensor attention_core(const Tensor& qkv, int heads, Tensor* attn_out = nullptr);

struct MhsaLayer {
    int heads = 1;
    LinearLayer qkv;   // C -> 3C
    LinearLayer proj;  // C -> C

    MhsaLayer() = default;
    MhsaLayer(int64_t embed, int heads);
    Tensor forward(const Tensor& x, Tensor* attn_out = nullptr) const;
    void register_params(ParamRegistry& r, const std::string& prefix) const;
};

}  // namespace swat
