#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swat/blocks.hpp"

namespace swat {

struct ComplexityRow {
    std::string path;
    int64_t params = 0;
    int64_t flops = 0;  // multiply-accumulates for one image
};

// Per-component cost table. FLOP counting follows the MAC convention: one
// multiply-accumulate is one FLOP; a matmul (m,k)x(k,n) costs m*k*n and a
// conv costs out_elems * k^2 * in/groups. Normalizations, activations,
// softmax, residual adds, pooling, and bias adds are free. Parameter counts
// include biases and norm affines.
struct ComplexityReport {
    std::vector<ComplexityRow> rows;
    int64_t total_params = 0;
    int64_t total_flops = 0;
    std::string counting_convention = "mac=1flop";

    const ComplexityRow& row(const std::string& path) const;  // ContractError if absent
};

// Cost helpers underlying every row; exposed so their conventions can be
// pinned directly.
int64_t conv_flops(int64_t out_channels, int64_t out_h, int64_t out_w, int64_t kernel,
                   int64_t in_channels, int64_t groups);
int64_t linear_flops(int64_t rows, int64_t in, int64_t out);

// Full accounting for the architecture a config describes, at the given
// input side (default: cfg.image_size). Pure arithmetic; no model is built.
ComplexityReport count_model(const ModelConfig& cfg);
ComplexityReport count_model(const ModelConfig& cfg, int image_size);

// Same accounting keyed off a built model. Parameter rows describe the model
// as built (the position table keeps its built size); FLOPs are evaluated at
// the requested input side.
ComplexityReport count_params(const Model& m);
ComplexityReport count_flops(const Model& m, int image_size);

struct SweepEntry {
    std::string value;
    bool ok = false;
    std::string error;  // set when !ok; the sweep continues past bad values
    ComplexityReport report;
};

// One report per value along an axis:
//   "alpha"  - structure granularity; the value 1 preserves no structure
//              within tokens, so that point is the plain baseline (all
//              structure-aware switches off).
//   "kernel" - channel-mixing depthwise kernel (the token-mixing kernel is
//              pinned small by the sub-patch extent).
//   "flags"  - three 0/1 characters toggling tokenize/token-mix/channel-mix,
//              e.g. "101".
std::vector<SweepEntry> sweep(const ModelConfig& base, const std::string& axis,
                              const std::vector<std::string>& values);

}  // namespace swat
