#pragma once

#include <cstdint>
#include <vector>

#include "swat/blocks.hpp"

namespace swat {

// Labeled image set held in memory: images (n, channels, size, size),
// labels[i] in [0, classes).
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    int classes = 0;

    int64_t size() const { return images.defined() ? images.extent(0) : 0; }
};

// Striped-texture classification. Class k draws stripes along orientation
// k % 2 with phase offset (k / 2) * period / ceil(classes / 2), so classes
// differ only through local texture, never through where anything sits in the
// image. Keep period below the sub-patch side and the signal lives entirely
// at the scale the structure-aware pieces look at. Labels cycle 0..classes-1,
// noise is truncated gaussian per pixel, and the whole set is a pure function
// of the spec.
struct DatasetSpec {
    int n_samples = 256;
    int classes = 4;
    int image_size = 16;
    int channels = 3;
    int period = 2;      // stripe wavelength in pixels
    double noise = 0.1;  // pixel sigma
    uint64_t seed = 0;
};

Dataset make_synthetic_dataset(const DatasetSpec& spec);

// AdamW: bias-corrected moments, weight decay applied directly to the weights
// rather than through the gradient.
struct OptimizerConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    int epochs = 20;
    int batch = 32;

    void validate() const;
};

struct EpochStats {
    double loss = 0.0;      // mean cross-entropy over the epoch's batches
    double accuracy = 0.0;  // whole-set accuracy after the epoch's updates
};

// Every parameter concatenated in registration order.
std::vector<double> snapshot_params(const Model& m);
void restore_params(const Model& m, const std::vector<double>& snapshot);

struct TrainResult {
    std::vector<EpochStats> history;  // one entry per epoch
    int best_epoch = -1;              // highest accuracy, earliest on ties
    std::vector<double> best_params;  // snapshot taken right after best_epoch
};

// Minibatch AdamW over reshuffled epochs. The model is left holding the last
// epoch's parameters; the best epoch's live in the result for restore_params.
// A non-finite loss, or any op rejecting a non-finite activation, aborts with
// a NumericError naming the epoch. Deterministic in (model, data, opt, seed).
TrainResult train(const Model& m, const Dataset& data, const OptimizerConfig& opt, uint64_t seed);

// Argmax accuracy; ties resolve to the lowest class index. Throws
// ContractError on an empty dataset.
double evaluate(const Model& m, const Dataset& data);

}  // namespace swat
