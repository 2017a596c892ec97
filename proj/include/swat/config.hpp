#pragma once

#include <cstdint>
#include <string>

#include "swat/blocks.hpp"
#include "swat/trainer.hpp"

namespace swat {

// One experiment description: what to build, what to feed it, how to fit it.
struct RunConfig {
    ModelConfig model;
    DatasetSpec dataset;
    OptimizerConfig optimizer;
    uint64_t seed = 0;
};

// Strict JSON loading: unknown keys anywhere are ConfigErrors, as are type
// mismatches and malformed documents. Inside "model", an optional "preset"
// names a starting point and is applied first, then "swat" (all three
// structure switches at once), then individual fields, so explicit settings
// always win. Dataset geometry left unset follows the model: image_size,
// channels from in_channels, and classes are copied over so the two halves
// cannot drift apart silently.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);  // IoError when unreadable

}  // namespace swat
