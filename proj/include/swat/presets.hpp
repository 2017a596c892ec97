#pragma once

#include <string>
#include <vector>

#include "swat/blocks.hpp"

namespace swat {

// Named baseline configurations matching the published table rows, plus
// tiny-mixer-swat, a seconds-scale model for the synthetic training demo.
// Structure-aware switches default off; flip them with with_swat or the
// per-flag fields. Throws ConfigError for an unknown name.
ModelConfig preset(const std::string& name);

std::vector<std::string> preset_names();

// All three structure-aware switches at once.
ModelConfig with_swat(ModelConfig cfg, bool on = true);

}  // namespace swat
