#pragma once

#include <string>

#include "json.hpp"

#include "lptgnn/optim.hpp"

namespace lptgnn {

// Writes the manifest plus every parameter and buffer tensor (names, shapes,
// full-precision values) and the optimizer step count as one JSON document.
void save_checkpoint(const std::string& path, const nlohmann::ordered_json& manifest,
                     const ParamStore& store);

// Fills the empty store from a checkpoint and returns its manifest.
nlohmann::json load_checkpoint(const std::string& path, ParamStore& store);

}  // namespace lptgnn
