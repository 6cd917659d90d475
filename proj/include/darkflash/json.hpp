#pragma once

#include <json.hpp>

namespace darkflash {

// Insertion-ordered JSON so every serialized artifact is byte-stable across
// runs (required for reproducible capture sessions).
using Json = nlohmann::ordered_json;

}  // namespace darkflash
