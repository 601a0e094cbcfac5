#pragma once

#include <filesystem>

#include "timesql/model.hpp"

namespace timesql {

// Checkpoint file layout: one JSON manifest line (model config including the
// patching scales, plus the shape of every parameter array), followed by the
// flat parameter vector, one value per line with 17 significant digits so the
// round-trip is exact.  Loading rebuilds the params from the manifest's
// config and validates every declared shape against it.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace timesql
