#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "timesql/types.hpp"

namespace timesql {

// One patching scale: segment length and sliding step.
struct PatchScaleSpec {
    std::size_t patch_len = 1;  // segment length, must not exceed the window
    std::size_t stride = 1;     // sliding step, >= 1

    bool operator==(const PatchScaleSpec&) const = default;
};

// Number of patches a window of `length` columns yields under `scale`:
// floor((length - patch_len) / stride) + 1.  No padding is applied, so
// trailing steps that do not fill a patch are dropped.  Throws when the patch
// is longer than the window.
std::size_t patch_count(std::size_t length, const PatchScaleSpec& scale);

// Patch decomposition of one window at one scale.  Values are stored
// [variable][patch][offset], so a single patch is contiguous.  Patch i of
// variable n (0-based here; the usual notation counts patches from 1) covers
// input columns [i*stride, i*stride + patch_len).
struct PatchTensor {
    std::size_t num_variables = 0;
    std::size_t num_patches = 0;
    PatchScaleSpec scale;
    std::vector<double> values;

    double at(std::size_t var, std::size_t patch, std::size_t offset) const {
        return values[(var * num_patches + patch) * scale.patch_len + offset];
    }
    std::span<const double> patch_row(std::size_t var, std::size_t patch) const {
        return {values.data() + (var * num_patches + patch) * scale.patch_len,
                scale.patch_len};
    }
};

struct MultiScaleConfig {
    std::vector<PatchScaleSpec> scales;

    // Throws if the list is empty or any scale cannot be applied to a window
    // of `lookback` columns.
    void validate(std::size_t lookback) const;

    bool operator==(const MultiScaleConfig&) const = default;
};

// Single-scale patching.  Patches are materialized copies, not views.
PatchTensor patch(const SeriesMatrix& input, const PatchScaleSpec& scale);

// Applies every scale in order; element k equals patch(input, scales[k]).
// A failing scale is reported with its index in the config.
std::vector<PatchTensor> multi_patch(const SeriesMatrix& input,
                                     const MultiScaleConfig& config);

}  // namespace timesql
