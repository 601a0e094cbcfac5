#include "timesql/patching.hpp"

#include <sstream>
#include <stdexcept>

namespace timesql {

std::size_t patch_count(std::size_t length, const PatchScaleSpec& scale) {
    if (scale.patch_len == 0 || scale.stride == 0) {
        throw std::invalid_argument("patch_count: patch_len and stride must be positive");
    }
    if (scale.patch_len > length) {
        std::ostringstream msg;
        msg << "patch_count: patch length " << scale.patch_len
            << " exceeds window length " << length;
        throw std::invalid_argument(msg.str());
    }
    return (length - scale.patch_len) / scale.stride + 1;
}

void MultiScaleConfig::validate(std::size_t lookback) const {
    if (scales.empty()) {
        throw std::invalid_argument("MultiScaleConfig: at least one scale is required");
    }
    for (std::size_t k = 0; k < scales.size(); ++k) {
        try {
            patch_count(lookback, scales[k]);
        } catch (const std::invalid_argument& err) {
            std::ostringstream msg;
            msg << "MultiScaleConfig: scales[" << k << "]: " << err.what();
            throw std::invalid_argument(msg.str());
        }
    }
}

PatchTensor patch(const SeriesMatrix& input, const PatchScaleSpec& scale) {
    const std::size_t length = input.num_steps();
    const std::size_t count = patch_count(length, scale);
    const std::size_t n_vars = input.num_variables();

    PatchTensor out;
    out.num_variables = n_vars;
    out.num_patches = count;
    out.scale = scale;
    out.values.resize(n_vars * count * scale.patch_len);

    std::size_t write = 0;
    for (std::size_t n = 0; n < n_vars; ++n) {
        const auto row = input.values.row(n);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t start = i * scale.stride;
            for (std::size_t s = 0; s < scale.patch_len; ++s) {
                out.values[write++] = row[start + s];
            }
        }
    }
    return out;
}

std::vector<PatchTensor> multi_patch(const SeriesMatrix& input,
                                     const MultiScaleConfig& config) {
    if (config.scales.empty()) {
        throw std::invalid_argument("multi_patch: at least one scale is required");
    }
    std::vector<PatchTensor> out;
    out.reserve(config.scales.size());
    for (std::size_t k = 0; k < config.scales.size(); ++k) {
        try {
            out.push_back(patch(input, config.scales[k]));
        } catch (const std::invalid_argument& err) {
            std::ostringstream msg;
            msg << "multi_patch: scales[" << k << "]: " << err.what();
            throw std::invalid_argument(msg.str());
        }
    }
    return out;
}

}  // namespace timesql
