#include "timesql/checkpoint.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace timesql {

namespace {

nlohmann::json shape_manifest(const ModelParams& params) {
    nlohmann::json arrays = nlohmann::json::array();
    for (std::size_t k = 0; k < params.encoders.size(); ++k) {
        const auto& enc = params.encoders[k];
        arrays.push_back({{"name", "encoder" + std::to_string(k) + ".weight"},
                          {"shape", {enc.out, enc.in}}});
        arrays.push_back(
            {{"name", "encoder" + std::to_string(k) + ".bias"}, {"shape", {enc.out}}});
    }
    arrays.push_back({{"name", "head.weight"}, {"shape", {params.head.out, params.head.in}}});
    arrays.push_back({{"name", "head.bias"}, {"shape", {params.head.out}}});
    if (params.affine_scale) {
        arrays.push_back({{"name", "affine.scale"}, {"shape", {params.affine_scale->size()}}});
        arrays.push_back({{"name", "affine.shift"}, {"shape", {params.affine_shift->size()}}});
    }
    return arrays;
}

nlohmann::json scales_json(const MultiScaleConfig& scales) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : scales.scales) {
        out.push_back({s.patch_len, s.stride});
    }
    return out;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    params.validate();
    const nlohmann::json manifest = {
        {"format", "timesql-checkpoint"},
        {"version", 1},
        {"config",
         {{"num_variables", params.config.num_variables},
          {"lookback", params.config.lookback},
          {"horizon", params.config.horizon},
          {"hidden", params.config.hidden},
          {"revin_affine", params.config.revin_affine},
          {"scales", scales_json(params.config.scales)}}},
        {"arrays", shape_manifest(params)},
        {"parameter_count", params.parameter_count()},
    };
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    }
    out << manifest.dump() << '\n';
    char buf[40];
    for (double v : params.flatten()) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << '\n';
    }
    if (!out) {
        throw std::runtime_error("save_checkpoint: write to " + path.string() + " failed");
    }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    }
    std::string manifest_line;
    if (!std::getline(in, manifest_line)) {
        throw std::runtime_error("load_checkpoint: " + path.string() + ": missing manifest");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_line);
    } catch (const nlohmann::json::parse_error& err) {
        throw std::runtime_error("load_checkpoint: bad manifest: " + std::string(err.what()));
    }
    if (manifest.value("format", "") != "timesql-checkpoint") {
        throw std::runtime_error("load_checkpoint: " + path.string() +
                                 ": not a timesql checkpoint");
    }

    ModelConfig config;
    try {
        const auto& c = manifest.at("config");
        config.num_variables = c.at("num_variables").get<std::size_t>();
        config.lookback = c.at("lookback").get<std::size_t>();
        config.horizon = c.at("horizon").get<std::size_t>();
        config.hidden = c.at("hidden").get<std::size_t>();
        config.revin_affine = c.at("revin_affine").get<bool>();
        for (const auto& s : c.at("scales")) {
            config.scales.scales.push_back(
                {s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& err) {
        throw std::runtime_error("load_checkpoint: bad manifest: " + std::string(err.what()));
    }

    ModelParams params = ModelParams::zeros(config);

    // Validate the declared array shapes against what the config implies.
    const nlohmann::json expected = shape_manifest(params);
    if (manifest.at("arrays") != expected) {
        throw std::runtime_error(
            "load_checkpoint: manifest arrays do not match the declared config");
    }
    const auto expected_count = params.parameter_count();
    if (manifest.at("parameter_count").get<std::size_t>() != expected_count) {
        throw std::runtime_error("load_checkpoint: manifest parameter_count mismatch");
    }

    std::vector<double> flat;
    flat.reserve(expected_count);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
        if (ec != std::errc{} || ptr != line.data() + line.size()) {
            throw std::runtime_error("load_checkpoint: bad parameter line '" + line + "'");
        }
        flat.push_back(value);
    }
    if (flat.size() != expected_count) {
        std::ostringstream msg;
        msg << "load_checkpoint: expected " << expected_count << " parameters, file has "
            << flat.size();
        throw std::runtime_error(msg.str());
    }
    params.unflatten(flat);
    return params;
}

}  // namespace timesql
