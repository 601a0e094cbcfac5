#include "timesql/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "timesql/rng.hpp"

namespace timesql {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

void TrigSpec::validate() const {
    if (num_points == 0) {
        throw std::invalid_argument("TrigSpec: num_points must be positive");
    }
    if (variables.empty()) {
        throw std::invalid_argument("TrigSpec: at least one variable is required");
    }
    for (std::size_t n = 0; n < variables.size(); ++n) {
        if (!(variables[n].period > 0.0)) {
            std::ostringstream msg;
            msg << "TrigSpec: variables[" << n << "]: period must be positive, got "
                << variables[n].period;
            throw std::invalid_argument(msg.str());
        }
    }
    if (!(noise_std >= 0.0)) {
        throw std::invalid_argument("TrigSpec: noise_std must be nonnegative");
    }
    if (!(noisy_fraction >= 0.0 && noisy_fraction <= 1.0)) {
        throw std::invalid_argument("TrigSpec: noisy_fraction must lie in [0,1]");
    }
}

TrigSpec TrigSpec::reference_preset(std::size_t num_points, double noise_std,
                                    std::uint64_t rng_seed) {
    TrigSpec spec;
    spec.num_points = num_points;
    spec.noise_std = noise_std;
    spec.noisy_fraction = 0.8;
    spec.rng_seed = rng_seed;
    const double amplitudes[] = {1, 2, 4, 6, 8, 10, 12, 14, 16, 18};
    for (int n = 0; n < 10; ++n) {
        spec.variables.push_back({amplitudes[n], 0.2 * n, static_cast<double>(n + 1)});
    }
    return spec;
}

double trig_clean_value(const TrigSpec& spec, std::size_t variable, std::size_t t) {
    const TrigVariableSpec& v = spec.variables.at(variable);
    return v.amplitude * std::sin(kTwoPi * static_cast<double>(t) / v.period + v.phase);
}

SeriesMatrix generate_trig(const TrigSpec& spec) {
    spec.validate();
    const std::size_t n_vars = spec.variables.size();
    const auto noisy_steps = static_cast<std::size_t>(
        std::ceil(spec.noisy_fraction * static_cast<double>(spec.num_points)));

    Matrix values(n_vars, spec.num_points);
    for (std::size_t n = 0; n < n_vars; ++n) {
        Rng rng(spec.rng_seed, n);
        for (std::size_t t = 0; t < spec.num_points; ++t) {
            double x = trig_clean_value(spec, n, t);
            if (t < noisy_steps && spec.noise_std > 0.0) {
                x += rng.normal(0.0, spec.noise_std);
            }
            values.at(n, t) = x;
        }
    }
    return make_series(std::move(values));
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string field;
    for (char ch : line) {
        if (ch == delimiter) {
            fields.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    fields.push_back(field);
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return s.substr(b, e - b);
}

double parse_cell(const std::string& raw, std::size_t line_no, std::size_t column,
                  const std::filesystem::path& path) {
    const std::string cell = trimmed(raw);
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || cell.empty()) {
        std::ostringstream msg;
        msg << "load_csv: " << path.string() << ": line " << line_no << ", column "
            << (column + 1) << ": non-numeric cell '" << cell << "'";
        throw std::runtime_error(msg.str());
    }
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "load_csv: " << path.string() << ": line " << line_no << ", column "
            << (column + 1) << ": non-finite value '" << cell << "'";
        throw std::runtime_error(msg.str());
    }
    return value;
}

}  // namespace

SeriesMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_csv: cannot open " + path.string());
    }

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    while (!lines.empty() && trimmed(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) {
        throw std::runtime_error("load_csv: " + path.string() + ": empty file");
    }

    std::size_t first_data_line = 0;
    std::vector<std::string> names;
    std::optional<std::size_t> drop_column;

    const std::size_t width = split_line(lines[0], options.delimiter).size();
    if (options.has_header) {
        auto header = split_line(lines[0], options.delimiter);
        for (std::size_t j = 0; j < header.size(); ++j) {
            const std::string name = trimmed(header[j]);
            if (options.time_column && name == *options.time_column) {
                drop_column = j;
            } else {
                names.push_back(name);
            }
        }
        first_data_line = 1;
    } else if (options.time_column) {
        throw std::runtime_error(
            "load_csv: time_column requires has_header (columns are identified by name)");
    }
    if (options.has_header && options.time_column && !drop_column) {
        throw std::runtime_error("load_csv: " + path.string() + ": time column '" +
                                 *options.time_column + "' not found in header");
    }
    if (first_data_line >= lines.size()) {
        throw std::runtime_error("load_csv: " + path.string() + ": no data rows");
    }

    const std::size_t n_vars = width - (drop_column ? 1 : 0);
    if (n_vars == 0) {
        throw std::runtime_error("load_csv: " + path.string() + ": no numeric columns left");
    }
    const std::size_t n_steps = lines.size() - first_data_line;

    Matrix values(n_vars, n_steps);
    for (std::size_t r = first_data_line; r < lines.size(); ++r) {
        const std::size_t line_no = r + 1;
        auto fields = split_line(lines[r], options.delimiter);
        if (fields.size() != width) {
            std::ostringstream msg;
            msg << "load_csv: " << path.string() << ": line " << line_no << ": expected "
                << width << " fields, got " << fields.size();
            throw std::runtime_error(msg.str());
        }
        const std::size_t t = r - first_data_line;
        std::size_t var = 0;
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (drop_column && j == *drop_column) continue;
            values.at(var, t) = parse_cell(fields[j], line_no, j, path);
            ++var;
        }
    }
    return make_series(std::move(values), std::move(names));
}

void save_csv(const SeriesMatrix& series, const std::filesystem::path& path,
              char delimiter) {
    series.validate();
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_csv: cannot open " + path.string() + " for writing");
    }
    const std::size_t n_vars = series.num_variables();
    for (std::size_t n = 0; n < n_vars; ++n) {
        if (n > 0) out << delimiter;
        out << (n < series.variable_names.size() ? series.variable_names[n]
                                                 : "v" + std::to_string(n));
    }
    out << '\n';
    char buf[40];
    for (std::size_t t = 0; t < series.num_steps(); ++t) {
        for (std::size_t n = 0; n < n_vars; ++n) {
            if (n > 0) out << delimiter;
            std::snprintf(buf, sizeof(buf), "%.17g", series.values.at(n, t));
            out << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("save_csv: write to " + path.string() + " failed");
    }
}

DatasetStats dataset_stats(const SeriesMatrix& series) {
    series.validate();
    DatasetStats stats;
    stats.num_features = series.num_variables();
    stats.num_samples = series.num_steps();
    const auto count = static_cast<double>(series.num_steps());
    for (std::size_t n = 0; n < series.num_variables(); ++n) {
        const auto row = series.values.row(n);
        VariableStats v;
        v.name = n < series.variable_names.size() ? series.variable_names[n]
                                                  : "v" + std::to_string(n);
        v.min = row[0];
        v.max = row[0];
        double sum = 0.0;
        for (double x : row) {
            sum += x;
            v.min = std::min(v.min, x);
            v.max = std::max(v.max, x);
        }
        v.mean = sum / count;
        double sq = 0.0;
        for (double x : row) sq += (x - v.mean) * (x - v.mean);
        v.stddev = std::sqrt(sq / count);
        stats.per_variable.push_back(std::move(v));
    }
    return stats;
}

TrigSpec parse_trig_spec(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& err) {
        throw std::runtime_error(std::string("parse_trig_spec: ") + err.what());
    }
    TrigSpec spec;
    try {
        spec.num_points = j.at("num_points").get<std::size_t>();
        for (const auto& v : j.at("variables")) {
            TrigVariableSpec var;
            var.amplitude = v.at("amplitude").get<double>();
            var.phase = v.value("phase", 0.0);
            var.period = v.at("period").get<double>();
            spec.variables.push_back(var);
        }
        spec.noise_std = j.value("noise_std", 0.0);
        spec.noisy_fraction = j.value("noisy_fraction", 0.0);
        spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& err) {
        throw std::runtime_error(std::string("parse_trig_spec: ") + err.what());
    }
    spec.validate();
    return spec;
}

std::string trig_spec_json(const TrigSpec& spec) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : spec.variables) {
        vars.push_back({{"amplitude", v.amplitude}, {"phase", v.phase}, {"period", v.period}});
    }
    const nlohmann::json j = {
        {"num_points", spec.num_points}, {"variables", vars},
        {"noise_std", spec.noise_std},   {"noisy_fraction", spec.noisy_fraction},
        {"rng_seed", spec.rng_seed},
    };
    return j.dump(2);
}

}  // namespace timesql
