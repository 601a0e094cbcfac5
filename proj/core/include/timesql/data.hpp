#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "timesql/types.hpp"

namespace timesql {

// One generated sinusoid: amplitude * sin(2*pi*t/period + phase), with t the
// integer sample index.
struct TrigVariableSpec {
    double amplitude = 1.0;
    double phase = 0.0;
    double period = 1.0;
};

// Synthetic dataset spec: sinusoidal variables with zero-mean Gaussian noise
// added to the leading noisy_fraction of the points; the remaining suffix
// stays exact.
struct TrigSpec {
    std::size_t num_points = 0;
    std::vector<TrigVariableSpec> variables;
    double noise_std = 0.0;
    double noisy_fraction = 0.0;  // in [0, 1]; noisy steps: t < ceil(fraction*num_points)
    std::uint64_t rng_seed = 0;

    void validate() const;

    // The 10-variable reference configuration: amplitudes
    // {1,2,4,6,8,10,12,14,16,18}, phases {0,0.2,...,1.8}, periods {1,...,10},
    // noise on the first 80% of the points.
    static TrigSpec reference_preset(std::size_t num_points = 20000,
                                     double noise_std = 0.0,
                                     std::uint64_t rng_seed = 0);
};

// Deterministic for a fixed spec: variable n draws its noise from substream n
// of rng_seed (Box-Muller over mt19937_64).
SeriesMatrix generate_trig(const TrigSpec& spec);

// Noiseless value of variable n at step t under the spec.
double trig_clean_value(const TrigSpec& spec, std::size_t variable, std::size_t t);

struct CsvOptions {
    char delimiter = ',';
    bool has_header = true;
    // Name of a column to drop before ingestion (e.g. a timestamp column).
    // No auto-detection: leaving this empty means every column must be numeric.
    std::optional<std::string> time_column;
};

// Reads a rectangular numeric table (rows = timesteps, columns = variables)
// and transposes it into the variables-first layout.  Ragged rows,
// non-numeric cells (including "NaN") and empty files raise errors naming the
// line (1-based, header included).
SeriesMatrix load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

// Writes the transpose of `series` (rows = timesteps) with a header line.
// Values are printed with 17 significant digits so a load round-trips.
void save_csv(const SeriesMatrix& series, const std::filesystem::path& path,
              char delimiter = ',');

struct VariableStats {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;  // population (denominator = sample count)
    double min = 0.0;
    double max = 0.0;
};

struct DatasetStats {
    std::size_t num_features = 0;
    std::size_t num_samples = 0;
    std::vector<VariableStats> per_variable;
};

DatasetStats dataset_stats(const SeriesMatrix& series);

// JSON document mirroring the TrigSpec fields:
// {"num_points":N, "variables":[{"amplitude":a,"phase":p,"period":q},...],
//  "noise_std":s, "noisy_fraction":f, "rng_seed":seed}
TrigSpec parse_trig_spec(const std::string& json_text);
std::string trig_spec_json(const TrigSpec& spec);

}  // namespace timesql
