#include "timesql/types.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace timesql {

void SeriesMatrix::validate() const {
    if (values.rows == 0 || values.cols == 0) {
        throw std::invalid_argument("SeriesMatrix: series must have at least one variable and one timestep");
    }
    if (values.data.size() != values.rows * values.cols) {
        throw std::invalid_argument("SeriesMatrix: storage size does not match rows*cols");
    }
    if (!variable_names.empty() && variable_names.size() != values.rows) {
        std::ostringstream msg;
        msg << "SeriesMatrix: " << variable_names.size() << " variable names for "
            << values.rows << " variables";
        throw std::invalid_argument(msg.str());
    }
    for (std::size_t n = 0; n < values.rows; ++n) {
        for (std::size_t t = 0; t < values.cols; ++t) {
            if (!std::isfinite(values.at(n, t))) {
                std::ostringstream msg;
                msg << "SeriesMatrix: non-finite value at variable " << n << ", step " << t;
                throw std::invalid_argument(msg.str());
            }
        }
    }
}

SeriesMatrix make_series(Matrix values, std::vector<std::string> names,
                         std::optional<std::string> interval_note) {
    SeriesMatrix series;
    if (names.empty()) {
        names.reserve(values.rows);
        for (std::size_t n = 0; n < values.rows; ++n) {
            names.push_back("v" + std::to_string(n));
        }
    }
    series.values = std::move(values);
    series.variable_names = std::move(names);
    series.interval_note = std::move(interval_note);
    series.validate();
    return series;
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("SplitSpec: train_fraction must lie in (0,1)");
    }
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
        throw std::invalid_argument("SplitSpec: val_fraction must lie in [0,1)");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("SplitSpec: test_fraction must lie in (0,1)");
    }
    const double sum = train_fraction + val_fraction + test_fraction;
    if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "SplitSpec: fractions sum to " << sum << ", expected 1";
        throw std::invalid_argument(msg.str());
    }
}

namespace {

SeriesMatrix slice_columns(const SeriesMatrix& series, std::size_t begin, std::size_t end) {
    const std::size_t n_vars = series.num_variables();
    Matrix out(n_vars, end - begin);
    for (std::size_t n = 0; n < n_vars; ++n) {
        for (std::size_t t = begin; t < end; ++t) {
            out.at(n, t - begin) = series.values.at(n, t);
        }
    }
    SeriesMatrix result;
    result.values = std::move(out);
    result.variable_names = series.variable_names;
    result.interval_note = series.interval_note;
    return result;
}

}  // namespace

std::vector<SeriesWindow> make_windows(const SeriesMatrix& series,
                                       std::size_t lookback, std::size_t horizon,
                                       std::size_t stride) {
    if (lookback == 0 || horizon == 0 || stride == 0) {
        throw std::invalid_argument("make_windows: lookback, horizon and stride must be positive");
    }
    const std::size_t len = series.num_steps();
    const std::size_t need = lookback + horizon;
    if (len < need) {
        std::ostringstream msg;
        msg << "make_windows: insufficient length: need at least " << need
            << " steps (lookback " << lookback << " + horizon " << horizon
            << "), got " << len;
        throw std::invalid_argument(msg.str());
    }
    const std::size_t count = (len - need) / stride + 1;
    std::vector<SeriesWindow> windows;
    windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t origin = i * stride;
        SeriesWindow w;
        w.input = slice_columns(series, origin, origin + lookback);
        w.target = slice_columns(series, origin + lookback, origin + need);
        w.origin_index = origin;
        windows.push_back(std::move(w));
    }
    return windows;
}

SeriesSplits split_series(const SeriesMatrix& series, const SplitSpec& spec) {
    spec.validate();
    const std::size_t len = series.num_steps();
    if (len < 3) {
        std::ostringstream msg;
        msg << "split_series: series of length " << len << " is too short to split";
        throw std::invalid_argument(msg.str());
    }
    const auto b1 = static_cast<std::size_t>(
        std::floor(static_cast<double>(len) * spec.train_fraction));
    const auto b2 = static_cast<std::size_t>(
        std::floor(static_cast<double>(len) * (spec.train_fraction + spec.val_fraction)));

    const auto check = [&](const char* part, double fraction, std::size_t cols) {
        if (fraction > 0.0 && cols == 0) {
            std::ostringstream msg;
            msg << "split_series: degenerate split: " << part << " fraction "
                << fraction << " receives zero columns for length " << len;
            throw std::invalid_argument(msg.str());
        }
    };
    check("train", spec.train_fraction, b1);
    check("val", spec.val_fraction, b2 - b1);
    check("test", spec.test_fraction, len - b2);

    SeriesSplits splits;
    splits.train = slice_columns(series, 0, b1);
    splits.val = slice_columns(series, b1, b2);
    splits.test = slice_columns(series, b2, len);
    return splits;
}

}  // namespace timesql
