#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace timesql {

// Dense row-major matrix of doubles. Rows index variables throughout the
// library, so one variable's timeline (or one prediction row) is contiguous.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// A multivariate series: N variables observed over equally spaced timesteps.
struct SeriesMatrix {
    Matrix values;  // N x timesteps
    std::vector<std::string> variable_names;
    std::optional<std::string> interval_note;

    std::size_t num_variables() const { return values.rows; }
    std::size_t num_steps() const { return values.cols; }

    // Throws std::invalid_argument if the matrix is empty, the names do not
    // line up with the rows, or any value is non-finite.
    void validate() const;
};

// Fills variable_names with v0, v1, ... when none are given.
SeriesMatrix make_series(Matrix values, std::vector<std::string> names = {},
                         std::optional<std::string> interval_note = std::nullopt);

// One supervised example: `input` holds L historical steps, `target` the T
// steps that immediately follow it in the source series.
struct SeriesWindow {
    SeriesMatrix input;   // N x L
    SeriesMatrix target;  // N x T
    std::size_t origin_index = 0;
};

// Contiguous-in-time dataset split, ordered train -> val -> test.
struct SplitSpec {
    double train_fraction = 0.8;
    double val_fraction = 0.0;
    double test_fraction = 0.2;

    // Throws if any fraction is out of range or they do not sum to 1 within
    // 1e-9.
    void validate() const;
};

// Slides a (lookback + horizon)-wide window over the series.  Window i starts
// at column i * stride; trailing steps that do not fit a full window are
// dropped.  Throws when the series is shorter than lookback + horizon.
std::vector<SeriesWindow> make_windows(const SeriesMatrix& series,
                                       std::size_t lookback, std::size_t horizon,
                                       std::size_t stride = 1);

struct SeriesSplits {
    SeriesMatrix train;
    SeriesMatrix val;
    SeriesMatrix test;
};

// Boundary indices are floor(length * cumulative fraction); concatenating the
// three parts reproduces the input bitwise.  Throws "degenerate split" when a
// part with positive fraction would receive zero columns.
SeriesSplits split_series(const SeriesMatrix& series, const SplitSpec& spec);

}  // namespace timesql
