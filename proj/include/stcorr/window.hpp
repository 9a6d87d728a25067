#pragma once

#include "stcorr/common.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stcorr {

/// Multichannel measurements: one row per channel, one column per sample.
/// Timestamps are seconds since the Unix epoch (UTC).
class TimeSeriesSet {
public:
    TimeSeriesSet() = default;

    /// Throws Error(invalid_spec) when shapes disagree, a value is not finite,
    /// or timestamps are not strictly increasing.
    TimeSeriesSet(std::vector<std::string> channels, std::vector<std::int64_t> timestamps,
                  Matrix values);

    Index channels() const { return values_.rows(); }
    Index length() const { return values_.cols(); }

    const std::vector<std::string>& channel_ids() const { return *channel_ids_; }
    std::shared_ptr<const std::vector<std::string>> shared_channel_ids() const { return channel_ids_; }
    const std::vector<std::int64_t>& timestamps() const { return timestamps_; }
    const Matrix& values() const { return values_; }

private:
    std::shared_ptr<const std::vector<std::string>> channel_ids_ =
        std::make_shared<std::vector<std::string>>();
    std::vector<std::int64_t> timestamps_;
    Matrix values_;
};

/// N x T slice of a TimeSeriesSet whose last column is the "current" sample.
struct DataWindow {
    Matrix matrix;
    Index end_index = 0;
    std::int64_t end_time = 0;
    std::shared_ptr<const std::vector<std::string>> origin;

    Index channels() const { return matrix.rows(); }
    Index width() const { return matrix.cols(); }
    double aspect_ratio() const {
        return static_cast<double>(matrix.rows()) / static_cast<double>(matrix.cols());
    }
};

/// Row-standardized window (zero mean, unit population standard deviation).
struct StandardizedWindow {
    Matrix matrix;
    Vector row_means;
    Vector row_stds;

    double aspect_ratio() const {
        return static_cast<double>(matrix.rows()) / static_cast<double>(matrix.cols());
    }
};

/// Descending eigenvalues with matching unit eigenvectors (columns).
struct Eigenpairs {
    Vector values;
    Matrix vectors;
};

/// Columns end_index-width+1 .. end_index of `data`.
/// Errors: window_out_of_range, aspect_ratio (N/T > 1), invalid_spec (width < 2).
DataWindow form_window(const TimeSeriesSet& data, Index end_index, Index width);

/// Per-row (r - mean) / std with the population (1/T) standard deviation.
/// Errors: degenerate_row if any row is constant.
StandardizedWindow standardize_rows(const Matrix& m);
StandardizedWindow standardize_rows(const DataWindow& w);

/// Sigma = (1/T) W W^T.
Matrix covariance(const Matrix& w);
Matrix covariance(const StandardizedWindow& w);

/// Real eigenvalues of a symmetric matrix, sorted descending.
Vector esd_eigenvalues(const Matrix& sigma);

/// Symmetric eigendecomposition sorted descending; ties keep the solver's
/// original index order. Eigenvector signs are fixed so that the entry of
/// largest magnitude is positive, which makes the output reproducible.
Eigenpairs eigen_descending(const Matrix& sigma);

}  // namespace stcorr
