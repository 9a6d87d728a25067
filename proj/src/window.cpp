#include "stcorr/window.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stcorr {

namespace {
int g_num_threads = 0;
}  // namespace

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::window_out_of_range: return "window-out-of-range";
        case ErrorCode::aspect_ratio: return "aspect-ratio";
        case ErrorCode::degenerate_row: return "degenerate-row";
        case ErrorCode::degenerate_coefficients: return "degenerate-coefficients";
        case ErrorCode::branch_point: return "branch-point";
        case ErrorCode::bin_mismatch: return "bin-mismatch";
        case ErrorCode::rank_deficient: return "rank-deficient";
        case ErrorCode::empty_grid: return "empty-grid";
        case ErrorCode::domain_error: return "domain-error";
        case ErrorCode::shape_mismatch: return "shape-mismatch";
        case ErrorCode::invalid_spec: return "invalid-spec";
        case ErrorCode::parse_error: return "parse-error";
        case ErrorCode::io_error: return "io-error";
        case ErrorCode::config_error: return "config-error";
    }
    return "unknown";
}

void set_num_threads(int n) {
    g_num_threads = std::max(0, n);
    if (g_num_threads > 0) omp_set_num_threads(g_num_threads);
    else omp_set_num_threads(omp_get_num_procs());
}

int num_threads() {
    return g_num_threads > 0 ? g_num_threads : omp_get_max_threads();
}

TimeSeriesSet::TimeSeriesSet(std::vector<std::string> channels, std::vector<std::int64_t> timestamps,
                             Matrix values)
    : timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (static_cast<Index>(channels.size()) != values_.rows()) {
        throw Error(ErrorCode::invalid_spec, "channel count does not match value rows");
    }
    if (static_cast<Index>(timestamps_.size()) != values_.cols()) {
        throw Error(ErrorCode::invalid_spec, "timestamp count does not match value columns");
    }
    for (std::size_t k = 1; k < timestamps_.size(); ++k) {
        if (timestamps_[k] <= timestamps_[k - 1]) {
            throw Error(ErrorCode::invalid_spec, "timestamps must be strictly increasing");
        }
    }
    if (!values_.allFinite()) {
        throw Error(ErrorCode::invalid_spec, "missing or non-finite values are not accepted");
    }
    channel_ids_ = std::make_shared<const std::vector<std::string>>(std::move(channels));
}

DataWindow form_window(const TimeSeriesSet& data, Index end_index, Index width) {
    if (width < 2) throw Error(ErrorCode::invalid_spec, "window width must be at least 2");
    if (data.channels() < 2) throw Error(ErrorCode::invalid_spec, "need at least 2 channels");
    if (end_index < width - 1 || end_index >= data.length()) {
        std::ostringstream msg;
        msg << "window ending at " << end_index << " with width " << width
            << " does not fit in " << data.length() << " samples";
        throw Error(ErrorCode::window_out_of_range, msg.str());
    }
    if (data.channels() > width) {
        throw Error(ErrorCode::aspect_ratio, "aspect ratio N/T > 1 is not supported");
    }
    DataWindow w;
    w.matrix = data.values().middleCols(end_index - width + 1, width);
    w.end_index = end_index;
    w.end_time = data.timestamps()[static_cast<std::size_t>(end_index)];
    w.origin = data.shared_channel_ids();
    return w;
}

StandardizedWindow standardize_rows(const Matrix& m) {
    StandardizedWindow out;
    const Index n = m.rows();
    const double t = static_cast<double>(m.cols());
    out.matrix.resize(n, m.cols());
    out.row_means.resize(n);
    out.row_stds.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double mean = m.row(i).mean();
        const double var = (m.row(i).array() - mean).square().sum() / t;
        const double sd = std::sqrt(var);
        // A row that is constant up to rounding noise carries no information.
        const double scale = std::max(1.0, m.row(i).cwiseAbs().maxCoeff());
        if (!(sd > 1e-12 * scale)) {
            std::ostringstream msg;
            msg << "row " << i << " has zero variance";
            throw Error(ErrorCode::degenerate_row, msg.str());
        }
        out.row_means(i) = mean;
        out.row_stds(i) = sd;
        out.matrix.row(i) = (m.row(i).array() - mean) / sd;
    }
    return out;
}

StandardizedWindow standardize_rows(const DataWindow& w) { return standardize_rows(w.matrix); }

Matrix covariance(const Matrix& w) {
    Matrix sigma(w.rows(), w.rows());
    sigma.setZero();
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(w, 1.0 / static_cast<double>(w.cols()));
    return sigma.selfadjointView<Eigen::Lower>();
}

Matrix covariance(const StandardizedWindow& w) { return covariance(w.matrix); }

Eigenpairs eigen_descending(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::shape_mismatch, "matrix is not square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::domain_error, "symmetric eigensolver did not converge");
    }
    const Vector& vals = solver.eigenvalues();
    const Index n = vals.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return vals(a) > vals(b); });

    Eigenpairs out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index k = 0; k < n; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = vals(src);
        Vector v = solver.eigenvectors().col(src);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        out.vectors.col(k) = v;
    }
    return out;
}

Vector esd_eigenvalues(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::shape_mismatch, "matrix is not square");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::domain_error, "symmetric eigensolver did not converge");
    }
    Vector v = solver.eigenvalues();
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

}  // namespace stcorr
