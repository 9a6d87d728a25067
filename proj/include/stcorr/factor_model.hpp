#pragma once

#include "stcorr/common.hpp"
#include "stcorr/spectra.hpp"
#include "stcorr/window.hpp"

#include <vector>

namespace stcorr {

/// W = L F + U with F the top-p principal-component series.
struct FactorDecomposition {
    int p = 0;
    Matrix factors;    ///< p x T
    Matrix loadings;   ///< N x p
    Matrix residuals;  ///< N x T
    Vector retained_eigenvalues;
    Matrix retained_eigenvectors;  ///< N x p, unit columns
};

/// Errors: invalid_spec (p < 0 or p >= N), rank_deficient.
FactorDecomposition extract_factors(const StandardizedWindow& w, int p);
/// Same, reusing an eigendecomposition of covariance(w).
FactorDecomposition extract_factors(const StandardizedWindow& w, const Eigenpairs& eig, int p);

/// Descending eigenvalues of the covariance of the row-standardized residuals.
/// The p structural zeros are kept (clamped at 0). Errors: degenerate_row.
Vector residual_eigenvalues(const FactorDecomposition& d);

/// Histogram ESD of the standardized residuals on the given edges.
SpectralDensity residual_esd(const FactorDecomposition& d, const std::vector<double>& edges);

enum class Binning { histogram, kernel };

/// How empirical and model spectra are put onto common bins before comparison.
///  histogram: plain counts on [0, max(top eigenvalue, model support)].
///  kernel: both sides convolved with N(0, h_b^2) where
///          h_b = kappa * sqrt(c (1+b^2)/(1-b^2)) * N^(-1/5), on [0, max(...) + 4 h_b].
struct DensityConfig {
    Binning binning = Binning::kernel;
    std::size_t bins = 100;
    double kappa = 1.0;
    double epsilon = 1e-3;
    std::size_t grid_points = 2000;
};

double model_bandwidth(double b, double c, Index n, double kappa);

struct FitGrid {
    std::vector<int> p_values;
    std::vector<double> b_values;

    /// p in 1..5, b in 0.00..0.99 step 0.01.
    static FitGrid defaults();
    static FitGrid make(int p_min, int p_max, double b_min, double b_max, double b_step);
    void validate(Index n) const;
};

/// Model densities for one (c, N) across a b grid; read-only after construction.
class ModelDensityCache {
public:
    struct Entry {
        double b = 0.0;
        DensityCurve curve;
        SmoothedCdf smoothed;  ///< only populated for Binning::kernel
    };

    ModelDensityCache(Index n, Index t, std::vector<double> b_values, DensityConfig cfg = {},
                      Exec exec = Exec::parallel);

    Index n() const { return n_; }
    Index t() const { return t_; }
    double c() const { return static_cast<double>(n_) / static_cast<double>(t_); }
    const DensityConfig& config() const { return cfg_; }
    const std::vector<double>& b_values() const { return b_values_; }
    const Entry& entry(std::size_t k) const { return entries_[k]; }
    /// Entry for an exact b in the grid; throws invalid_spec if absent.
    const Entry& find(double b) const;

private:
    Index n_;
    Index t_;
    DensityConfig cfg_;
    std::vector<double> b_values_;
    std::vector<Entry> entries_;
};

/// Empirical and model densities on the shared bins used for one (p, b) cell.
struct CellDensities {
    SpectralDensity empirical;
    SpectralDensity model;
};
CellDensities cell_densities(const Vector& residual_eigs, const ModelDensityCache::Entry& model,
                             const ModelDensityCache& cache);

struct EstimationResult {
    int p_hat = 0;
    double b_hat = 0.0;
    double min_distance = 0.0;
    std::vector<int> p_values;
    std::vector<double> b_values;
    Matrix distance_surface;  ///< rows follow p_values, columns b_values
    FactorDecomposition decomposition;
    Vector residual_eigenvalues;  ///< at p_hat
};

/// Grid search for the (p, b) minimizing the JS distance between residual and
/// model spectra. Ties resolve to the smallest p, then the smallest b.
/// When `cache` is null a cache for this window's shape is built internally.
/// Errors: empty_grid, invalid_spec, and propagated inner errors.
EstimationResult fit_spatio_temporal(const StandardizedWindow& w, const FitGrid& grid,
                                     const DensityConfig& cfg = {},
                                     const ModelDensityCache* cache = nullptr,
                                     Exec exec = Exec::parallel);

}  // namespace stcorr
