#include "stcorr/factor_model.hpp"

#include "parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace stcorr {

FactorDecomposition extract_factors(const StandardizedWindow& w, int p) {
    return extract_factors(w, eigen_descending(covariance(w)), p);
}

FactorDecomposition extract_factors(const StandardizedWindow& w, const Eigenpairs& eig, int p) {
    const Index n = w.matrix.rows();
    const Index t = w.matrix.cols();
    if (p < 0 || p >= n) {
        std::ostringstream msg;
        msg << "factor count " << p << " outside [0, " << n - 1 << "]";
        throw Error(ErrorCode::invalid_spec, msg.str());
    }
    if (eig.values.size() != n) throw Error(ErrorCode::shape_mismatch, "eigendecomposition does not match window");

    FactorDecomposition d;
    d.p = p;
    if (p == 0) {
        d.factors.resize(0, t);
        d.loadings.resize(n, 0);
        d.residuals = w.matrix;
        d.retained_eigenvalues.resize(0);
        d.retained_eigenvectors.resize(n, 0);
        return d;
    }
    const double floor = 1e-12 * std::max(1.0, eig.values(0));
    if (!(eig.values(p - 1) > floor)) {
        throw Error(ErrorCode::rank_deficient, "fewer strictly positive eigenvalues than requested factors");
    }
    d.retained_eigenvalues = eig.values.head(p);
    d.retained_eigenvectors = eig.vectors.leftCols(p);
    d.factors = d.retained_eigenvectors.transpose() * w.matrix;

    Eigen::JacobiSVD<Matrix> svd(d.factors, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cut = 1e-10 * s(0);
    Vector inv = Vector::Zero(s.size());
    for (Index k = 0; k < s.size(); ++k) {
        if (s(k) > cut) inv(k) = 1.0 / s(k);
    }
    const Matrix pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    d.loadings = w.matrix * pinv;
    d.residuals = w.matrix - d.loadings * d.factors;
    return d;
}

Vector residual_eigenvalues(const FactorDecomposition& d) {
    Vector ev = esd_eigenvalues(covariance(standardize_rows(d.residuals)));
    return ev.cwiseMax(0.0);
}

SpectralDensity residual_esd(const FactorDecomposition& d, const std::vector<double>& edges) {
    return bin_eigenvalues(residual_eigenvalues(d), edges);
}

double model_bandwidth(double b, double c, Index n, double kappa) {
    return kappa * std::sqrt(c * (1.0 + b * b) / (1.0 - b * b)) * std::pow(static_cast<double>(n), -0.2);
}

FitGrid FitGrid::defaults() { return make(1, 5, 0.0, 0.99, 0.01); }

FitGrid FitGrid::make(int p_min, int p_max, double b_min, double b_max, double b_step) {
    if (p_min > p_max || !(b_step > 0.0) || b_min > b_max) {
        throw Error(ErrorCode::empty_grid, "empty search grid");
    }
    FitGrid g;
    for (int p = p_min; p <= p_max; ++p) g.p_values.push_back(p);
    const auto count = static_cast<long>(std::floor((b_max - b_min) / b_step + 1e-9));
    for (long k = 0; k <= count; ++k) {
        // Rounded to 1e-12 so grids like 0.01*k compare equal to their literals.
        const double b = std::round((b_min + b_step * static_cast<double>(k)) * 1e12) / 1e12;
        g.b_values.push_back(b);
    }
    return g;
}

void FitGrid::validate(Index n) const {
    if (p_values.empty() || b_values.empty()) throw Error(ErrorCode::empty_grid, "empty search grid");
    for (int p : p_values) {
        if (p < 0 || p >= n) throw Error(ErrorCode::invalid_spec, "factor count outside [0, N-1]");
    }
    for (double b : b_values) {
        if (!(b >= 0.0 && b < 1.0)) throw Error(ErrorCode::invalid_spec, "b grid must lie in [0,1)");
    }
}

ModelDensityCache::ModelDensityCache(Index n, Index t, std::vector<double> b_values, DensityConfig cfg,
                                     Exec exec)
    : n_(n), t_(t), cfg_(cfg), b_values_(std::move(b_values)) {
    if (n < 2 || t < 2) throw Error(ErrorCode::invalid_spec, "window too small");
    if (n > t) throw Error(ErrorCode::aspect_ratio, "aspect ratio N/T > 1 is not supported");
    if (b_values_.empty()) throw Error(ErrorCode::empty_grid, "empty b grid");
    if (cfg_.bins == 0) throw Error(ErrorCode::invalid_spec, "bin count must be positive");
    for (double b : b_values_) {
        if (!(b >= 0.0 && b < 1.0)) throw Error(ErrorCode::invalid_spec, "b grid must lie in [0,1)");
    }
    entries_.resize(b_values_.size());
    const double cc = c();
    // Parameter problems surface here rather than inside the parallel loop.
    quartic_mgf_roots(Complex(1.0, 1.0), Ar1ModelParams{b_values_.back(), cc, cfg_.epsilon, {}});

    detail::parallel_for(static_cast<std::ptrdiff_t>(b_values_.size()), exec, [&](std::ptrdiff_t k) {
        auto& e = entries_[static_cast<std::size_t>(k)];
        e.b = b_values_[static_cast<std::size_t>(k)];
        Ar1ModelParams params{e.b, cc, cfg_.epsilon, {}};
        params.with_default_grid(cfg_.grid_points);
        e.curve = frv_ar1_curve(params, Exec::serial);
        if (cfg_.binning == Binning::kernel) {
            e.smoothed = SmoothedCdf(e.curve, model_bandwidth(e.b, cc, n_, cfg_.kappa));
        }
    });
}

const ModelDensityCache::Entry& ModelDensityCache::find(double b) const {
    for (const auto& e : entries_) {
        if (e.b == b) return e;
    }
    throw Error(ErrorCode::invalid_spec, "b value not present in model cache");
}

CellDensities cell_densities(const Vector& residual_eigs, const ModelDensityCache::Entry& model,
                             const ModelDensityCache& cache) {
    const auto& cfg = cache.config();
    const double top = std::max(residual_eigs.maxCoeff(), model.curve.support_hi);
    const std::span<const double> ev(residual_eigs.data(), static_cast<std::size_t>(residual_eigs.size()));
    CellDensities out;
    if (cfg.binning == Binning::histogram) {
        const auto edges = uniform_edges(0.0, top, cfg.bins);
        out.empirical = bin_eigenvalues(ev, edges);
        out.model = bin_curve(model.curve, edges);
    } else {
        const double h = model.smoothed.bandwidth();
        const auto edges = uniform_edges(0.0, top + 4.0 * h, cfg.bins);
        out.empirical = smooth_eigenvalues(ev, edges, h);
        out.model = smooth_bin_curve(model.smoothed, edges);
    }
    return out;
}

EstimationResult fit_spatio_temporal(const StandardizedWindow& w, const FitGrid& grid,
                                     const DensityConfig& cfg, const ModelDensityCache* cache, Exec exec) {
    const Index n = w.matrix.rows();
    const Index t = w.matrix.cols();
    grid.validate(n);

    std::unique_ptr<ModelDensityCache> own;
    if (cache == nullptr) {
        own = std::make_unique<ModelDensityCache>(n, t, grid.b_values, cfg, exec);
        cache = own.get();
    } else if (cache->n() != n || cache->t() != t) {
        throw Error(ErrorCode::shape_mismatch, "model cache was built for a different window shape");
    }
    std::vector<const ModelDensityCache::Entry*> models;
    models.reserve(grid.b_values.size());
    for (double b : grid.b_values) models.push_back(&cache->find(b));

    const Eigenpairs eig = eigen_descending(covariance(w));
    const std::size_t np = grid.p_values.size();
    const std::size_t nb = grid.b_values.size();
    std::vector<FactorDecomposition> decomp(np);
    std::vector<Vector> resid(np);
    for (std::size_t i = 0; i < np; ++i) {
        decomp[i] = extract_factors(w, eig, grid.p_values[i]);
    }
    detail::parallel_for(static_cast<std::ptrdiff_t>(np), exec, [&](std::ptrdiff_t i) {
        resid[static_cast<std::size_t>(i)] = residual_eigenvalues(decomp[static_cast<std::size_t>(i)]);
    });

    EstimationResult r;
    r.p_values = grid.p_values;
    r.b_values = grid.b_values;
    r.distance_surface.resize(static_cast<Index>(np), static_cast<Index>(nb));
    detail::parallel_for(static_cast<std::ptrdiff_t>(np * nb), exec, [&](std::ptrdiff_t k) {
        const auto i = static_cast<std::size_t>(k) / nb;
        const auto j = static_cast<std::size_t>(k) % nb;
        const auto dens = cell_densities(resid[i], *models[j], *cache);
        r.distance_surface(static_cast<Index>(i), static_cast<Index>(j)) = js_divergence(dens.empirical, dens.model);
    }, 8);

    // Scan in (p ascending, b ascending) order so strict '<' keeps the first minimum.
    std::vector<std::size_t> pi(np), bj(nb);
    for (std::size_t i = 0; i < np; ++i) pi[i] = i;
    for (std::size_t j = 0; j < nb; ++j) bj[j] = j;
    std::stable_sort(pi.begin(), pi.end(), [&](auto a, auto b) { return grid.p_values[a] < grid.p_values[b]; });
    std::stable_sort(bj.begin(), bj.end(), [&](auto a, auto b) { return grid.b_values[a] < grid.b_values[b]; });
    std::size_t bi = pi[0], bb = bj[0];
    for (std::size_t i : pi) {
        for (std::size_t j : bj) {
            if (r.distance_surface(static_cast<Index>(i), static_cast<Index>(j)) <
                r.distance_surface(static_cast<Index>(bi), static_cast<Index>(bb))) {
                bi = i;
                bb = j;
            }
        }
    }
    r.p_hat = grid.p_values[bi];
    r.b_hat = grid.b_values[bb];
    r.min_distance = r.distance_surface(static_cast<Index>(bi), static_cast<Index>(bb));
    r.decomposition = std::move(decomp[bi]);
    r.residual_eigenvalues = std::move(resid[bi]);
    return r;
}

}  // namespace stcorr
