#pragma once

// Randomized property checks shared by the gtest suite and the acceptance binary.
// Each returns the number of cases run and a description of the first failure.

#include "stcorr/detectors.hpp"
#include "stcorr/factor_model.hpp"
#include "stcorr/spectra.hpp"
#include "stcorr/synth.hpp"
#include "stcorr/window.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace stcorr::props {

struct Outcome {
    int cases = 0;
    int failures = 0;
    std::string first;

    bool ok() const { return failures == 0 && cases > 0; }
    void fail(int k, const std::string& what) {
        if (failures++ == 0) first = "case " + std::to_string(k) + ": " + what;
    }
};

inline Matrix random_matrix(std::mt19937_64& rng, Index n, Index t) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::lognormal_distribution<double> scale(0.0, 2.0);
    Matrix m(n, t);
    for (Index i = 0; i < n; ++i) {
        const double s = scale(rng);
        const double shift = u(rng) * s;
        for (Index k = 0; k < t; ++k) m(i, k) = shift + s * g(rng);
    }
    return m;
}

inline Index uniform_index(std::mt19937_64& rng, Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// standardize(standardize(X)) == standardize(X), rows have mean 0 and population std 1.
inline Outcome standardization_idempotence(int cases, std::uint64_t seed) {
    Outcome o;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < cases; ++k, ++o.cases) {
        const Index n = uniform_index(rng, 2, 40);
        const Index t = uniform_index(rng, n, 200);
        const auto once = standardize_rows(random_matrix(rng, n, t));
        const auto twice = standardize_rows(once.matrix);
        const double diff = (twice.matrix - once.matrix).cwiseAbs().maxCoeff();
        const double mean = once.matrix.rowwise().mean().cwiseAbs().maxCoeff();
        const Vector var = once.matrix.array().square().rowwise().mean();
        const double vdev = (var.array() - 1.0).abs().maxCoeff();
        if (!(diff < 1e-10 && mean < 1e-12 && vdev < 1e-12)) {
            o.fail(k, "diff " + num(diff) + " mean " + num(mean) + " var " + num(vdev));
        }
    }
    return o;
}

// Sigma is symmetric PSD and trace(Sigma) = sum of eigenvalues = N for standardized rows.
inline Outcome covariance_psd_trace(int cases, std::uint64_t seed) {
    Outcome o;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < cases; ++k, ++o.cases) {
        const Index n = uniform_index(rng, 2, 40);
        const Index t = uniform_index(rng, 2, 200);
        const Matrix x = random_matrix(rng, n, t);
        const bool standardized = k % 2 == 0 && t >= n;
        const Matrix sigma = standardized ? covariance(standardize_rows(x)) : covariance(x);
        const Vector ev = esd_eigenvalues(sigma);
        const double scale = std::max(1.0, sigma.diagonal().maxCoeff());
        const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
        const double trace_gap = std::abs(sigma.trace() - ev.sum());
        bool ok = asym == 0.0 && ev.minCoeff() >= -1e-10 * scale && trace_gap <= 1e-9 * scale * static_cast<double>(n);
        for (Index i = 1; i < ev.size(); ++i) ok = ok && ev(i) <= ev(i - 1);
        if (standardized) ok = ok && std::abs(sigma.trace() - static_cast<double>(n)) < 1e-9;
        if (!ok) o.fail(k, "min eig " + num(ev.minCoeff()) + " trace gap " + num(trace_gap));
    }
    return o;
}

inline SpectralDensity random_density(std::mt19937_64& rng, const std::vector<double>& edges) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SpectralDensity d{edges, std::vector<double>(edges.size() - 1)};
    double sum = 0.0;
    for (double& m : d.mass) {
        m = u(rng) < 0.3 ? 0.0 : u(rng);
        sum += m;
    }
    if (sum == 0.0) {
        d.mass[0] = 1.0;
        sum = 1.0;
    }
    for (double& m : d.mass) m /= sum;
    return d;
}

// JS(p,q) = JS(q,p), 0 <= JS <= ln 2, JS(p,p) = 0.
inline Outcome js_symmetry_bounds(int cases, std::uint64_t seed) {
    Outcome o;
    std::mt19937_64 rng(seed);
    const double ln2 = std::log(2.0);
    for (int k = 0; k < cases; ++k, ++o.cases) {
        const auto bins = static_cast<std::size_t>(uniform_index(rng, 1, 120));
        const auto edges = uniform_edges(0.0, 4.0, bins);
        const auto p = random_density(rng, edges);
        const auto q = random_density(rng, edges);
        const double pq = js_divergence(p, q);
        const double qp = js_divergence(q, p);
        const double pp = js_divergence(p, p);
        if (!(std::abs(pq - qp) <= 1e-15 && pq >= 0.0 && pq <= ln2 + 1e-15 && std::abs(pp) <= 1e-15)) {
            o.fail(k, "pq " + num(pq) + " qp " + num(qp) + " pp " + num(pp));
        }
    }
    return o;
}

// eta >= 0 on fitted windows; scaling the eigenvalues by a > 0 scales eta and keeps the argmax.
// Rescaling the raw data leaves eta unchanged through standardization.
inline Outcome eta_nonneg_scale_invariance(int cases, std::uint64_t seed) {
    Outcome o;
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> alpha(0.0, 3.0);
    for (int k = 0; k < cases; ++k, ++o.cases) {
        const Index n = uniform_index(rng, 3, 30);
        const Index t = uniform_index(rng, n + 1, 150);
        const int p = static_cast<int>(uniform_index(rng, 1, std::min<Index>(5, n - 1)));
        const Matrix x = random_matrix(rng, n, t);
        const auto d = extract_factors(standardize_rows(x), p);
        const Vector eta = location_indicator(d.retained_eigenvalues, d.retained_eigenvectors);
        const double a = alpha(rng);
        const Vector scaled = location_indicator(a * d.retained_eigenvalues, d.retained_eigenvectors);
        Index i0, i1;
        eta.maxCoeff(&i0);
        scaled.maxCoeff(&i1);
        const double rel = (scaled - a * eta).cwiseAbs().maxCoeff() / (a * eta.maxCoeff());
        const auto d2 = extract_factors(standardize_rows(a * x), p);
        const Vector eta2 = location_indicator(d2.retained_eigenvalues, d2.retained_eigenvectors);
        Index i2;
        eta2.maxCoeff(&i2);
        const double rel2 = (eta2 - eta).cwiseAbs().maxCoeff() / eta.maxCoeff();
        if (!(eta.minCoeff() >= 0.0 && i0 == i1 && rel < 1e-13 && i2 == i0 && rel2 < 1e-8)) {
            o.fail(k, "min eta " + num(eta.minCoeff()) + " argmax " + std::to_string(i0) + "/" +
                          std::to_string(i1) + "/" + std::to_string(i2) + " rel " + num(rel) + " " + num(rel2));
        }
    }
    return o;
}

// Squared entries of every unit eigenvector sum to 1.
inline Outcome contribution_identity(int cases, std::uint64_t seed) {
    Outcome o;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < cases; ++k, ++o.cases) {
        const Index n = uniform_index(rng, 2, 40);
        const Index t = uniform_index(rng, 2, 120);
        const auto eig = eigen_descending(covariance(random_matrix(rng, n, t)));
        double worst = 0.0;
        for (Index j = 0; j < n; ++j) {
            const Vector share = contribution_identity_check(eig.vectors.col(j));
            worst = std::max(worst, std::abs(share.sum() - 1.0));
            if (share.minCoeff() < 0.0) worst = 1.0;
        }
        if (!(worst < 1e-10)) o.fail(k, "deviation " + num(worst));
    }
    return o;
}

// Same seed, same bits; a different seed changes the draw.
inline Outcome determinism_under_seed(int cases, std::uint64_t seed) {
    Outcome o;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ub(-0.9, 0.9);
    for (int k = 0; k < cases; ++k, ++o.cases) {
        const std::uint64_t s = rng();
        const Index n = uniform_index(rng, 2, 20);
        const Index t = uniform_index(rng, n, 80);
        const double b = ub(rng);
        const Matrix a1 = sample_ar1_residuals(n, t, b, s);
        const Matrix a2 = sample_ar1_residuals(n, t, b, s);
        const Matrix a3 = sample_ar1_residuals(n, t, b, s + 1);
        ScenarioSpec spec = null_preset(s);
        spec.channels = n;
        spec.samples = t;
        spec.noise.b = b;
        if (k % 2 == 0) {
            AnomalySpec an;
            an.kind = k % 4 == 0 ? AnomalyKind::step : AnomalyKind::ramp;
            an.channels = {uniform_index(rng, 0, n - 1)};
            an.onset = uniform_index(rng, 0, t - 1);
            an.magnitude = ub(rng);
            spec.anomalies.push_back(an);
        }
        const Matrix g1 = generate(spec).values();
        const Matrix g2 = generate(spec).values();
        const int p = static_cast<int>(uniform_index(rng, 0, std::min<Index>(3, n - 1)));
        const Matrix f1 = plant_factors(n, t, p, 2.0, b, s).values();
        const Matrix f2 = plant_factors(n, t, p, 2.0, b, s).values();
        const bool same = (a1.array() == a2.array()).all() && (g1.array() == g2.array()).all() &&
                          (f1.array() == f2.array()).all();
        const bool differs = !(a1.array() == a3.array()).all();
        if (!(same && differs)) o.fail(k, same ? "different seeds gave identical draws" : "repeat draw differs");
    }
    return o;
}

}  // namespace stcorr::props
