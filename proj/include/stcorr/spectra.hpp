#pragma once

#include "stcorr/common.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace stcorr {

using Complex = std::complex<double>;

/// Binned eigenvalue density: K+1 ascending edges and K nonnegative masses summing to 1.
struct SpectralDensity {
    std::vector<double> edges;
    std::vector<double> mass;

    std::size_t bins() const { return mass.size(); }
    std::vector<double> centers() const;
    /// Throws invalid_spec if edges are not strictly ascending, sizes disagree,
    /// or masses are negative / do not sum to 1 within `tol`.
    void validate(double tol = 1e-9) const;
};

/// K equal-width bins on [lo, hi].
std::vector<double> uniform_edges(double lo, double hi, std::size_t k);

struct MpParams {
    double c = 0.5;
    double sigma2 = 1.0;

    double lower() const;
    double upper() const;
    void validate() const;
};

/// Marchenko-Pastur density; zero outside [lower, upper].
double mp_density(const MpParams& p, double x);

/// AR(1)-correlated residual model: rate b in [0,1), aspect ratio c in (0,1].
struct Ar1ModelParams {
    double b = 0.0;
    double c = 0.5;
    double epsilon = 1e-3;
    std::vector<double> lambda_grid;

    double a() const;
    /// Upper end of the default evaluation range, (1+sqrt c)^2 (1+b)/(1-b) * 1.2.
    double grid_upper() const;
    /// Fills lambda_grid with `points` equally spaced values on [0, grid_upper()].
    Ar1ModelParams& with_default_grid(std::size_t points = 2000);
    void validate() const;
};

/// Coefficients (leading first) of the quartic in M at complex z.
std::array<Complex, 5> quartic_coefficients(Complex z, double b, double c);

/// All four roots of the quartic at z via companion-matrix eigenvalues.
/// Errors: domain_error for z == 0, degenerate_coefficients when the leading
/// coefficient underflows.
std::array<Complex, 4> quartic_mgf_roots(Complex z, const Ar1ModelParams& params);

/// Root on the physical branch at z in the upper half-plane, reached by
/// continuation from far above along Re z. Errors: domain_error for Im z <= 0.
Complex physical_mgf(Complex z, const Ar1ModelParams& params);

/// Physical moment-generating-function value at lambda > 0: the branch that
/// behaves like 1/z + m2/z^2 for large |z|, continued down to lambda + i*eps
/// and then polished to the eps -> 0+ limit where that limit is a simple root.
struct PhysicalRoot {
    Complex m;
    Complex z;  ///< point at which m was evaluated (real lambda after polishing)
    double density = 0.0;
};
PhysicalRoot physical_root(double lambda, const Ar1ModelParams& params);

/// Pointwise limiting density on params.lambda_grid with its normalized CDF.
struct DensityCurve {
    std::vector<double> lambda;
    std::vector<double> density;
    std::vector<double> cdf;
    double support_lo = 0.0;
    double support_hi = 0.0;

    /// Linear interpolation of the CDF; 0 left of the grid, 1 right of it.
    double cdf_at(double x) const;
};
DensityCurve frv_ar1_curve(const Ar1ModelParams& params, Exec exec = Exec::parallel);

/// Model density integrated onto bins. Leftover mass (rounding) goes to the last bin.
SpectralDensity bin_curve(const DensityCurve& curve, const std::vector<double>& edges);
/// Binned model density; with K bins over [0, max(grid end, support)] when no edges are given.
SpectralDensity frv_ar1_density(const Ar1ModelParams& params, std::size_t bins = 100,
                                Exec exec = Exec::parallel);
SpectralDensity frv_ar1_density(const Ar1ModelParams& params, const std::vector<double>& edges,
                                Exec exec = Exec::parallel);

/// M_{B_T}(z) for the AR(1) autocovariance. Errors: branch_point, domain_error (|b| >= 1).
Complex bt_moment_generating(Complex z, double b);

/// N independent stationary AR(1) rows of length T with unit marginal variance.
Matrix sample_ar1_residuals(Index n, Index t, double b, std::uint64_t seed);

/// Symmetrized KL divergence against the midpoint, natural log, in [0, ln 2].
/// Errors: bin_mismatch.
double js_divergence(const SpectralDensity& p, const SpectralDensity& q);

/// Histogram normalized to unit mass; out-of-range values clamp into the end bins.
SpectralDensity bin_eigenvalues(std::span<const double> eigs, const std::vector<double>& edges);
SpectralDensity bin_eigenvalues(const Vector& eigs, const std::vector<double>& edges);

/// Standard normal CDF from a precomputed table (abs error < 1e-7).
double normal_cdf_fast(double x);

/// Gaussian-kernel density of the eigenvalues integrated onto bins. The CDF is
/// pinned to 0 at the first edge and 1 at the last, so no mass is lost.
SpectralDensity smooth_eigenvalues(std::span<const double> eigs, const std::vector<double>& edges,
                                   double bandwidth);

/// Normalized 24-point Gauss-Hermite rule for E[f(X)], X ~ N(0,1): nodes and weights.
const std::array<std::pair<double, double>, 24>& gauss_hermite_24();

/// Model CDF convolved with a N(0, h^2) kernel, tabulated for fast lookup.
class SmoothedCdf {
public:
    SmoothedCdf() = default;
    SmoothedCdf(const DensityCurve& curve, double bandwidth, std::size_t points = 2048);

    double bandwidth() const { return h_; }
    double support_hi() const { return support_hi_; }
    double operator()(double x) const;

private:
    double h_ = 0.0;
    double support_hi_ = 0.0;
    double x0_ = 0.0;
    double dx_ = 1.0;
    std::vector<double> table_;
};

/// Kernel-smoothed model density on bins, with the same end pinning as
/// smooth_eigenvalues.
SpectralDensity smooth_bin_curve(const SmoothedCdf& cdf, const std::vector<double>& edges);

/// Two-column CSV: bin_center,mass.
void write_density_csv(std::ostream& os, const SpectralDensity& d);
SpectralDensity read_density_csv(std::istream& is);

}  // namespace stcorr
