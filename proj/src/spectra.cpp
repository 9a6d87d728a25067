#include "stcorr/spectra.hpp"

#include "parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace stcorr {

namespace {

constexpr double kPi = std::numbers::pi;

Complex horner(const std::array<Complex, 5>& co, Complex m) {
    return (((co[0] * m + co[1]) * m + co[2]) * m + co[3]) * m + co[4];
}

Complex horner_deriv(const std::array<Complex, 5>& co, Complex m) {
    return ((4.0 * co[0] * m + 3.0 * co[1]) * m + 2.0 * co[2]) * m + co[3];
}

Complex newton(Complex m, const std::array<Complex, 5>& co, int iters = 30) {
    for (int k = 0; k < iters; ++k) {
        const Complex d = horner_deriv(co, m);
        if (d == Complex(0.0)) break;
        const Complex step = horner(co, m) / d;
        m -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(m))) break;
    }
    return m;
}

Complex nearest(const std::array<Complex, 4>& roots, Complex target) {
    Complex best = roots[0];
    for (const auto& r : roots) {
        if (std::abs(r - target) < std::abs(best - target)) best = r;
    }
    return best;
}

void check_edges(const std::vector<double>& edges) {
    if (edges.size() < 2) throw Error(ErrorCode::invalid_spec, "need at least one bin");
    for (std::size_t k = 1; k < edges.size(); ++k) {
        if (!(edges[k] > edges[k - 1])) {
            throw Error(ErrorCode::invalid_spec, "bin edges must be strictly ascending");
        }
    }
}

// Masses from a CDF sampled at the edges, pinned to 0 and 1 at the ends.
SpectralDensity from_edge_cdf(const std::vector<double>& edges, std::vector<double> f) {
    f.front() = 0.0;
    f.back() = 1.0;
    SpectralDensity out;
    out.edges = edges;
    out.mass.resize(edges.size() - 1);
    for (std::size_t k = 0; k + 1 < f.size(); ++k) out.mass[k] = std::max(0.0, f[k + 1] - f[k]);
    double total = 0.0;
    for (double m : out.mass) total += m;
    for (double& m : out.mass) m /= total;
    return out;
}

}  // namespace

std::vector<double> SpectralDensity::centers() const {
    std::vector<double> c(mass.size());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = 0.5 * (edges[k] + edges[k + 1]);
    return c;
}

void SpectralDensity::validate(double tol) const {
    check_edges(edges);
    if (mass.size() + 1 != edges.size()) throw Error(ErrorCode::invalid_spec, "mass/edge size mismatch");
    double total = 0.0;
    for (double m : mass) {
        if (!(m >= 0.0)) throw Error(ErrorCode::invalid_spec, "negative or NaN bin mass");
        total += m;
    }
    if (std::abs(total - 1.0) > tol) throw Error(ErrorCode::invalid_spec, "bin masses do not sum to 1");
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t k) {
    if (k == 0 || !(hi > lo)) throw Error(ErrorCode::invalid_spec, "invalid bin range");
    std::vector<double> e(k + 1);
    const double w = (hi - lo) / static_cast<double>(k);
    for (std::size_t i = 0; i <= k; ++i) e[i] = lo + w * static_cast<double>(i);
    e[k] = hi;
    return e;
}

// ---- Marchenko-Pastur ------------------------------------------------------

double MpParams::lower() const { return sigma2 * std::pow(1.0 - std::sqrt(c), 2); }
double MpParams::upper() const { return sigma2 * std::pow(1.0 + std::sqrt(c), 2); }

void MpParams::validate() const {
    if (!(c > 0.0 && c <= 1.0)) throw Error(ErrorCode::invalid_spec, "aspect ratio must lie in (0,1]");
    if (!(sigma2 > 0.0)) throw Error(ErrorCode::invalid_spec, "variance must be positive");
}

double mp_density(const MpParams& p, double x) {
    p.validate();
    const double lo = p.lower();
    const double hi = p.upper();
    if (x <= lo || x >= hi || x <= 0.0) return 0.0;
    return std::sqrt((hi - x) * (x - lo)) / (2.0 * kPi * p.c * p.sigma2 * x);
}

// ---- AR(1) model -----------------------------------------------------------

double Ar1ModelParams::a() const { return std::sqrt(1.0 - b * b); }

double Ar1ModelParams::grid_upper() const {
    return std::pow(1.0 + std::sqrt(c), 2) * (1.0 + b) / (1.0 - b) * 1.2;
}

Ar1ModelParams& Ar1ModelParams::with_default_grid(std::size_t points) {
    validate();
    if (points < 2) throw Error(ErrorCode::invalid_spec, "grid needs at least 2 points");
    lambda_grid.resize(points);
    const double hi = grid_upper();
    for (std::size_t k = 0; k < points; ++k) {
        lambda_grid[k] = hi * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return *this;
}

void Ar1ModelParams::validate() const {
    if (!(std::abs(b) < 1.0)) throw Error(ErrorCode::domain_error, "|b| must be < 1");
    if (!(c > 0.0 && c <= 1.0)) throw Error(ErrorCode::invalid_spec, "aspect ratio must lie in (0,1]");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_spec, "epsilon must be positive");
}

std::array<Complex, 5> quartic_coefficients(Complex z, double b, double c) {
    const double a2 = 1.0 - b * b;
    const double a4 = a2 * a2;
    const double s = 1.0 + b * b;
    return {
        Complex(a4 * c * c),
        2.0 * a2 * c * (-s * z + a2 * c),
        a2 * a2 * z * z - 2.0 * a2 * c * s * z + (c * c - 1.0) * a4,
        Complex(-2.0 * a4),
        Complex(-a4),
    };
}

std::array<Complex, 4> quartic_mgf_roots(Complex z, const Ar1ModelParams& params) {
    params.validate();
    if (z == Complex(0.0)) throw Error(ErrorCode::domain_error, "z must be nonzero");
    const auto co = quartic_coefficients(z, params.b, params.c);
    double scale = 0.0;
    for (const auto& v : co) scale = std::max(scale, std::abs(v));
    if (!(std::abs(co[0]) > 1e-14 * scale) || !std::isfinite(scale)) {
        throw Error(ErrorCode::degenerate_coefficients, "leading quartic coefficient underflows");
    }
    Eigen::Matrix4cd comp = Eigen::Matrix4cd::Zero();
    for (int k = 0; k < 4; ++k) comp(0, k) = -co[static_cast<std::size_t>(k + 1)] / co[0];
    for (int k = 1; k < 4; ++k) comp(k, k - 1) = 1.0;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(comp, false);
    std::array<Complex, 4> roots;
    for (int k = 0; k < 4; ++k) roots[static_cast<std::size_t>(k)] = newton(solver.eigenvalues()(k), co, 3);
    return roots;
}

Complex physical_mgf(Complex z_target, const Ar1ModelParams& params) {
    constexpr int kSteps = 60;
    if (!(z_target.imag() > 0.0)) throw Error(ErrorCode::domain_error, "z must lie in the upper half-plane");
    const double b = params.b;
    const double c = params.c;
    const double lambda = z_target.real();
    const double top = std::max(10.0 * std::max(params.grid_upper(), 1.0), 10.0 * z_target.imag());
    const double m2 = 1.0 + c * (1.0 + b * b) / (1.0 - b * b);

    // Far from the real axis the physical branch is the one matching the
    // leading moment expansion; follow it down to the target height.
    Complex z(lambda, top);
    Complex m = nearest(quartic_mgf_roots(z, params), 1.0 / z + m2 / (z * z));
    for (int k = 1; k <= kSteps; ++k) {
        const double h = top * std::pow(z_target.imag() / top, static_cast<double>(k) / kSteps);
        z = Complex(lambda, h);
        m = newton(m, quartic_coefficients(z, b, c));
    }
    return nearest(quartic_mgf_roots(z_target, params), m);
}

PhysicalRoot physical_root(double lambda, const Ar1ModelParams& params) {
    const double b = params.b;
    const double c = params.c;
    Complex z(lambda, params.epsilon);
    Complex m = physical_mgf(z, params);

    const Complex zr(lambda, 0.0);
    const Complex mr = newton(m, quartic_coefficients(zr, b, c));
    if (std::abs(mr - m) < 0.1 && mr.imag() <= 1e-9 * std::abs(mr)) {
        double im = std::min(mr.imag(), 0.0);
        if (std::abs(im) < 1e-12 * std::abs(mr)) im = 0.0;
        m = Complex(mr.real(), im);
        z = zr;
    }
    PhysicalRoot out;
    out.m = m;
    out.z = z;
    out.density = std::max(0.0, -((m + 1.0) / z).imag() / kPi);
    return out;
}

double DensityCurve::cdf_at(double x) const {
    if (lambda.empty() || x <= lambda.front()) return 0.0;
    if (x >= lambda.back()) return 1.0;
    const auto it = std::upper_bound(lambda.begin(), lambda.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - lambda.begin());
    const double t = (x - lambda[k - 1]) / (lambda[k] - lambda[k - 1]);
    return cdf[k - 1] + t * (cdf[k] - cdf[k - 1]);
}

DensityCurve frv_ar1_curve(const Ar1ModelParams& params, Exec exec) {
    params.validate();
    Ar1ModelParams p = params;
    if (p.lambda_grid.empty()) p.with_default_grid();
    const auto& grid = p.lambda_grid;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw Error(ErrorCode::invalid_spec, "lambda grid must be ascending");
    }
    // Fails fast on out-of-range parameters before the parallel section.
    quartic_mgf_roots(Complex(1.0, 1.0), p);

    DensityCurve out;
    out.lambda = grid;
    out.density.assign(grid.size(), 0.0);
    detail::parallel_for(static_cast<std::ptrdiff_t>(grid.size()), exec, [&](std::ptrdiff_t k) {
        const double lam = grid[static_cast<std::size_t>(k)];
        if (lam > 0.0) out.density[static_cast<std::size_t>(k)] = physical_root(lam, p).density;
    }, 16);

    out.cdf.assign(grid.size(), 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        out.cdf[k] = out.cdf[k - 1] + 0.5 * (out.density[k] + out.density[k - 1]) * (grid[k] - grid[k - 1]);
    }
    const double total = out.cdf.back();
    if (!(total > 0.0)) throw Error(ErrorCode::domain_error, "model density vanishes on the grid");
    for (double& v : out.cdf) v /= total;

    bool any = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (out.density[k] > 0.0) {
            if (!any) out.support_lo = grid[k];
            out.support_hi = grid[k];
            any = true;
        }
    }
    return out;
}

SpectralDensity bin_curve(const DensityCurve& curve, const std::vector<double>& edges) {
    check_edges(edges);
    SpectralDensity out;
    out.edges = edges;
    out.mass.resize(edges.size() - 1);
    double prev = curve.cdf_at(edges.front());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double next = curve.cdf_at(edges[k + 1]);
        out.mass[k] = std::max(0.0, next - prev);
        total += out.mass[k];
        prev = next;
    }
    out.mass.back() += std::max(0.0, 1.0 - total);
    double sum = 0.0;
    for (double m : out.mass) sum += m;
    for (double& m : out.mass) m /= sum;
    return out;
}

SpectralDensity frv_ar1_density(const Ar1ModelParams& params, std::size_t bins, Exec exec) {
    const DensityCurve curve = frv_ar1_curve(params, exec);
    const double hi = std::max(curve.lambda.back(), curve.support_hi);
    return bin_curve(curve, uniform_edges(0.0, hi, bins));
}

SpectralDensity frv_ar1_density(const Ar1ModelParams& params, const std::vector<double>& edges,
                                Exec exec) {
    return bin_curve(frv_ar1_curve(params, exec), edges);
}

Complex bt_moment_generating(Complex z, double b) {
    if (!(std::abs(b) < 1.0)) throw Error(ErrorCode::domain_error, "|b| must be < 1");
    const double kp = (1.0 + b) / (1.0 - b);
    const double km = (1.0 - b) / (1.0 + b);
    if (z == Complex(kp) || z == Complex(km)) {
        throw Error(ErrorCode::branch_point, "z is a branch point of M_B");
    }
    return 1.0 / (std::sqrt(z - kp) * std::sqrt(z - km));
}

Matrix sample_ar1_residuals(Index n, Index t, double b, std::uint64_t seed) {
    if (!(std::abs(b) < 1.0)) throw Error(ErrorCode::domain_error, "|b| must be < 1");
    if (n < 1 || t < 1) throw Error(ErrorCode::invalid_spec, "empty residual shape");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double innov = std::sqrt(1.0 - b * b);
    Matrix u(n, t);
    for (Index i = 0; i < n; ++i) {
        u(i, 0) = gauss(rng);
        for (Index s = 1; s < t; ++s) u(i, s) = b * u(i, s - 1) + innov * gauss(rng);
    }
    return u;
}

double js_divergence(const SpectralDensity& p, const SpectralDensity& q) {
    if (p.edges != q.edges || p.mass.size() != q.mass.size()) {
        throw Error(ErrorCode::bin_mismatch, "densities must share bin edges");
    }
    double d = 0.0;
    for (std::size_t k = 0; k < p.mass.size(); ++k) {
        const double a = p.mass[k];
        const double b = q.mass[k];
        const double m = 0.5 * (a + b);
        if (a > 0.0) d += 0.5 * a * std::log(a / m);
        if (b > 0.0) d += 0.5 * b * std::log(b / m);
    }
    return std::clamp(d, 0.0, std::numbers::ln2);
}

SpectralDensity bin_eigenvalues(std::span<const double> eigs, const std::vector<double>& edges) {
    if (eigs.empty()) throw Error(ErrorCode::invalid_spec, "no eigenvalues to bin");
    check_edges(edges);
    SpectralDensity out;
    out.edges = edges;
    out.mass.assign(edges.size() - 1, 0.0);
    const double w = 1.0 / static_cast<double>(eigs.size());
    for (double x : eigs) {
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        std::ptrdiff_t k = (it - edges.begin()) - 1;
        k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(out.mass.size()) - 1);
        out.mass[static_cast<std::size_t>(k)] += w;
    }
    return out;
}

SpectralDensity bin_eigenvalues(const Vector& eigs, const std::vector<double>& edges) {
    return bin_eigenvalues(std::span<const double>(eigs.data(), static_cast<std::size_t>(eigs.size())), edges);
}

// ---- kernel smoothing ------------------------------------------------------

namespace {

struct NormalTable {
    static constexpr double lim = 8.5;
    static constexpr double step = 1.0 / 1024.0;
    std::vector<double> v;
    NormalTable() {
        const auto n = static_cast<std::size_t>(2.0 * lim / step) + 2;
        v.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double x = -lim + step * static_cast<double>(k);
            v[k] = 0.5 * std::erfc(-x / std::numbers::sqrt2);
        }
    }
};

const NormalTable& normal_table() {
    static const NormalTable table;
    return table;
}

}  // namespace

double normal_cdf_fast(double x) {
    const auto& t = normal_table();
    if (x <= -NormalTable::lim) return 0.0;
    if (x >= NormalTable::lim) return 1.0;
    const double u = (x + NormalTable::lim) / NormalTable::step;
    const auto k = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(k);
    return t.v[k] + f * (t.v[k + 1] - t.v[k]);
}

SpectralDensity smooth_eigenvalues(std::span<const double> eigs, const std::vector<double>& edges,
                                   double bandwidth) {
    if (eigs.empty()) throw Error(ErrorCode::invalid_spec, "no eigenvalues to bin");
    if (!(bandwidth > 0.0)) throw Error(ErrorCode::invalid_spec, "bandwidth must be positive");
    check_edges(edges);
    const double inv = 1.0 / bandwidth;
    std::vector<double> f(edges.size(), 0.0);
    for (std::size_t k = 1; k + 1 < edges.size(); ++k) {
        double s = 0.0;
        for (double x : eigs) s += normal_cdf_fast((edges[k] - x) * inv);
        f[k] = s / static_cast<double>(eigs.size());
    }
    return from_edge_cdf(edges, std::move(f));
}

const std::array<std::pair<double, double>, 24>& gauss_hermite_24() {
    static const auto rule = [] {
        // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite weight.
        constexpr int n = 24;
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
        for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
        std::array<std::pair<double, double>, 24> r{};
        for (int k = 0; k < n; ++k) {
            const double v0 = es.eigenvectors()(0, k);
            r[static_cast<std::size_t>(k)] = {es.eigenvalues()(k), v0 * v0};
        }
        return r;
    }();
    return rule;
}

SmoothedCdf::SmoothedCdf(const DensityCurve& curve, double bandwidth, std::size_t points)
    : h_(bandwidth), support_hi_(curve.support_hi) {
    if (!(bandwidth > 0.0)) throw Error(ErrorCode::invalid_spec, "bandwidth must be positive");
    if (points < 2) throw Error(ErrorCode::invalid_spec, "table needs at least 2 points");
    const auto& gh = gauss_hermite_24();
    x0_ = std::min(0.0, curve.support_lo) - 8.0 * h_;
    const double x1 = std::max(curve.support_hi, curve.lambda.back()) + 8.0 * h_;
    dx_ = (x1 - x0_) / static_cast<double>(points - 1);
    table_.resize(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double x = x0_ + dx_ * static_cast<double>(k);
        double s = 0.0;
        for (const auto& [node, weight] : gh) s += weight * curve.cdf_at(x - h_ * node);
        table_[k] = s;
    }
}

double SmoothedCdf::operator()(double x) const {
    if (table_.empty()) return 0.0;
    const double u = (x - x0_) / dx_;
    if (u <= 0.0) return table_.front();
    const double last = static_cast<double>(table_.size() - 1);
    if (u >= last) return table_.back();
    const auto k = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(k);
    return table_[k] + f * (table_[k + 1] - table_[k]);
}

SpectralDensity smooth_bin_curve(const SmoothedCdf& cdf, const std::vector<double>& edges) {
    check_edges(edges);
    std::vector<double> f(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) f[k] = cdf(edges[k]);
    return from_edge_cdf(edges, std::move(f));
}

// ---- CSV -------------------------------------------------------------------

void write_density_csv(std::ostream& os, const SpectralDensity& d) {
    os << "bin_center,mass\n";
    os << std::setprecision(17);
    const auto c = d.centers();
    for (std::size_t k = 0; k < c.size(); ++k) os << c[k] << ',' << d.mass[k] << '\n';
}

SpectralDensity read_density_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("bin_center,mass", 0) != 0) {
        throw Error(ErrorCode::parse_error, "missing density CSV header");
    }
    std::vector<double> centers;
    SpectralDensity out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::parse_error, "malformed density row");
        try {
            centers.push_back(std::stod(line.substr(0, comma)));
            out.mass.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::parse_error, "non-numeric density row");
        }
    }
    if (centers.empty()) throw Error(ErrorCode::parse_error, "density CSV has no rows");
    // Edges are recovered assuming uniform bins.
    const double w = centers.size() > 1 ? (centers.back() - centers.front()) / static_cast<double>(centers.size() - 1) : 1.0;
    out.edges.resize(centers.size() + 1);
    for (std::size_t k = 0; k <= centers.size(); ++k) {
        out.edges[k] = centers.front() - 0.5 * w + w * static_cast<double>(k);
    }
    return out;
}

}  // namespace stcorr
