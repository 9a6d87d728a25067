#include "stcorr/detectors.hpp"

#include "parallel.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stcorr {

double TestFunction::operator()(double x) const {
    switch (kind) {
        case TestFunctionKind::chebyshev: return 2.0 * x * x - 1.0;
        case TestFunctionKind::entropy: return -x * std::log(x);
        case TestFunctionKind::likelihood_ratio: return x - std::log(x) - 1.0;
        case TestFunctionKind::wasserstein: return x - 2.0 * std::sqrt(x) + 1.0;
    }
    return 0.0;
}

bool TestFunction::needs_positive() const { return kind != TestFunctionKind::chebyshev; }

std::string_view TestFunction::name() const {
    switch (kind) {
        case TestFunctionKind::chebyshev: return "chebyshev";
        case TestFunctionKind::entropy: return "entropy";
        case TestFunctionKind::likelihood_ratio: return "likelihood_ratio";
        case TestFunctionKind::wasserstein: return "wasserstein";
    }
    return "unknown";
}

TestFunction TestFunction::parse(std::string_view name) {
    for (auto k : {TestFunctionKind::chebyshev, TestFunctionKind::entropy, TestFunctionKind::likelihood_ratio,
                   TestFunctionKind::wasserstein}) {
        if (TestFunction{k}.name() == name) return TestFunction{k};
    }
    throw Error(ErrorCode::config_error, "unknown test function '" + std::string(name) + "'");
}

double partial_les(const Vector& eigenvalues, TestFunction phi) {
    double s = 0.0;
    for (double x : eigenvalues) {
        const bool bad = phi.kind == TestFunctionKind::wasserstein ? x < 0.0 : (phi.needs_positive() && x <= 0.0);
        if (bad) throw Error(ErrorCode::domain_error, "test function undefined for non-positive eigenvalue");
        s += phi(x);
    }
    return s;
}

Vector location_indicator(const Vector& eigenvalues, const Matrix& eigenvectors) {
    if (eigenvectors.cols() != eigenvalues.size()) {
        throw Error(ErrorCode::shape_mismatch, "eigenvector count does not match eigenvalues");
    }
    return eigenvectors.cwiseAbs() * eigenvalues;
}

Vector contribution_identity_check(const Vector& eigenvector) { return eigenvector.array().square(); }

double t_confidence(double t, double dof) {
    if (!(dof > 0.0)) throw Error(ErrorCode::invalid_spec, "degrees of freedom must be positive");
    if (!std::isfinite(t)) return 1.0;
    const boost::math::students_t dist(dof);
    // 2F(|t|) - 1 written through the upper tail to keep precision near 1.
    return 1.0 - 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

Confidence confidence_level(std::span<const double> history) {
    const std::size_t n = history.size();
    if (n < 3) throw Error(ErrorCode::invalid_spec, "confidence history needs at least 3 values");
    double mean = 0.0;
    for (double v : history) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : history) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    Confidence c;
    const double scale = std::max(std::abs(mean), 1e-300);
    if (!(sd > 1e-13 * scale)) {
        c.zero_variance = true;
        return c;
    }
    c.t = (history.back() - mean) / sd;
    c.value = t_confidence(c.t, static_cast<double>(n - 1));
    return c;
}

void DetectionConfig::validate() const {
    if (window_width < 2) throw Error(ErrorCode::config_error, "window width must be at least 2");
    if (history_length < 3) throw Error(ErrorCode::config_error, "history length must be at least 3");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw Error(ErrorCode::config_error, "threshold must lie in (0,1]");
    if (grid.p_values.empty() || grid.b_values.empty()) throw Error(ErrorCode::empty_grid, "empty search grid");
}

ModelDensityCache make_model_cache(Index channels, const DetectionConfig& cfg, Exec exec) {
    return ModelDensityCache(channels, cfg.window_width, cfg.grid.b_values, cfg.density, exec);
}

namespace {

struct WindowOutcome {
    bool ok = false;
    int p_hat = 0;
    double n_phi = 0.0;
    double b_hat = 0.0;
    double min_distance = 0.0;
    Vector eta;
    ErrorCode code = ErrorCode::domain_error;
    std::string message;
};

WindowOutcome evaluate_window(const TimeSeriesSet& data, Index end, const DetectionConfig& cfg,
                              const ModelDensityCache& cache) {
    WindowOutcome o;
    try {
        const auto w = standardize_rows(form_window(data, end, cfg.window_width));
        const auto fit = fit_spatio_temporal(w, cfg.grid, cfg.density, &cache, Exec::serial);
        o.p_hat = fit.p_hat;
        o.b_hat = fit.b_hat;
        o.min_distance = fit.min_distance;
        o.n_phi = partial_les(fit.decomposition.retained_eigenvalues, cfg.phi);
        o.eta = location_indicator(fit.decomposition.retained_eigenvalues, fit.decomposition.retained_eigenvectors);
        o.ok = true;
    } catch (const Error& e) {
        o.code = e.code();
        o.message = e.what();
    }
    return o;
}

double trailing_confidence(const std::vector<double>& v, std::size_t k, std::size_t len) {
    if (k + 1 < len) return 0.0;
    return confidence_level(std::span<const double>(v.data() + (k + 1 - len), len)).value;
}

}  // namespace

DetectionResult run_detection(const TimeSeriesSet& data, const DetectionConfig& cfg, Exec exec,
                              const ModelDensityCache* cache) {
    cfg.validate();
    const Index width = cfg.window_width;
    if (data.channels() < 2) throw Error(ErrorCode::invalid_spec, "need at least 2 channels");
    if (data.channels() > width) throw Error(ErrorCode::aspect_ratio, "aspect ratio N/T > 1 is not supported");
    if (data.length() < width) throw Error(ErrorCode::window_out_of_range, "series shorter than one window");
    cfg.grid.validate(data.channels());

    std::optional<ModelDensityCache> own;
    if (cache == nullptr) {
        own.emplace(make_model_cache(data.channels(), cfg, exec));
        cache = &*own;
    }

    const Index first = width - 1;
    const Index count = data.length() - first;
    std::vector<WindowOutcome> outcomes(static_cast<std::size_t>(count));
    detail::parallel_for(static_cast<std::ptrdiff_t>(count), exec, [&](std::ptrdiff_t k) {
        outcomes[static_cast<std::size_t>(k)] = evaluate_window(data, first + k, cfg, *cache);
    }, 4);

    DetectionResult res;
    auto& s = res.series;
    for (Index k = 0; k < count; ++k) {
        auto& o = outcomes[static_cast<std::size_t>(k)];
        const Index end = first + k;
        const auto t = data.timestamps()[static_cast<std::size_t>(end)];
        if (!o.ok) {
            res.failures.push_back({end, t, o.code, o.message});
            continue;
        }
        s.times.push_back(t);
        s.end_index.push_back(end);
        s.p_hat.push_back(o.p_hat);
        s.n_phi.push_back(o.n_phi);
        s.b_hat.push_back(o.b_hat);
        s.combined.push_back(o.n_phi * o.b_hat);
        s.min_distance.push_back(o.min_distance);
        s.eta.push_back(std::move(o.eta));
    }

    const std::size_t m = s.size();
    const auto len = static_cast<std::size_t>(cfg.history_length);
    const Index n = data.channels();
    s.conf_n_phi.resize(m);
    s.conf_b_hat.resize(m);
    s.conf_combined.resize(m);
    s.conf_eta.assign(m, Vector::Zero(n));
    std::vector<std::vector<double>> eta_rows(static_cast<std::size_t>(n), std::vector<double>(m));
    for (std::size_t k = 0; k < m; ++k) {
        for (Index j = 0; j < n; ++j) eta_rows[static_cast<std::size_t>(j)][k] = s.eta[k](j);
    }
    for (std::size_t k = 0; k < m; ++k) {
        s.conf_n_phi[k] = trailing_confidence(s.n_phi, k, len);
        s.conf_b_hat[k] = trailing_confidence(s.b_hat, k, len);
        s.conf_combined[k] = trailing_confidence(s.combined, k, len);
        for (Index j = 0; j < n; ++j) {
            s.conf_eta[k](j) = trailing_confidence(eta_rows[static_cast<std::size_t>(j)], k, len);
        }
    }

    const auto& ids = data.channel_ids();
    for (std::size_t k = 0; k < m;) {
        if (!(s.conf_combined[k] > cfg.threshold)) {
            ++k;
            continue;
        }
        AlarmRecord a;
        a.indicator = "n_phi*b_hat";
        a.time = s.times[k];
        a.start_index = s.end_index[k];
        s.eta[k].maxCoeff(&a.peak_channel);
        for (Index j = 0; j < n; ++j) {
            if (s.conf_eta[k](j) > cfg.threshold) {
                a.located_channels.push_back({j, ids[static_cast<std::size_t>(j)], s.conf_eta[k](j)});
            }
        }
        std::size_t e = k;
        // Merge consecutive windows; a failed window in between breaks the run.
        while (e < m && s.conf_combined[e] > cfg.threshold &&
               (e == k || s.end_index[e] == s.end_index[e - 1] + 1)) {
            a.confidence = std::max(a.confidence, s.conf_combined[e]);
            ++e;
        }
        a.end_time = s.times[e - 1];
        a.end_index = s.end_index[e - 1];
        a.windows = static_cast<Index>(e - k);
        res.alarms.push_back(std::move(a));
        k = e;
    }
    return res;
}

TdrFar tdr_far_from_counts(std::size_t n_gt, std::size_t n_cr, std::size_t n_al) {
    if (n_cr > n_al || n_cr > n_gt) throw Error(ErrorCode::invalid_spec, "correct detections exceed alarms or truths");
    TdrFar r;
    r.n_gt = n_gt;
    r.n_cr = n_cr;
    r.n_al = n_al;
    if (n_gt > 0) r.tdr = static_cast<double>(n_cr) / static_cast<double>(n_gt);
    r.far = n_al > 0 ? static_cast<double>(n_al - n_cr) / static_cast<double>(n_al) : 0.0;
    return r;
}

TdrFar evaluate_tdr_far(const std::vector<AlarmRecord>& alarms, const std::vector<GroundTruthEvent>& truth,
                        std::int64_t tolerance) {
    if (tolerance < 0) throw Error(ErrorCode::invalid_spec, "tolerance must be nonnegative");
    std::vector<std::size_t> order(alarms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return alarms[a].time < alarms[b].time; });
    std::vector<bool> used(truth.size(), false);
    std::size_t hits = 0;
    for (std::size_t ai : order) {
        const auto t = alarms[ai].time;
        std::optional<std::size_t> best;
        for (std::size_t g = 0; g < truth.size(); ++g) {
            if (used[g]) continue;
            const auto d = std::llabs(t - truth[g].onset);
            if (d > tolerance) continue;
            if (!best || d < std::llabs(t - truth[*best].onset)) best = g;
        }
        if (best) {
            used[*best] = true;
            ++hits;
        }
    }
    return tdr_far_from_counts(truth.size(), hits, alarms.size());
}

}  // namespace stcorr
