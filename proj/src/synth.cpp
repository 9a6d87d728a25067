#include "stcorr/synth.hpp"

#include "stcorr/io.hpp"
#include "stcorr/spectra.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace stcorr {

namespace {

Index resolved_end(const AnomalySpec& a, Index samples) { return a.end < 0 ? samples : a.end; }

double anomaly_value(const AnomalySpec& a, Index t, Index end) {
    if (t < a.onset || t >= end) return 0.0;
    if (a.kind == AnomalyKind::step) return a.magnitude;
    const double frac = static_cast<double>(t - a.onset + 1) / static_cast<double>(end - a.onset);
    return a.start_magnitude + (a.magnitude - a.start_magnitude) * frac;
}

double population_variance(const Matrix& m) {
    const double mean = m.mean();
    return (m.array() - mean).square().mean();
}

}  // namespace

void ScenarioSpec::validate() const {
    if (channels < 2) throw Error(ErrorCode::invalid_spec, "scenario needs at least 2 channels");
    if (samples < 2) throw Error(ErrorCode::invalid_spec, "scenario needs at least 2 samples");
    if (!(noise.snr > 0.0)) throw Error(ErrorCode::invalid_spec, "snr must be positive");
    if (!(std::abs(noise.b) < 1.0)) throw Error(ErrorCode::invalid_spec, "noise rate must satisfy |b| < 1");
    if (step_seconds <= 0) throw Error(ErrorCode::invalid_spec, "sample step must be positive");
    if (!std::isfinite(baseline.top) || !std::isfinite(baseline.drop) || !std::isfinite(baseline.drift_amplitude)) {
        throw Error(ErrorCode::invalid_spec, "baseline values must be finite");
    }
    if (baseline.drift_amplitude != 0.0 && !(baseline.drift_period > 0.0)) {
        throw Error(ErrorCode::invalid_spec, "drift period must be positive");
    }
    for (std::size_t k = 0; k < anomalies.size(); ++k) {
        const auto& a = anomalies[k];
        std::ostringstream where;
        where << "anomaly " << k + 1 << ": ";
        if (a.onset < 0 || a.onset >= samples) {
            throw Error(ErrorCode::invalid_spec, where.str() + "onset outside the series");
        }
        const Index end = resolved_end(a, samples);
        if (end <= a.onset || end > samples) throw Error(ErrorCode::invalid_spec, where.str() + "end outside (onset, samples]");
        if (a.channels.empty()) throw Error(ErrorCode::invalid_spec, where.str() + "no channels listed");
        for (Index c : a.channels) {
            if (c < 0 || c >= channels) throw Error(ErrorCode::invalid_spec, where.str() + "channel outside the set");
        }
        if (!std::isfinite(a.magnitude) || !std::isfinite(a.start_magnitude)) {
            throw Error(ErrorCode::invalid_spec, where.str() + "magnitude must be finite");
        }
        if (a.coupling_radius < 0 || !(a.coupling_decay >= 0.0 && a.coupling_decay <= 1.0)) {
            throw Error(ErrorCode::invalid_spec, where.str() + "invalid coupling");
        }
    }
}

Matrix clean_signal(const ScenarioSpec& spec) {
    spec.validate();
    const Index n = spec.channels;
    const Index t = spec.samples;
    Matrix d(n, t);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (Index i = 0; i < n; ++i) {
        const double level = spec.baseline.top - spec.baseline.drop * static_cast<double>(i) / static_cast<double>(n - 1);
        for (Index s = 0; s < t; ++s) {
            const double drift = spec.baseline.drift_amplitude *
                                 std::sin(two_pi * static_cast<double>(s) / spec.baseline.drift_period);
            d(i, s) = level * (1.0 + drift);
        }
    }
    for (const auto& a : spec.anomalies) {
        Vector w = Vector::Zero(n);
        for (Index c : a.channels) {
            for (Index j = std::max<Index>(0, c - a.coupling_radius); j <= std::min(n - 1, c + a.coupling_radius); ++j) {
                w(j) += std::pow(a.coupling_decay, static_cast<double>(std::abs(j - c)));
            }
        }
        const Index end = resolved_end(a, t);
        for (Index s = a.onset; s < end; ++s) d.col(s) += w * anomaly_value(a, s, end);
    }
    return d;
}

double noise_scale(const Matrix& clean, const Matrix& noise, double snr) {
    if (std::isinf(snr)) return 0.0;
    const double ve = population_variance(noise);
    if (!(ve > 0.0)) throw Error(ErrorCode::invalid_spec, "noise has zero variance");
    return std::sqrt(population_variance(clean) / (ve * snr));
}

std::vector<std::string> channel_labels(const std::string& prefix, Index n) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

std::vector<std::int64_t> sample_times(std::int64_t start, std::int64_t step, Index n) {
    std::vector<std::int64_t> out(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = start + step * k;
    return out;
}

TimeSeriesSet generate(const ScenarioSpec& spec) {
    Matrix d = clean_signal(spec);
    if (!std::isinf(spec.noise.snr)) {
        const Matrix e = sample_ar1_residuals(spec.channels, spec.samples, spec.noise.b, spec.seed);
        d += noise_scale(d, e, spec.noise.snr) * e;
    }
    return TimeSeriesSet(channel_labels(spec.channel_prefix, spec.channels),
                         sample_times(spec.start_time, spec.step_seconds, spec.samples), std::move(d));
}

std::vector<GroundTruthEvent> ground_truth(const ScenarioSpec& spec) {
    spec.validate();
    std::vector<GroundTruthEvent> out;
    for (const auto& a : spec.anomalies) {
        GroundTruthEvent g;
        g.onset = spec.start_time + a.onset * spec.step_seconds;
        g.end = spec.start_time + (resolved_end(a, spec.samples) - 1) * spec.step_seconds;
        g.label = a.kind == AnomalyKind::step ? "step" : "ramp";
        for (std::size_t k = 0; k < a.channels.size(); ++k) {
            g.label += (k == 0 ? ":" : ",") + spec.channel_prefix + std::to_string(a.channels[k] + 1);
        }
        out.push_back(std::move(g));
    }
    return out;
}

ScenarioSpec case1_preset(std::uint64_t seed) {
    ScenarioSpec s;
    s.channels = 33;
    s.samples = 1000;
    s.seed = seed;
    AnomalySpec a;
    a.kind = AnomalyKind::step;
    a.channels = {20};
    a.onset = 500;
    a.magnitude = -0.02;
    s.anomalies.push_back(a);
    return s;
}

ScenarioSpec ramp_preset(std::uint64_t seed) {
    ScenarioSpec s;
    s.channels = 57;
    s.samples = 1000;
    s.seed = seed;
    AnomalySpec a;
    a.kind = AnomalyKind::ramp;
    a.channels = {19};
    a.onset = 500;
    a.start_magnitude = 0.0;
    a.magnitude = -0.05;
    s.anomalies.push_back(a);
    return s;
}

ScenarioSpec null_preset(std::uint64_t seed) {
    ScenarioSpec s;
    s.channels = 33;
    s.samples = 1000;
    s.seed = seed;
    return s;
}

ScenarioSpec preset(const std::string& name, std::uint64_t seed) {
    if (name == "case1") return case1_preset(seed);
    if (name == "ramp") return ramp_preset(seed);
    if (name == "null") return null_preset(seed);
    throw Error(ErrorCode::config_error, "unknown preset '" + name + "' (expected case1, ramp or null)");
}

TimeSeriesSet plant_factors(Index n, Index t, int p, double loading_scale, double b_resid, std::uint64_t seed) {
    if (p < 0 || p >= n) throw Error(ErrorCode::invalid_spec, "factor count must lie in [0, N-1]");
    if (n > t) throw Error(ErrorCode::aspect_ratio, "aspect ratio N/T > 1 is not supported");
    std::mt19937_64 master(seed);
    const std::uint64_t resid_seed = master();
    const std::uint64_t factor_seed = master();
    Matrix x = sample_ar1_residuals(n, t, b_resid, resid_seed);
    if (p > 0 && loading_scale != 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Matrix g(n, p);
        for (Index j = 0; j < p; ++j) {
            for (Index i = 0; i < n; ++i) g(i, j) = gauss(master);
        }
        const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(n, p);
        const double edge = std::pow(1.0 + std::sqrt(static_cast<double>(n) / static_cast<double>(t)), 2);
        Vector spikes(p);
        for (Index k = 0; k < p; ++k) spikes(k) = loading_scale * edge * static_cast<double>(k + 1);
        const Matrix f = sample_ar1_residuals(p, t, 0.0, factor_seed);
        x += q * spikes.cwiseSqrt().asDiagonal() * f;
    }
    return TimeSeriesSet(channel_labels("ch", n), sample_times(1488326400, 900, t), std::move(x));
}

// ---- key = value scenario files -------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw Error(ErrorCode::config_error, "key '" + key + "': expected a number");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw Error(ErrorCode::config_error, "key '" + key + "': expected an integer");
    return out;
}

}  // namespace

ScenarioSpec parse_scenario(std::istream& is) {
    ScenarioSpec s;
    s.anomalies.clear();
    std::map<long long, AnomalySpec> anomalies;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::config_error, "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "channels") s.channels = to_int(key, val);
        else if (key == "samples") s.samples = to_int(key, val);
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_int(key, val));
        else if (key == "start_time") s.start_time = parse_iso8601(val);
        else if (key == "step_seconds") s.step_seconds = to_int(key, val);
        else if (key == "channel_prefix") s.channel_prefix = val;
        else if (key == "noise.b") s.noise.b = to_double(key, val);
        else if (key == "noise.snr") s.noise.snr = to_double(key, val);
        else if (key == "baseline.top") s.baseline.top = to_double(key, val);
        else if (key == "baseline.drop") s.baseline.drop = to_double(key, val);
        else if (key == "baseline.drift_amplitude") s.baseline.drift_amplitude = to_double(key, val);
        else if (key == "baseline.drift_period") s.baseline.drift_period = to_double(key, val);
        else if (key.rfind("anomaly.", 0) == 0) {
            const auto dot = key.find('.', 8);
            if (dot == std::string::npos) throw Error(ErrorCode::config_error, "malformed key '" + key + "'");
            const long long id = to_int(key, key.substr(8, dot - 8));
            const std::string field = key.substr(dot + 1);
            auto& a = anomalies[id];
            if (field == "kind") {
                if (val == "step") a.kind = AnomalyKind::step;
                else if (val == "ramp") a.kind = AnomalyKind::ramp;
                else throw Error(ErrorCode::config_error, "key '" + key + "': expected step or ramp");
            } else if (field == "channels") {
                a.channels.clear();
                std::stringstream ss(val);
                std::string item;
                while (std::getline(ss, item, ',')) a.channels.push_back(to_int(key, trim(item)) - 1);
            } else if (field == "onset") a.onset = to_int(key, val) - 1;
            else if (field == "end") a.end = to_int(key, val);
            else if (field == "magnitude") a.magnitude = to_double(key, val);
            else if (field == "start_magnitude") a.start_magnitude = to_double(key, val);
            else if (field == "coupling_radius") a.coupling_radius = to_int(key, val);
            else if (field == "coupling_decay") a.coupling_decay = to_double(key, val);
            else throw Error(ErrorCode::config_error, "unknown key '" + key + "'");
        } else {
            throw Error(ErrorCode::config_error, "unknown key '" + key + "'");
        }
    }
    for (auto& [id, a] : anomalies) s.anomalies.push_back(std::move(a));
    s.validate();
    return s;
}

void write_scenario(std::ostream& os, const ScenarioSpec& s) {
    os << std::setprecision(17);
    os << "channels = " << s.channels << "\n"
       << "samples = " << s.samples << "\n"
       << "seed = " << s.seed << "\n"
       << "start_time = " << format_iso8601(s.start_time) << "\n"
       << "step_seconds = " << s.step_seconds << "\n"
       << "channel_prefix = " << s.channel_prefix << "\n"
       << "noise.b = " << s.noise.b << "\n"
       << "noise.snr = ";
    if (std::isinf(s.noise.snr)) os << "inf";
    else os << s.noise.snr;
    os << "\n"
       << "baseline.top = " << s.baseline.top << "\n"
       << "baseline.drop = " << s.baseline.drop << "\n"
       << "baseline.drift_amplitude = " << s.baseline.drift_amplitude << "\n"
       << "baseline.drift_period = " << s.baseline.drift_period << "\n";
    for (std::size_t k = 0; k < s.anomalies.size(); ++k) {
        const auto& a = s.anomalies[k];
        const std::string p = "anomaly." + std::to_string(k + 1) + ".";
        os << p << "kind = " << (a.kind == AnomalyKind::step ? "step" : "ramp") << "\n" << p << "channels = ";
        for (std::size_t c = 0; c < a.channels.size(); ++c) os << (c ? "," : "") << a.channels[c] + 1;
        os << "\n"
           << p << "onset = " << a.onset + 1 << "\n"
           << p << "end = " << a.end << "\n"
           << p << "magnitude = " << a.magnitude << "\n"
           << p << "start_magnitude = " << a.start_magnitude << "\n"
           << p << "coupling_radius = " << a.coupling_radius << "\n"
           << p << "coupling_decay = " << a.coupling_decay << "\n";
    }
}

}  // namespace stcorr
