#pragma once

#include "stcorr/common.hpp"
#include "stcorr/detectors.hpp"
#include "stcorr/window.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace stcorr {

enum class AnomalyKind { step, ramp };

/// One planted anomaly. Indices are 0-based samples/channels; the interval is [onset, end).
/// A step adds `magnitude`; a ramp goes linearly from `start_magnitude` to `magnitude`.
/// Each listed channel spreads to its neighbours j with weight decay^|j - j0|
/// for |j - j0| <= coupling_radius (a rank-1 loading peaked at the channel).
struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::step;
    std::vector<Index> channels;
    Index onset = 0;
    Index end = -1;  ///< -1 means "until the last sample"
    double magnitude = 0.0;
    double start_magnitude = 0.0;
    Index coupling_radius = 3;
    double coupling_decay = 0.6;
};

struct NoiseSpec {
    double b = 0.5;
    double snr = 500.0;  ///< +inf disables noise
};

/// Per-channel level falling linearly from `top` to `top - drop` along the
/// channel index (a radial feeder profile), optionally modulated by a common
/// sinusoid of relative amplitude `drift_amplitude`.
struct BaselineSpec {
    double top = 1.0;
    double drop = 0.05;
    double drift_amplitude = 0.0;
    double drift_period = 96.0;
};

struct ScenarioSpec {
    Index channels = 33;
    Index samples = 1000;
    BaselineSpec baseline{};
    std::vector<AnomalySpec> anomalies;
    NoiseSpec noise{};
    std::uint64_t seed = 1;
    std::int64_t start_time = 1488326400;  ///< 2017-03-01T00:00:00Z
    std::int64_t step_seconds = 900;
    std::string channel_prefix = "bus";

    /// Errors: invalid_spec.
    void validate() const;
};

/// Noise-free signal (baseline plus anomalies), channels x samples.
Matrix clean_signal(const ScenarioSpec& spec);
/// Noise scale m = sqrt(var(D) / (var(E) * snr)) with variances over all entries.
double noise_scale(const Matrix& clean, const Matrix& noise, double snr);

TimeSeriesSet generate(const ScenarioSpec& spec);

/// One event per planted anomaly, onset/end as timestamps of its first/last sample.
std::vector<GroundTruthEvent> ground_truth(const ScenarioSpec& spec);

/// Labels prefix1..prefixN and timestamps start + k*step.
std::vector<std::string> channel_labels(const std::string& prefix, Index n);
std::vector<std::int64_t> sample_times(std::int64_t start, std::int64_t step, Index n);

/// Step on channel 21 (index 20) from sample 501 (index 500), 33 x 1000, SNR 500, b = 0.5.
ScenarioSpec case1_preset(std::uint64_t seed);
/// Linear ramp on channel 20 from sample 501 to the end, 57 x 1000, SNR 500, b = 0.5.
ScenarioSpec ramp_preset(std::uint64_t seed);
/// No anomalies: feeder baseline plus AR(1) noise, 33 x 1000.
ScenarioSpec null_preset(std::uint64_t seed);
/// Errors: config_error for an unknown preset name.
ScenarioSpec preset(const std::string& name, std::uint64_t seed);

/// L F + U with p random orthonormal loading directions, unit-variance factors,
/// spikes scale * (1+sqrt(N/T))^2 * (1+k) for k = 0..p-1, and AR(1) residuals.
TimeSeriesSet plant_factors(Index n, Index t, int p, double loading_scale, double b_resid, std::uint64_t seed);

/// key = value lines, '#' comments. Anomalies use `anomaly.<k>.<field>` keys
/// with 1-based channels and sample numbers. Errors: config_error (unknown or
/// malformed keys), invalid_spec.
ScenarioSpec parse_scenario(std::istream& is);
void write_scenario(std::ostream& os, const ScenarioSpec& spec);

}  // namespace stcorr
