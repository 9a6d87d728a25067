#pragma once

#include "stcorr/common.hpp"
#include "stcorr/factor_model.hpp"
#include "stcorr/window.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stcorr {

enum class TestFunctionKind { chebyshev, entropy, likelihood_ratio, wasserstein };

struct TestFunction {
    TestFunctionKind kind = TestFunctionKind::likelihood_ratio;

    double operator()(double lambda) const;
    /// entropy and likelihood_ratio take logs; wasserstein takes a square root.
    bool needs_positive() const;
    std::string_view name() const;
    /// Errors: config_error for an unknown name.
    static TestFunction parse(std::string_view name);
};

/// Sum of phi over the given eigenvalues. Errors: domain_error for lambda <= 0
/// (or < 0 for wasserstein) when phi is not defined there.
double partial_les(const Vector& eigenvalues, TestFunction phi);

/// eta_j = sum_i lambda_i |v_i(j)|. Errors: shape_mismatch.
Vector location_indicator(const Vector& eigenvalues, const Matrix& eigenvectors);

/// Squared entries of a unit vector, i.e. each row's share of the eigenvalue.
Vector contribution_identity_check(const Vector& eigenvector);

struct Confidence {
    double value = 0.0;  ///< two-sided Student-t confidence P(|T| <= |t|)
    double t = 0.0;      ///< current value standardized by the history mean and std
    bool zero_variance = false;
};

/// History holds the last T' values, the current one last. The standard
/// deviation uses the n-1 denominator. Errors: invalid_spec for fewer than 3 values.
Confidence confidence_level(std::span<const double> history);
/// Confidence of an already standardized value with `dof` degrees of freedom.
double t_confidence(double t, double dof);

struct DetectionConfig {
    Index window_width = 200;
    Index history_length = 200;
    double threshold = 0.95;
    TestFunction phi{};
    FitGrid grid = FitGrid::defaults();
    DensityConfig density{};

    void validate() const;
};

struct IndicatorSeries {
    std::vector<std::int64_t> times;
    std::vector<Index> end_index;
    std::vector<int> p_hat;
    std::vector<double> n_phi;
    std::vector<double> b_hat;
    std::vector<double> combined;  ///< n_phi * b_hat
    std::vector<double> min_distance;
    std::vector<Vector> eta;
    /// Confidences are 0 until a full history of T' values exists.
    std::vector<double> conf_n_phi;
    std::vector<double> conf_b_hat;
    std::vector<double> conf_combined;
    std::vector<Vector> conf_eta;

    std::size_t size() const { return times.size(); }
};

struct LocatedChannel {
    Index channel = 0;
    std::string id;
    double confidence = 0.0;
};

/// One merged run of consecutive windows whose confidence exceeds the threshold
/// strictly, so a threshold of 1 never fires.
struct AlarmRecord {
    std::int64_t time = 0;      ///< end time of the first window in the run
    std::int64_t end_time = 0;  ///< end time of the last window in the run
    Index start_index = 0;      ///< sample index matching `time`
    Index end_index = 0;
    Index windows = 0;
    std::string indicator;
    double confidence = 0.0;  ///< peak over the run
    Index peak_channel = 0;   ///< argmax eta at `time`
    std::vector<LocatedChannel> located_channels;
};

struct WindowFailure {
    Index end_index = 0;
    std::int64_t time = 0;
    ErrorCode code = ErrorCode::domain_error;
    std::string message;
};

struct DetectionResult {
    IndicatorSeries series;
    std::vector<AlarmRecord> alarms;
    std::vector<WindowFailure> failures;
};

/// Sliding-window fit over every end index >= T-1, then a sequential
/// confidence pass. Failed windows are recorded and left out of the series.
/// `cache` may be supplied to share model densities across runs.
/// Errors: invalid_spec / aspect_ratio / window_out_of_range for unusable input.
DetectionResult run_detection(const TimeSeriesSet& data, const DetectionConfig& cfg,
                              Exec exec = Exec::parallel, const ModelDensityCache* cache = nullptr);

/// Builds the cache run_detection would use for this data shape and config.
ModelDensityCache make_model_cache(Index channels, const DetectionConfig& cfg, Exec exec = Exec::parallel);

struct GroundTruthEvent {
    std::int64_t onset = 0;
    std::int64_t end = 0;
    std::string label;
};

struct TdrFar {
    std::optional<double> tdr;  ///< absent when there is no ground truth
    double far = 0.0;
    std::size_t n_gt = 0;
    std::size_t n_cr = 0;
    std::size_t n_al = 0;
};

TdrFar tdr_far_from_counts(std::size_t n_gt, std::size_t n_cr, std::size_t n_al);

/// An alarm matches an event when |alarm.time - onset| <= tolerance (seconds).
/// Alarms are visited in time order and take the nearest unmatched event.
TdrFar evaluate_tdr_far(const std::vector<AlarmRecord>& alarms, const std::vector<GroundTruthEvent>& truth,
                        std::int64_t tolerance);

}  // namespace stcorr
