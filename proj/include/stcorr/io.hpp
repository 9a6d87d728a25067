#pragma once

#include "stcorr/detectors.hpp"
#include "stcorr/factor_model.hpp"
#include "stcorr/spectra.hpp"
#include "stcorr/window.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stcorr {

/// "YYYY-MM-DDTHH:MM:SS" with optional trailing Z, interpreted as UTC.
/// Errors: parse_error.
std::int64_t parse_iso8601(const std::string& s);
std::string format_iso8601(std::int64_t epoch_seconds);

/// Header row: channel id column then ISO-8601 timestamps; one row per channel.
/// Errors: parse_error (empty input, ragged rows, non-numeric cells), invalid_spec.
TimeSeriesSet read_timeseries_csv(std::istream& is);
void write_timeseries_csv(std::ostream& os, const TimeSeriesSet& data);
TimeSeriesSet read_timeseries_csv_file(const std::string& path);
void write_timeseries_csv_file(const std::string& path, const TimeSeriesSet& data);

/// One row of the indicator CSV.
struct IndicatorRow {
    std::int64_t time = 0;
    int p_hat = 0;
    double n_phi = 0.0;
    double b_hat = 0.0;
    double combined = 0.0;
    double min_distance = 0.0;
    double conf_n_phi = 0.0;
    double conf_b_hat = 0.0;
    double conf_combined = 0.0;
    std::vector<std::string> top_channels;  ///< by descending eta
};

std::vector<IndicatorRow> indicator_rows(const IndicatorSeries& s, const std::vector<std::string>& ids,
                                         std::size_t top_k);
void write_indicator_csv(std::ostream& os, const std::vector<IndicatorRow>& rows);
std::vector<IndicatorRow> read_indicator_csv(std::istream& is);

/// time, then eta and its confidence per channel.
void write_eta_csv(std::ostream& os, const IndicatorSeries& s, const std::vector<std::string>& ids);

void write_alarms_jsonl(std::ostream& os, const std::vector<AlarmRecord>& alarms);
std::vector<AlarmRecord> read_alarms_jsonl(std::istream& is);

void write_truth_jsonl(std::ostream& os, const std::vector<GroundTruthEvent>& truth);
std::vector<GroundTruthEvent> read_truth_jsonl(std::istream& is);

struct FitReport {
    int p_hat = 0;
    double b_hat = 0.0;
    double min_distance = 0.0;
    std::vector<int> p_values;
    std::vector<double> b_values;
    std::optional<Matrix> surface;
    std::optional<SpectralDensity> empirical;
    std::optional<SpectralDensity> model;
};

FitReport make_fit_report(const EstimationResult& r, bool with_surface);
void write_fit_report(std::ostream& os, const FitReport& r);
FitReport read_fit_report(std::istream& is);

void write_evaluation(std::ostream& os, const TdrFar& r);
TdrFar read_evaluation(std::istream& is);

}  // namespace stcorr
