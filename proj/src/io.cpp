#include "stcorr/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace stcorr {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double parse_double(const std::string& raw, const std::string& what) {
    const std::string s = strip(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::parse_error, what + ": cannot parse '" + raw + "' as a number");
    }
    return v;
}

long long parse_int(const std::string& raw, const std::string& what) {
    const std::string s = strip(raw);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::parse_error, what + ": cannot parse '" + raw + "' as an integer");
    }
    return v;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

json density_json(const SpectralDensity& d) { return json{{"edges", d.edges}, {"mass", d.mass}}; }

SpectralDensity density_from_json(const json& j) {
    SpectralDensity d;
    d.edges = j.at("edges").get<std::vector<double>>();
    d.mass = j.at("mass").get<std::vector<double>>();
    return d;
}

template <class Fn>
auto guarded_json(const std::string& what, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, what + ": " + e.what());
    }
}

}  // namespace

std::int64_t parse_iso8601(const std::string& raw) {
    std::string s = strip(raw);
    if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
    const auto bad = [&] { return Error(ErrorCode::parse_error, "not an ISO-8601 timestamp: '" + raw + "'"); };
    // YYYY-MM-DDTHH:MM:SS, digits exactly where expected
    if (s.size() != 19) throw bad();
    for (std::size_t k = 0; k < s.size(); ++k) {
        const char want = k == 4 || k == 7 ? '-' : k == 10 ? 'T' : k == 13 || k == 16 ? ':' : '0';
        const bool ok = want == '0' ? (s[k] >= '0' && s[k] <= '9') : (s[k] == want || (k == 10 && s[k] == 't'));
        if (!ok) throw bad();
    }
    const auto field = [&](std::size_t pos, std::size_t len) { return std::stoi(s.substr(pos, len)); };
    std::tm tm{};
    tm.tm_year = field(0, 4) - 1900;
    tm.tm_mon = field(5, 2) - 1;
    tm.tm_mday = field(8, 2);
    tm.tm_hour = field(11, 2);
    tm.tm_min = field(14, 2);
    tm.tm_sec = field(17, 2);
    const std::tm want = tm;
    const std::time_t t = timegm(&tm);
    // timegm normalizes out-of-range fields; a change means the date was invalid
    if (tm.tm_year != want.tm_year || tm.tm_mon != want.tm_mon || tm.tm_mday != want.tm_mday ||
        tm.tm_hour != want.tm_hour || tm.tm_min != want.tm_min || tm.tm_sec != want.tm_sec) {
        throw bad();
    }
    return static_cast<std::int64_t>(t);
}

std::string format_iso8601(std::int64_t t) {
    const std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

// ---- time series -------------------------------------------------------------

TimeSeriesSet read_timeseries_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || strip(line).empty()) throw Error(ErrorCode::parse_error, "empty input");
    const auto header = split(line, ',');
    if (header.size() < 2) throw Error(ErrorCode::parse_error, "header has no timestamp columns");
    std::vector<std::int64_t> times;
    for (std::size_t k = 1; k < header.size(); ++k) times.push_back(parse_iso8601(header[k]));

    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        const auto cells = split(line, ',');
        const std::string where = "line " + std::to_string(lineno);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::parse_error, where + ": expected " + std::to_string(header.size()) + " cells");
        }
        ids.push_back(strip(cells[0]));
        std::vector<double> row(cells.size() - 1);
        for (std::size_t k = 1; k < cells.size(); ++k) {
            if (strip(cells[k]).empty()) throw Error(ErrorCode::invalid_spec, where + ": missing value");
            row[k - 1] = parse_double(cells[k], where);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorCode::parse_error, "no channel rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(times.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < times.size(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    }
    return TimeSeriesSet(std::move(ids), std::move(times), std::move(m));
}

void write_timeseries_csv(std::ostream& os, const TimeSeriesSet& data) {
    os << "channel";
    for (auto t : data.timestamps()) os << ',' << format_iso8601(t);
    os << '\n' << std::setprecision(17);
    for (Index i = 0; i < data.channels(); ++i) {
        os << data.channel_ids()[static_cast<std::size_t>(i)];
        for (Index k = 0; k < data.length(); ++k) os << ',' << data.values()(i, k);
        os << '\n';
    }
}

TimeSeriesSet read_timeseries_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    return read_timeseries_csv(f);
}

void write_timeseries_csv_file(const std::string& path, const TimeSeriesSet& data) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::io_error, "cannot write '" + path + "'");
    write_timeseries_csv(f, data);
    if (!f) throw Error(ErrorCode::io_error, "write to '" + path + "' failed");
}

// ---- indicators --------------------------------------------------------------

std::vector<IndicatorRow> indicator_rows(const IndicatorSeries& s, const std::vector<std::string>& ids,
                                         std::size_t top_k) {
    std::vector<IndicatorRow> rows(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        auto& r = rows[k];
        r.time = s.times[k];
        r.p_hat = s.p_hat[k];
        r.n_phi = s.n_phi[k];
        r.b_hat = s.b_hat[k];
        r.combined = s.combined[k];
        r.min_distance = s.min_distance[k];
        r.conf_n_phi = s.conf_n_phi[k];
        r.conf_b_hat = s.conf_b_hat[k];
        r.conf_combined = s.conf_combined[k];
        const Vector& eta = s.eta[k];
        std::vector<Index> order(static_cast<std::size_t>(eta.size()));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return eta(a) > eta(b); });
        for (std::size_t j = 0; j < std::min(top_k, order.size()); ++j) {
            r.top_channels.push_back(ids[static_cast<std::size_t>(order[j])]);
        }
    }
    return rows;
}

void write_indicator_csv(std::ostream& os, const std::vector<IndicatorRow>& rows) {
    os << "time,p_hat,n_phi,b_hat,n_phi_b_hat,min_distance,conf_n_phi,conf_b_hat,conf_n_phi_b_hat,top_channels\n";
    for (const auto& r : rows) {
        os << format_iso8601(r.time) << ',' << r.p_hat << ',' << fmt(r.n_phi) << ',' << fmt(r.b_hat) << ','
           << fmt(r.combined) << ',' << fmt(r.min_distance) << ',' << fmt(r.conf_n_phi) << ','
           << fmt(r.conf_b_hat) << ',' << fmt(r.conf_combined) << ',';
        for (std::size_t j = 0; j < r.top_channels.size(); ++j) os << (j ? ";" : "") << r.top_channels[j];
        os << '\n';
    }
}

std::vector<IndicatorRow> read_indicator_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("time,p_hat,n_phi", 0) != 0) {
        throw Error(ErrorCode::parse_error, "missing indicator CSV header");
    }
    std::vector<IndicatorRow> rows;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        const auto c = split(line, ',');
        const std::string where = "indicator line " + std::to_string(lineno);
        if (c.size() != 10) throw Error(ErrorCode::parse_error, where + ": expected 10 cells");
        IndicatorRow r;
        r.time = parse_iso8601(c[0]);
        r.p_hat = static_cast<int>(parse_int(c[1], where));
        r.n_phi = parse_double(c[2], where);
        r.b_hat = parse_double(c[3], where);
        r.combined = parse_double(c[4], where);
        r.min_distance = parse_double(c[5], where);
        r.conf_n_phi = parse_double(c[6], where);
        r.conf_b_hat = parse_double(c[7], where);
        r.conf_combined = parse_double(c[8], where);
        if (!strip(c[9]).empty()) r.top_channels = split(strip(c[9]), ';');
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_eta_csv(std::ostream& os, const IndicatorSeries& s, const std::vector<std::string>& ids) {
    os << "time";
    for (const auto& id : ids) os << ",eta_" << id;
    for (const auto& id : ids) os << ",conf_" << id;
    os << '\n';
    for (std::size_t k = 0; k < s.size(); ++k) {
        os << format_iso8601(s.times[k]);
        for (Index j = 0; j < s.eta[k].size(); ++j) os << ',' << fmt(s.eta[k](j));
        for (Index j = 0; j < s.conf_eta[k].size(); ++j) os << ',' << fmt(s.conf_eta[k](j));
        os << '\n';
    }
}

// ---- alarms and truth ----------------------------------------------------------

void write_alarms_jsonl(std::ostream& os, const std::vector<AlarmRecord>& alarms) {
    for (const auto& a : alarms) {
        json located = json::array();
        for (const auto& c : a.located_channels) {
            located.push_back({{"channel", c.channel}, {"id", c.id}, {"confidence", c.confidence}});
        }
        const json j{{"time", format_iso8601(a.time)},
                     {"end_time", format_iso8601(a.end_time)},
                     {"start_index", a.start_index},
                     {"end_index", a.end_index},
                     {"windows", a.windows},
                     {"indicator", a.indicator},
                     {"confidence", a.confidence},
                     {"peak_channel", a.peak_channel},
                     {"located_channels", located}};
        os << j.dump(-1, ' ', false, json::error_handler_t::strict) << '\n';
    }
}

std::vector<AlarmRecord> read_alarms_jsonl(std::istream& is) {
    std::vector<AlarmRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (strip(line).empty()) continue;
        out.push_back(guarded_json("alarm record", [&] {
            const json j = json::parse(line);
            AlarmRecord a;
            a.time = parse_iso8601(j.at("time").get<std::string>());
            a.end_time = parse_iso8601(j.at("end_time").get<std::string>());
            a.start_index = j.at("start_index").get<Index>();
            a.end_index = j.at("end_index").get<Index>();
            a.windows = j.at("windows").get<Index>();
            a.indicator = j.at("indicator").get<std::string>();
            a.confidence = j.at("confidence").get<double>();
            a.peak_channel = j.at("peak_channel").get<Index>();
            for (const auto& c : j.at("located_channels")) {
                a.located_channels.push_back(
                    {c.at("channel").get<Index>(), c.at("id").get<std::string>(), c.at("confidence").get<double>()});
            }
            return a;
        }));
    }
    return out;
}

void write_truth_jsonl(std::ostream& os, const std::vector<GroundTruthEvent>& truth) {
    for (const auto& t : truth) {
        os << json{{"onset", format_iso8601(t.onset)}, {"end", format_iso8601(t.end)}, {"label", t.label}}.dump()
           << '\n';
    }
}

std::vector<GroundTruthEvent> read_truth_jsonl(std::istream& is) {
    std::vector<GroundTruthEvent> out;
    std::string line;
    while (std::getline(is, line)) {
        if (strip(line).empty()) continue;
        out.push_back(guarded_json("truth record", [&] {
            const json j = json::parse(line);
            GroundTruthEvent e;
            e.onset = parse_iso8601(j.at("onset").get<std::string>());
            e.end = j.contains("end") ? parse_iso8601(j.at("end").get<std::string>()) : e.onset;
            e.label = j.value("label", std::string{});
            return e;
        }));
    }
    return out;
}

// ---- fit report ------------------------------------------------------------------

FitReport make_fit_report(const EstimationResult& r, bool with_surface) {
    FitReport f;
    f.p_hat = r.p_hat;
    f.b_hat = r.b_hat;
    f.min_distance = r.min_distance;
    f.p_values = r.p_values;
    f.b_values = r.b_values;
    if (with_surface) f.surface = r.distance_surface;
    return f;
}

void write_fit_report(std::ostream& os, const FitReport& r) {
    json j{{"p_hat", r.p_hat},       {"b_hat", r.b_hat},       {"min_distance", r.min_distance},
           {"p_values", r.p_values}, {"b_values", r.b_values}};
    if (r.surface) {
        json rows = json::array();
        for (Index i = 0; i < r.surface->rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(r.surface->cols()));
            for (Index k = 0; k < r.surface->cols(); ++k) row[static_cast<std::size_t>(k)] = (*r.surface)(i, k);
            rows.push_back(row);
        }
        j["distance_surface"] = rows;
    }
    if (r.empirical) j["empirical_density"] = density_json(*r.empirical);
    if (r.model) j["model_density"] = density_json(*r.model);
    os << j.dump(2) << '\n';
}

FitReport read_fit_report(std::istream& is) {
    return guarded_json("fit report", [&] {
        const json j = json::parse(is);
        FitReport r;
        r.p_hat = j.at("p_hat").get<int>();
        r.b_hat = j.at("b_hat").get<double>();
        r.min_distance = j.at("min_distance").get<double>();
        r.p_values = j.at("p_values").get<std::vector<int>>();
        r.b_values = j.at("b_values").get<std::vector<double>>();
        if (j.contains("distance_surface")) {
            const auto rows = j.at("distance_surface").get<std::vector<std::vector<double>>>();
            Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (static_cast<Index>(rows[i].size()) != m.cols()) {
                    throw Error(ErrorCode::parse_error, "fit report: ragged distance surface");
                }
                for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
            }
            r.surface = std::move(m);
        }
        if (j.contains("empirical_density")) r.empirical = density_from_json(j.at("empirical_density"));
        if (j.contains("model_density")) r.model = density_from_json(j.at("model_density"));
        return r;
    });
}

void write_evaluation(std::ostream& os, const TdrFar& r) {
    json j{{"n_gt", r.n_gt}, {"n_cr", r.n_cr}, {"n_al", r.n_al}, {"far", r.far}};
    j["tdr"] = r.tdr ? json(*r.tdr) : json(nullptr);
    os << j.dump(2) << '\n';
}

TdrFar read_evaluation(std::istream& is) {
    return guarded_json("evaluation report", [&] {
        const json j = json::parse(is);
        TdrFar r;
        r.n_gt = j.at("n_gt").get<std::size_t>();
        r.n_cr = j.at("n_cr").get<std::size_t>();
        r.n_al = j.at("n_al").get<std::size_t>();
        r.far = j.at("far").get<double>();
        if (!j.at("tdr").is_null()) r.tdr = j.at("tdr").get<double>();
        return r;
    });
}

}  // namespace stcorr
