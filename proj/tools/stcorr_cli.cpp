#include "stcorr/detectors.hpp"
#include "stcorr/factor_model.hpp"
#include "stcorr/io.hpp"
#include "stcorr/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

using namespace stcorr;

namespace {

enum Exit { ok = 0, config = 2, io = 3, numerical = 4 };

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::config_error:
        case ErrorCode::invalid_spec:
        case ErrorCode::empty_grid:
        case ErrorCode::window_out_of_range:
        case ErrorCode::aspect_ratio:
        case ErrorCode::shape_mismatch:
            return config;
        case ErrorCode::io_error:
        case ErrorCode::parse_error:
            return io;
        default:
            return numerical;
    }
}

// "-" is stdout.
void with_output(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    if (path == "-") {
        fn(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "' for writing");
    fn(f);
    f.close();
    if (!f) throw Error(ErrorCode::io_error, "failed writing '" + path + "'");
}

std::ifstream open_input(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
    return f;
}

struct GridOpts {
    int p_min = 1, p_max = 5;
    double b_min = 0.0, b_max = 0.99, b_step = 0.01;
};

struct DensityOpts {
    std::string binning = "kernel";
    std::size_t bins = 100;
    double kappa = 1.0;
    double epsilon = 1e-3;
    std::size_t grid_points = 2000;
};

void add_grid(CLI::App* sub, GridOpts& g) {
    sub->add_option("--p-min", g.p_min, "smallest factor count tried")->capture_default_str();
    sub->add_option("--p-max", g.p_max, "largest factor count tried")->capture_default_str();
    sub->add_option("--b-min", g.b_min, "first autoregressive rate on the grid")->capture_default_str();
    sub->add_option("--b-max", g.b_max, "last autoregressive rate on the grid")->capture_default_str();
    sub->add_option("--b-step", g.b_step, "grid step for the rate")->capture_default_str();
}

void add_density(CLI::App* sub, DensityOpts& d) {
    sub->add_option("--binning", d.binning, "kernel or histogram")
        ->check(CLI::IsMember({"kernel", "histogram"}))
        ->capture_default_str();
    sub->add_option("--bins", d.bins, "bins for spectral densities")->capture_default_str();
    sub->add_option("--kappa", d.kappa, "kernel bandwidth multiplier")->capture_default_str();
    sub->add_option("--epsilon", d.epsilon, "imaginary offset for the model density")->capture_default_str();
    sub->add_option("--grid-points", d.grid_points, "lambda grid size for the model density")->capture_default_str();
}

FitGrid make_grid(const GridOpts& g) {
    if (g.p_min > g.p_max) throw Error(ErrorCode::config_error, "--p-min exceeds --p-max");
    if (!(g.b_step > 0.0) || g.b_min > g.b_max) throw Error(ErrorCode::config_error, "bad rate grid");
    return FitGrid::make(g.p_min, g.p_max, g.b_min, g.b_max, g.b_step);
}

DensityConfig make_density(const DensityOpts& d) {
    DensityConfig c;
    c.binning = d.binning == "histogram" ? Binning::histogram : Binning::kernel;
    if (d.bins < 1) throw Error(ErrorCode::config_error, "--bins must be positive");
    if (!(d.kappa > 0.0)) throw Error(ErrorCode::config_error, "--kappa must be positive");
    if (!(d.epsilon > 0.0)) throw Error(ErrorCode::config_error, "--epsilon must be positive");
    if (d.grid_points < 16) throw Error(ErrorCode::config_error, "--grid-points must be at least 16");
    c.bins = d.bins;
    c.kappa = d.kappa;
    c.epsilon = d.epsilon;
    c.grid_points = d.grid_points;
    return c;
}

struct DetectOpts {
    std::string input;
    Index window = 200;
    Index history = 200;
    double threshold = 0.95;
    std::string phi = "likelihood_ratio";
    GridOpts grid;
    DensityOpts density;
    std::string indicators = "indicators.csv";
    std::string alarms = "alarms.jsonl";
    std::string eta;
    std::size_t top_k = 3;
};

void add_detection(CLI::App* sub, DetectOpts& o) {
    sub->add_option("-i,--input", o.input, "time-series CSV")->required();
    sub->add_option("--window", o.window, "window width T")->capture_default_str();
    sub->add_option("--history", o.history, "history length for confidence")->capture_default_str();
    sub->add_option("--threshold", o.threshold, "confidence threshold")->capture_default_str();
    sub->add_option("--phi", o.phi, "test function")
        ->check(CLI::IsMember({"chebyshev", "entropy", "likelihood_ratio", "wasserstein"}))
        ->capture_default_str();
    add_grid(sub, o.grid);
    add_density(sub, o.density);
}

DetectionConfig make_detection(const DetectOpts& o) {
    DetectionConfig c;
    c.window_width = o.window;
    c.history_length = o.history;
    c.threshold = o.threshold;
    c.phi = TestFunction::parse(o.phi);
    c.grid = make_grid(o.grid);
    c.density = make_density(o.density);
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatio-temporal correlation anomaly detector for multichannel series"};
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "read options from a TOML/INI file; flags override it");
    int threads = 0;
    std::string exec_name = "parallel";
    app.add_option("--threads", threads, "worker threads, 0 = all cores")->capture_default_str();
    app.add_option("--exec", exec_name, "serial or parallel kernels")
        ->check(CLI::IsMember({"serial", "parallel"}))
        ->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario as CSV");
    std::string preset_name = "case1", scenario_file, sim_out, truth_out;
    std::uint64_t seed = 1;
    std::optional<Index> sim_channels, sim_samples, onset;
    std::optional<double> snr, noise_b, magnitude;
    sim->add_option("--preset", preset_name, "case1, ramp or null")->capture_default_str();
    sim->add_option("--scenario", scenario_file, "key=value scenario file (replaces the preset)");
    sim->add_option("--seed", seed, "noise seed")->capture_default_str();
    sim->add_option("--channels", sim_channels, "override channel count");
    sim->add_option("--samples", sim_samples, "override sample count");
    sim->add_option("--snr", snr, "override signal-to-noise ratio");
    sim->add_option("--noise-b", noise_b, "override noise autoregressive rate");
    sim->add_option("--onset", onset, "override onset of the first anomaly (1-based sample)");
    sim->add_option("--magnitude", magnitude, "override magnitude of the first anomaly");
    sim->add_option("-o,--output", sim_out, "output CSV")->required();
    sim->add_option("--truth", truth_out, "also write anomaly intervals as JSON lines");

    // detect / locate
    auto* det = app.add_subcommand("detect", "run sliding-window detection");
    DetectOpts dopt;
    add_detection(det, dopt);
    det->add_option("--indicators", dopt.indicators, "indicator CSV")->capture_default_str();
    det->add_option("--alarms", dopt.alarms, "alarm JSON lines")->capture_default_str();
    det->add_option("--eta", dopt.eta, "optional per-channel eta CSV");
    det->add_option("--top-k", dopt.top_k, "located channels listed per row")->capture_default_str();

    auto* loc = app.add_subcommand("locate", "sliding-window detection, eta output only");
    DetectOpts lopt;
    add_detection(loc, lopt);
    loc->add_option("--eta", lopt.eta, "per-channel eta CSV")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "fit (p, b) on a single window");
    std::string fit_in, fit_out = "-";
    Index fit_end = 0, fit_window = 200;
    bool with_surface = false, with_densities = false;
    GridOpts fgrid;
    DensityOpts fdens;
    fit->add_option("-i,--input", fit_in, "time-series CSV")->required();
    fit->add_option("--end", fit_end, "last sample of the window, 1-based; 0 = last")->capture_default_str();
    fit->add_option("--window", fit_window, "window width T")->capture_default_str();
    add_grid(fit, fgrid);
    add_density(fit, fdens);
    fit->add_flag("--surface", with_surface, "include the distance surface");
    fit->add_flag("--densities", with_densities, "include empirical and model densities");
    fit->add_option("-o,--output", fit_out, "report JSON")->capture_default_str();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "TDR and FAR of alarms against ground truth");
    std::string ev_alarms, ev_truth, ev_out = "-";
    std::int64_t tolerance = 4500;
    ev->add_option("--alarms", ev_alarms, "alarm JSON lines")->required();
    ev->add_option("--truth", ev_truth, "ground-truth JSON lines")->required();
    ev->add_option("--tolerance", tolerance, "matching tolerance in seconds")->capture_default_str();
    ev->add_option("-o,--output", ev_out, "report JSON")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config;
    }

    try {
        if (threads < 0) throw Error(ErrorCode::config_error, "--threads must be >= 0");
        set_num_threads(threads);
        const Exec exec = exec_name == "serial" ? Exec::serial : Exec::parallel;

        if (*sim) {
            ScenarioSpec spec;
            if (!scenario_file.empty()) {
                auto f = open_input(scenario_file);
                spec = parse_scenario(f);
                if (sim->count("--seed")) spec.seed = seed;
            } else {
                spec = preset(preset_name, seed);
            }
            if (sim_channels) spec.channels = *sim_channels;
            if (sim_samples) spec.samples = *sim_samples;
            if (snr) spec.noise.snr = *snr;
            if (noise_b) spec.noise.b = *noise_b;
            if (onset || magnitude) {
                if (spec.anomalies.empty()) throw Error(ErrorCode::config_error, "scenario has no anomaly to override");
                if (onset) spec.anomalies.front().onset = *onset - 1;
                if (magnitude) spec.anomalies.front().magnitude = *magnitude;
            }
            spec.validate();
            const auto data = generate(spec);
            with_output(sim_out, [&](std::ostream& os) { write_timeseries_csv(os, data); });
            if (!truth_out.empty()) {
                const auto truth = ground_truth(spec);
                with_output(truth_out, [&](std::ostream& os) { write_truth_jsonl(os, truth); });
            }
        } else if (*det || *loc) {
            const auto& o = *det ? dopt : lopt;
            const auto cfg = make_detection(o);
            const auto data = read_timeseries_csv_file(o.input);
            const auto res = run_detection(data, cfg, exec);
            for (const auto& f : res.failures) {
                std::cerr << "window ending " << format_iso8601(f.time) << " skipped: " << f.message << '\n';
            }
            if (*det) {
                const auto rows = indicator_rows(res.series, data.channel_ids(), o.top_k);
                with_output(o.indicators, [&](std::ostream& os) { write_indicator_csv(os, rows); });
                with_output(o.alarms, [&](std::ostream& os) { write_alarms_jsonl(os, res.alarms); });
                std::cerr << res.alarms.size() << " alarm(s) over " << res.series.size() << " windows\n";
            }
            if (!o.eta.empty()) {
                with_output(o.eta, [&](std::ostream& os) { write_eta_csv(os, res.series, data.channel_ids()); });
            }
        } else if (*fit) {
            const auto grid = make_grid(fgrid);
            const auto dens = make_density(fdens);
            const auto data = read_timeseries_csv_file(fit_in);
            const Index end = fit_end == 0 ? data.length() - 1 : fit_end - 1;
            const auto w = standardize_rows(form_window(data, end, fit_window));
            const ModelDensityCache cache(w.matrix.rows(), w.matrix.cols(), grid.b_values, dens, exec);
            const auto r = fit_spatio_temporal(w, grid, dens, &cache, exec);
            auto report = make_fit_report(r, with_surface);
            if (with_densities) {
                auto cd = cell_densities(r.residual_eigenvalues, cache.find(r.b_hat), cache);
                report.empirical = std::move(cd.empirical);
                report.model = std::move(cd.model);
            }
            with_output(fit_out, [&](std::ostream& os) { write_fit_report(os, report); });
        } else if (*ev) {
            auto fa = open_input(ev_alarms);
            auto ft = open_input(ev_truth);
            const auto alarms = read_alarms_jsonl(fa);
            const auto truth = read_truth_jsonl(ft);
            const auto r = evaluate_tdr_far(alarms, truth, tolerance);
            with_output(ev_out, [&](std::ostream& os) { write_evaluation(os, r); });
        }
    } catch (const Error& e) {
        std::cerr << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return numerical;
    }
    return ok;
}
