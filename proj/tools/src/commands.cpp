#include "rgess/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <rgess/runner.hpp>

#ifndef RGESS_PRESET_DIR
#define RGESS_PRESET_DIR "presets"
#endif

namespace rgess::cli {

namespace {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

std::vector<double> quarter_means(const Traces& traces) {
    const std::size_t n = traces.front().size();
    std::vector<double> out;
    if (n < 4) return out;
    for (std::size_t q = 0; q < 4; ++q) {
        const std::size_t lo = q * n / 4, hi = (q + 1) * n / 4;
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& t : traces) {
            for (std::size_t i = lo; i < hi; ++i, ++count) total += static_cast<double>(t[i].rejections);
        }
        out.push_back(total / static_cast<double>(count));
    }
    return out;
}

void write_run_info(const RunSummary& s, double seconds, std::size_t threads, const std::filesystem::path& path) {
    std::ofstream out(path);
    out << "key,value\n";
    out << "capped_steps," << s.capped_steps << "\n";
    out << "sa_skipped," << s.sa_skipped << "\n";
    out << "reseeded_components," << s.reseeded_components << "\n";
    out << "dof_failures," << s.dof_failures << "\n";
    out << "threads," << threads << "\n";
    out << "seconds," << format_double(seconds) << "\n";
}

}  // namespace

LoadedTarget load_target(const TargetSpec& spec) {
    switch (spec.kind) {
        case TargetKind::gauss_mix: return {gauss_mix_target(), std::nullopt};
        case TargetKind::litter: return {litter_target(embedded_litter_data()), std::nullopt};
        case TargetKind::logistic: {
            Dataset d = load_covtype(spec.path, spec.n_select, spec.n_features, spec.train_fraction, spec.data_seed,
                                     spec.header);
            return {logistic_target(LogisticTarget(d.train_x, d.train_y)), std::move(d)};
        }
        case TargetKind::logistic_synth: {
            Dataset d = synthetic_logistic(spec.synth_n, spec.beta_star, spec.train_fraction, spec.data_seed);
            return {logistic_target(LogisticTarget(d.train_x, d.train_y)), std::move(d)};
        }
    }
    throw ConfigError("unhandled target kind");
}

std::vector<SummaryRow> summarize(const Traces& traces, const std::vector<MixtureSnapshot>& history,
                                  const ExperimentConfig& config, const std::optional<Dataset>& data) {
    std::vector<SummaryRow> rows;
    if (traces.empty() || traces.front().empty()) return rows;
    const auto series = rejection_rate_series(traces, config.report.window);
    for (std::size_t i = 0; i < series.size(); ++i) rows.push_back({"rejection_rate", i, series[i]});
    const auto quarters = quarter_means(traces);
    for (std::size_t q = 0; q < quarters.size(); ++q) rows.push_back({"rejection_quarter", q, quarters[q]});

    double total = 0.0;
    std::size_t records = 0, accepted = 0;
    for (const auto& t : traces) {
        for (const auto& r : t) {
            total += static_cast<double>(r.rejections);
            accepted += r.rejections == 0 ? 1 : 0;
            ++records;
        }
    }
    rows.push_back({"mean_rejections", 0, total / static_cast<double>(records)});
    rows.push_back({"acceptance_rate", 0, static_cast<double>(accepted) / static_cast<double>(records)});
    rows.push_back({"adaptations", 0, history.empty() ? 0.0 : static_cast<double>(history.size() - 1)});

    const std::size_t burn_in = config.run.burn_in;
    if (!config.report.modes.empty()) {
        const auto cov = mode_coverage(traces, ModeSpec{config.report.modes, config.report.mode_radius}, burn_in);
        for (std::size_t j = 0; j < cov.size(); ++j) rows.push_back({"mode_coverage", j, cov[j]});
    }
    const Eigen::VectorXd mean = posterior_mean(traces, burn_in);
    for (Eigen::Index d = 0; d < mean.size(); ++d) rows.push_back({"posterior_mean", static_cast<std::size_t>(d), mean[d]});
    if (data && data->test_x.rows() > 0) rows.push_back({"accuracy", 0, accuracy(mean, *data)});
    return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "metric,index,value\n";
    for (const auto& r : rows) out << r.metric << ',' << r.index << ',' << format_double(r.value) << '\n';
}

int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    LoadedTarget target;
    try {
        validate_config(config);
        target = load_target(config.target);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (config.target.kind == TargetKind::logistic) {
        out << "dataset " << config.target.path.string() << ": fnv1a64=" << std::hex << fnv1a_file(config.target.path)
            << std::dec << ", train " << target.data->train_x.rows() << ", test " << target.data->test_x.rows() << "\n";
    }

    const RunConfig run_config = make_run_config(config);
    RunResult result;
    const auto start = std::chrono::steady_clock::now();
    try {
        result = run(run_config, target.density);
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    try {
        const auto& dir = config.output_dir;
        std::filesystem::create_directories(dir);
        write_trace_csv(result.traces, result.mixture_history, dir / "trace.csv", dir / "mixtures.csv");
        const auto rows = summarize(result.traces, result.mixture_history, config, target.data);
        write_summary_csv(rows, dir / "summary.csv");
        write_run_info(result.summary, seconds,
                       std::min(run_config.threads ? run_config.threads : default_thread_count(), run_config.chains),
                       dir / "run_info.csv");
        std::ofstream(dir / "config.cfg") << serialize_config(config);

        out << "wrote " << dir.string() << " (" << result.traces.size() << " chains, " << run_config.iterations
            << " iterations, " << format_double(seconds) << " s)\n";
        for (const auto& r : rows) {
            if (r.metric == "rejection_rate") continue;
            out << "  " << r.metric << "[" << r.index << "] = " << format_double(r.value) << "\n";
        }
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

std::filesystem::path preset_dir() {
    if (const char* env = std::getenv("RGESS_PRESET_DIR"); env != nullptr && *env != '\0') return env;
    return RGESS_PRESET_DIR;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(preset_dir(), ec)) {
        if (entry.path().extension() == ".cfg") names.push_back(entry.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

int cmd_run_file(const std::string& config_path, const std::vector<std::string>& overrides, std::ostream& out,
                 std::ostream& err) {
    ExperimentConfig config;
    try {
        std::filesystem::path path = config_path;
        if (!std::filesystem::exists(path)) {
            const auto preset = preset_dir() / (config_path + ".cfg");
            if (!std::filesystem::exists(preset)) throw ConfigError("no config file or preset named '" + config_path + "'");
            path = preset;
        }
        config = load_config(path);
        for (const auto& o : overrides) apply_override(config, o);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return cmd_run(config, out, err);
}

int cmd_report(const std::filesystem::path& dir, std::optional<std::size_t> window, std::ostream& out,
               std::ostream& err) {
    ExperimentConfig config;
    Traces traces;
    std::vector<MixtureSnapshot> history;
    std::optional<Dataset> data;
    std::filesystem::path current;
    try {
        current = dir / "config.cfg";
        config = load_config(current);
        if (window) config.report.window = *window;
        if (config.report.window == 0) throw ConfigError("window must be >= 1");
        current = dir / "trace.csv";
        if (!std::filesystem::exists(current)) throw std::runtime_error("missing file");
        traces = read_trace_csv(current);
        current = dir / "mixtures.csv";
        if (!std::filesystem::exists(current)) throw std::runtime_error("missing file");
        history = read_mixtures_csv(current);
        current = config.target.kind == TargetKind::logistic ? config.target.path : std::filesystem::path();
        data = load_target(config.target).data;
    } catch (const std::exception& e) {
        err << "report error: " << (current.empty() ? std::string() : current.string() + ": ") << e.what() << "\n";
        return kExitConfig;
    }
    try {
        write_summary_csv(summarize(traces, history, config, data), dir / "report.csv");
    } catch (const std::exception& e) {
        err << "report error: " << e.what() << "\n";
        return kExitRuntime;
    }
    out << "wrote " << (dir / "report.csv").string() << "\n";
    return kExitOk;
}

std::vector<Eigen::VectorXd> read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::vector<Eigen::VectorXd> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            const auto a = cell.find_first_not_of(" \t"), b = cell.find_last_not_of(" \t");
            try {
                values.push_back(parse_double(a == std::string::npos ? "" : cell.substr(a, b - a + 1)));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (line_no == 1) continue;
            throw ConfigError(path.string() + ": line " + std::to_string(line_no) + ": non-numeric value");
        }
        if (!out.empty() && static_cast<std::size_t>(out.front().size()) != values.size()) {
            throw ConfigError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                              std::to_string(out.front().size()) + " values");
        }
        out.push_back(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    if (out.empty()) throw ConfigError(path.string() + ": no samples");
    return out;
}

int cmd_fit(const std::filesystem::path& samples_csv, const FitOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<Eigen::VectorXd> samples;
    AdaptationConfig cfg;
    std::optional<MixtureModel> init;
    try {
        samples = read_samples_csv(samples_csv);
        cfg.scheme = opt.scheme;
        cfg.components = opt.components;
        cfg.reg_radius = opt.reg_radius;
        cfg.fixed_dof = opt.fixed_dof;
        cfg.em_max_iters = opt.em_max_iters;
        cfg.em_tol = opt.em_tol;
        cfg.learning_rate = {opt.sa_c, opt.sa_n0};
        cfg.validate();
        if (opt.scheme == AdaptationScheme::none) throw ConfigError("scheme 'none' fits nothing");
        if (samples.size() < opt.components) throw ConfigError("fewer samples than components");
        if (opt.scheme == AdaptationScheme::sa_gmm) {
            if (opt.init_mixture.empty()) throw ConfigError("sa_gmm needs --init <mixtures.csv>");
            const auto history = read_mixtures_csv(opt.init_mixture);
            if (history.empty()) throw ConfigError(opt.init_mixture.string() + ": no mixture");
            init = history.back().mixture;
            if (init->kind() != ComponentKind::gaussian) throw ConfigError("sa_gmm needs a Gaussian starting mixture");
            if (init->dim() != samples.front().size()) throw ConfigError("starting mixture dimension does not match the samples");
        }
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        std::optional<MixtureModel> fitted;
        if (opt.scheme == AdaptationScheme::sa_gmm) {
            fitted = *init;
            std::size_t skipped = 0;
            for (std::size_t n = 1; n <= opt.sa_steps; ++n) {
                const SaUpdateResult up = sa_gmm_update(*fitted, samples, cfg.learning_rate.rate(n));
                skipped += up.skipped ? 1 : 0;
                fitted = up.mixture;
            }
            fitted = regularized(*fitted, opt.reg_radius);
            out << "sa_gmm: " << opt.sa_steps << " steps, " << skipped << " skipped\n";
        } else {
            Rng rng(opt.seed);
            const FitResult fit = fit_mixture(samples, cfg, rng);
            fitted = fit.mixture;
            out << to_string(opt.scheme) << ": " << fit.iterations_used << " iterations, "
                << (fit.converged ? "converged" : "not converged") << ", objective " << format_double(fit.objective)
                << "\n";
        }
        write_mixtures_csv({{0, *fitted}}, opt.output);
        for (std::size_t j = 0; j < fitted->size(); ++j) {
            out << "  component " << j << ": weight " << format_double(fitted->weights()[j]) << ", mean";
            for (Eigen::Index d = 0; d < fitted->mean(j).size(); ++d) out << ' ' << format_double(fitted->mean(j)[d]);
            out << "\n";
        }
        out << "wrote " << opt.output.string() << "\n";
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace rgess::cli
