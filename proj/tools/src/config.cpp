#include "rgess/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <rgess/diagnostics.hpp>
#include <rgess/targets.hpp>

namespace rgess::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

std::size_t to_size(std::string_view v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
    }
    return out;
}

std::uint64_t to_u64(std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError("expected an unsigned integer, got '" + std::string(v) + "'");
    }
    return out;
}

double to_double(std::string_view v) {
    try {
        return parse_double(v);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + std::string(v) + "'");
    }
}

bool to_bool(std::string_view v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

Eigen::VectorXd to_vector(std::string_view v) {
    if (v.empty()) return {};
    const auto parts = split(v, ',');
    Eigen::VectorXd out(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) out[static_cast<Eigen::Index>(i)] = to_double(parts[i]);
    return out;
}

std::string from_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_double(v[i]);
    }
    return out;
}

std::vector<Eigen::VectorXd> to_points(std::string_view v) {
    std::vector<Eigen::VectorXd> out;
    if (v.empty()) return out;
    for (auto part : split(v, ';')) out.push_back(to_vector(part));
    return out;
}

std::string from_points(const std::vector<Eigen::VectorXd>& pts) {
    std::string out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) out += "; ";
        out += from_vector(pts[i]);
    }
    return out;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Field {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define RGESS_SIZE_FIELD(key, member)                                                         \
    Field {                                                                                   \
        key, [](const ExperimentConfig& c) { return std::to_string(c.member); },              \
            [](ExperimentConfig& c, std::string_view v) { c.member = to_size(v); }            \
    }
#define RGESS_DOUBLE_FIELD(key, member)                                                       \
    Field {                                                                                   \
        key, [](const ExperimentConfig& c) { return format_double(c.member); },               \
            [](ExperimentConfig& c, std::string_view v) { c.member = to_double(v); }          \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"target.kind", [](const ExperimentConfig& c) { return std::string(to_string(c.target.kind)); },
              [](ExperimentConfig& c, std::string_view v) { c.target.kind = parse_target_kind(v); }},
        Field{"target.path", [](const ExperimentConfig& c) { return c.target.path.string(); },
              [](ExperimentConfig& c, std::string_view v) { c.target.path = std::string(v); }},
        RGESS_SIZE_FIELD("target.n_select", target.n_select),
        RGESS_SIZE_FIELD("target.n_features", target.n_features),
        Field{"target.header", [](const ExperimentConfig& c) { return from_bool(c.target.header); },
              [](ExperimentConfig& c, std::string_view v) { c.target.header = to_bool(v); }},
        RGESS_DOUBLE_FIELD("target.train_fraction", target.train_fraction),
        Field{"target.data_seed", [](const ExperimentConfig& c) { return std::to_string(c.target.data_seed); },
              [](ExperimentConfig& c, std::string_view v) { c.target.data_seed = to_u64(v); }},
        RGESS_SIZE_FIELD("target.synth_n", target.synth_n),
        Field{"target.beta_star", [](const ExperimentConfig& c) { return from_vector(c.target.beta_star); },
              [](ExperimentConfig& c, std::string_view v) { c.target.beta_star = to_vector(v); }},

        RGESS_SIZE_FIELD("run.chains", run.chains),
        RGESS_SIZE_FIELD("run.iterations", run.iterations),
        RGESS_SIZE_FIELD("run.burn_in", run.burn_in),
        RGESS_SIZE_FIELD("run.thinning", run.thinning),
        RGESS_SIZE_FIELD("run.steps_per_iteration", run.steps_per_iteration),
        Field{"run.kernel", [](const ExperimentConfig& c) { return std::string(to_string(c.run.kernel)); },
              [](ExperimentConfig& c, std::string_view v) {
                  try {
                      c.run.kernel = parse_kernel(v);
                  } catch (const std::exception& e) {
                      throw ConfigError(e.what());
                  }
              }},
        Field{"run.seed", [](const ExperimentConfig& c) { return std::to_string(c.run.master_seed); },
              [](ExperimentConfig& c, std::string_view v) { c.run.master_seed = to_u64(v); }},
        RGESS_SIZE_FIELD("run.max_shrink", run.max_shrink),
        Field{"run.weighted_regions", [](const ExperimentConfig& c) { return from_bool(c.run.weighted_regions); },
              [](ExperimentConfig& c, std::string_view v) { c.run.weighted_regions = to_bool(v); }},

        Field{"init.mean", [](const ExperimentConfig& c) { return from_vector(c.run.init_mean); },
              [](ExperimentConfig& c, std::string_view v) { c.run.init_mean = to_vector(v); }},
        RGESS_DOUBLE_FIELD("init.cov_scale", init_cov_scale),

        Field{"adaptation.scheme", [](const ExperimentConfig& c) { return std::string(to_string(c.run.adaptation.scheme)); },
              [](ExperimentConfig& c, std::string_view v) {
                  try {
                      c.run.adaptation.scheme = parse_adaptation_scheme(v);
                  } catch (const std::exception& e) {
                      throw ConfigError(e.what());
                  }
              }},
        RGESS_SIZE_FIELD("adaptation.components", run.adaptation.components),
        RGESS_SIZE_FIELD("adaptation.interval", run.adaptation.interval),
        RGESS_DOUBLE_FIELD("adaptation.reg_radius", run.adaptation.reg_radius),
        RGESS_DOUBLE_FIELD("adaptation.sa_c", run.adaptation.learning_rate.c),
        RGESS_DOUBLE_FIELD("adaptation.sa_n0", run.adaptation.learning_rate.n0),
        RGESS_SIZE_FIELD("adaptation.em_max_iters", run.adaptation.em_max_iters),
        RGESS_DOUBLE_FIELD("adaptation.em_tol", run.adaptation.em_tol),
        Field{"adaptation.fixed_dof",
              [](const ExperimentConfig& c) {
                  return c.run.adaptation.fixed_dof ? format_double(*c.run.adaptation.fixed_dof) : std::string();
              },
              [](ExperimentConfig& c, std::string_view v) {
                  if (v.empty()) c.run.adaptation.fixed_dof.reset();
                  else c.run.adaptation.fixed_dof = to_double(v);
              }},
        RGESS_DOUBLE_FIELD("adaptation.initial_dof", run.adaptation.initial_dof),
        RGESS_DOUBLE_FIELD("adaptation.vi_alpha0", run.adaptation.vi.alpha0),
        RGESS_DOUBLE_FIELD("adaptation.vi_beta0", run.adaptation.vi.beta0),
        RGESS_DOUBLE_FIELD("adaptation.vi_w0_scale", run.adaptation.vi.w0_scale),

        RGESS_DOUBLE_FIELD("mh.proposal_scale", run.mh_proposal_scale),
        Field{"ess.prior_mean",
              [](const ExperimentConfig& c) { return c.ess_prior_mean ? from_vector(*c.ess_prior_mean) : std::string(); },
              [](ExperimentConfig& c, std::string_view v) {
                  if (v.empty()) c.ess_prior_mean.reset();
                  else c.ess_prior_mean = to_vector(v);
              }},
        RGESS_DOUBLE_FIELD("ess.prior_cov_scale", ess_prior_cov_scale),

        Field{"output.dir", [](const ExperimentConfig& c) { return c.output_dir.string(); },
              [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); }},
        RGESS_SIZE_FIELD("report.window", report.window),
        Field{"report.modes", [](const ExperimentConfig& c) { return from_points(c.report.modes); },
              [](ExperimentConfig& c, std::string_view v) { c.report.modes = to_points(v); }},
        RGESS_DOUBLE_FIELD("report.mode_radius", report.mode_radius),
    };
    return table;
}

#undef RGESS_SIZE_FIELD
#undef RGESS_DOUBLE_FIELD

const Field& find_field(std::string_view key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw ConfigError("unknown key '" + std::string(key) + "'");
}

void assign(ExperimentConfig& c, std::string_view key, std::string_view value) {
    const Field& f = find_field(key);
    try {
        f.set(c, value);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

}  // namespace

std::string_view to_string(TargetKind k) {
    switch (k) {
        case TargetKind::gauss_mix: return "gauss_mix";
        case TargetKind::logistic: return "logistic";
        case TargetKind::logistic_synth: return "logistic_synth";
        case TargetKind::litter: return "litter";
    }
    return "gauss_mix";
}

TargetKind parse_target_kind(std::string_view s) {
    for (auto k : {TargetKind::gauss_mix, TargetKind::logistic, TargetKind::logistic_synth, TargetKind::litter}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown target '" + std::string(s) + "' (expected gauss_mix, logistic, logistic_synth, litter)");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
    ExperimentConfig c;
    std::map<std::string, std::size_t, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (auto it = seen.find(key); it != seen.end()) {
            throw ConfigError(where + "'" + std::string(key) + "' already set on line " + std::to_string(it->second));
        }
        seen.emplace(std::string(key), line_no);
        try {
            assign(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        const std::string head = f.key.substr(0, f.key.find('.'));
        if (head != section) {
            if (!section.empty()) out += "\n";
            section = head;
        }
        const std::string value = f.get(c);
        out += f.key;
        out += value.empty() ? " =" : " = " + value;
        out += "\n";
    }
    return out;
}

void apply_override(ExperimentConfig& c, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    assign(c, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::size_t target_dim(const ExperimentConfig& c) {
    switch (c.target.kind) {
        case TargetKind::gauss_mix: return 2;
        case TargetKind::litter: return LitterTarget::dim;
        case TargetKind::logistic: return c.target.n_features;
        case TargetKind::logistic_synth: return static_cast<std::size_t>(c.target.beta_star.size());
    }
    return 0;
}

RunConfig make_run_config(const ExperimentConfig& c) {
    RunConfig r = c.run;
    const auto d = r.init_mean.size();
    r.init_cov = c.init_cov_scale * Eigen::MatrixXd::Identity(d, d);
    r.summary_window = c.report.window;
    if (c.ess_prior_mean) {
        const auto e = c.ess_prior_mean->size();
        r.ess_prior = Gaussian(*c.ess_prior_mean, c.ess_prior_cov_scale * Eigen::MatrixXd::Identity(e, e));
    }
    return r;
}

void validate_config(const ExperimentConfig& c) {
    const std::size_t dim = target_dim(c);
    if (dim == 0) throw ConfigError("target has dimension 0 (set target.beta_star or target.n_features)");
    if (!(c.init_cov_scale > 0.0)) throw ConfigError("init.cov_scale must be > 0");
    if (!(c.ess_prior_cov_scale > 0.0)) throw ConfigError("ess.prior_cov_scale must be > 0");
    if (c.ess_prior_mean && static_cast<std::size_t>(c.ess_prior_mean->size()) != dim) {
        throw ConfigError("ess.prior_mean has dimension " + std::to_string(c.ess_prior_mean->size()) + ", target has " +
                          std::to_string(dim));
    }
    if (!(c.report.mode_radius > 0.0)) throw ConfigError("report.mode_radius must be > 0");
    for (const auto& m : c.report.modes) {
        if (static_cast<std::size_t>(m.size()) != dim) throw ConfigError("report.modes: every mode needs " + std::to_string(dim) + " coordinates");
    }
    if (c.target.kind == TargetKind::logistic || c.target.kind == TargetKind::logistic_synth) {
        if (!(c.target.train_fraction > 0.0 && c.target.train_fraction <= 1.0)) {
            throw ConfigError("target.train_fraction must lie in (0, 1]");
        }
    }
    if (c.target.kind == TargetKind::logistic) {
        if (c.target.path.empty()) throw ConfigError("target.path is required for target.kind = logistic");
        if (!std::filesystem::is_regular_file(c.target.path)) {
            throw ConfigError("target.path " + c.target.path.string() +
                              " does not exist. Expected a comma-separated file with numeric feature columns and the "
                              "class label in the last column (covtype.data layout: 54 features, class 1-7).");
        }
        if (c.target.n_select == 0) throw ConfigError("target.n_select must be >= 1");
    }
    if (c.target.kind == TargetKind::logistic_synth && c.target.synth_n == 0) {
        throw ConfigError("target.synth_n must be >= 1");
    }
    if (c.output_dir.empty()) throw ConfigError("output.dir must be set");
    if (std::filesystem::exists(c.output_dir) && !std::filesystem::is_directory(c.output_dir)) {
        throw ConfigError("output.dir " + c.output_dir.string() + " exists and is not a directory");
    }
    try {
        make_run_config(c).validate(dim);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace rgess::cli
