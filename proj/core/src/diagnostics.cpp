#include "rgess/diagnostics.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rgess {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto end = line.find(',', start);
        out.push_back(line.substr(start, end == std::string_view::npos ? end : end - start));
        if (end == std::string_view::npos) return out;
        start = end + 1;
    }
}

std::size_t parse_index(std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + std::string(s) + "'");
    }
    return v;
}

std::runtime_error parse_error(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
    return std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

bool after_burn_in(const TraceRecord& r, std::size_t burn_in) { return r.iteration > burn_in; }

}  // namespace

// ------------------------------------------------------------- statistics

std::vector<double> rejection_rate_series(const Traces& traces, std::size_t window) {
    if (window == 0) throw std::invalid_argument("rejection_rate_series: window must be >= 1");
    if (traces.empty() || traces.front().empty()) throw std::invalid_argument("rejection_rate_series: empty traces");
    const std::size_t length = traces.front().size();
    for (const auto& t : traces) {
        if (t.size() != length) throw std::invalid_argument("rejection_rate_series: unequal trace lengths");
    }
    std::vector<double> series;
    for (std::size_t begin = 0; begin < length; begin += window) {
        const std::size_t end = std::min(begin + window, length);
        double sum = 0.0;
        for (const auto& t : traces) {
            for (std::size_t i = begin; i < end; ++i) sum += static_cast<double>(t[i].rejections);
        }
        series.push_back(sum / static_cast<double>((end - begin) * traces.size()));
    }
    return series;
}

double accuracy(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) throw std::invalid_argument("accuracy: empty test set");
    if (x.cols() != beta_hat.size() || x.rows() != y.size()) throw std::invalid_argument("accuracy: dimension mismatch");
    const Eigen::VectorXd eta = x * beta_hat;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double predicted = logistic(eta[i]) > 0.5 ? 1.0 : 0.0;
        if (predicted == y[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(x.rows());
}

double accuracy(const Eigen::VectorXd& beta_hat, const Dataset& data) {
    return accuracy(beta_hat, data.test_x, data.test_y);
}

std::vector<double> mode_coverage(const Traces& traces, const ModeSpec& modes, std::size_t burn_in) {
    if (!(modes.radius > 0.0)) throw std::invalid_argument("mode_coverage: radius must be positive");
    std::vector<double> hits(modes.centers.size(), 0.0);
    std::size_t total = 0;
    for (const auto& t : traces) {
        for (const auto& r : t) {
            if (!after_burn_in(r, burn_in)) continue;
            ++total;
            for (std::size_t m = 0; m < modes.centers.size(); ++m) {
                if ((r.point - modes.centers[m]).norm() <= modes.radius) hits[m] += 1.0;
            }
        }
    }
    if (total > 0) {
        for (double& h : hits) h /= static_cast<double>(total);
    }
    return hits;
}

Eigen::VectorXd posterior_mean(const Traces& traces, std::size_t burn_in, std::size_t thinning) {
    if (thinning == 0) throw std::invalid_argument("posterior_mean: thinning must be >= 1");
    Eigen::VectorXd sum;
    std::size_t count = 0;
    for (const auto& t : traces) {
        std::size_t kept = 0;
        for (const auto& r : t) {
            if (!after_burn_in(r, burn_in)) continue;
            if (kept++ % thinning != 0) continue;
            if (count == 0) sum = Eigen::VectorXd::Zero(r.point.size());
            sum += r.point;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("posterior_mean: no samples after burn-in");
    return sum / static_cast<double>(count);
}

// --------------------------------------------------------------------- CSV

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

double parse_double(std::string_view s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
    }
    return v;
}

void write_trace_csv(const Traces& traces, const std::filesystem::path& path) {
    auto out = open_out(path);
    Eigen::Index dim = 0;
    for (const auto& t : traces) {
        if (!t.empty()) {
            dim = t.front().point.size();
            break;
        }
    }
    out << "chain,iteration,region,rejections";
    for (Eigen::Index d = 0; d < dim; ++d) out << ",x" << d;
    out << '\n';
    for (const auto& t : traces) {
        for (const auto& r : t) {
            out << r.chain << ',' << r.iteration << ',' << r.region << ',' << r.rejections;
            for (double v : r.point) out << ',' << format_double(v);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("error writing " + path.string());
}

Traces read_trace_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!next_line(in, line)) throw parse_error(path, 1, "missing header");
    const auto header = split_fields(line);
    if (header.size() < 4 || header[0] != "chain" || header[1] != "iteration" || header[2] != "region" ||
        header[3] != "rejections") {
        throw parse_error(path, 1, "unexpected header '" + line + "'");
    }
    const std::size_t dim = header.size() - 4;
    std::map<std::size_t, std::vector<TraceRecord>> by_chain;
    std::size_t line_no = 1;
    while (next_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw parse_error(path, line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                                 std::to_string(fields.size()));
        }
        try {
            TraceRecord r;
            r.chain = parse_index(fields[0]);
            r.iteration = parse_index(fields[1]);
            r.region = parse_index(fields[2]);
            r.rejections = parse_index(fields[3]);
            r.point.resize(static_cast<Eigen::Index>(dim));
            for (std::size_t d = 0; d < dim; ++d) r.point[static_cast<Eigen::Index>(d)] = parse_double(fields[4 + d]);
            auto& chain = by_chain[r.chain];
            if (!chain.empty() && chain.back().iteration >= r.iteration) {
                throw std::invalid_argument("iteration not increasing within chain " + std::to_string(r.chain));
            }
            chain.push_back(std::move(r));
        } catch (const std::invalid_argument& e) {
            throw parse_error(path, line_no, e.what());
        }
    }
    Traces traces;
    for (auto& [chain, records] : by_chain) {
        if (chain != traces.size()) throw parse_error(path, line_no, "chain indices are not contiguous from 0");
        traces.push_back(std::move(records));
    }
    return traces;
}

void write_mixtures_csv(const std::vector<MixtureSnapshot>& history, const std::filesystem::path& path) {
    auto out = open_out(path);
    const Eigen::Index dim = history.empty() ? 0 : history.front().mixture.dim();
    out << "iteration,component,weight";
    for (Eigen::Index d = 0; d < dim; ++d) out << ",mean" << d;
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) out << ",cov" << i << '_' << j;
    }
    out << ",dof\n";
    for (const auto& snap : history) {
        const auto& mix = snap.mixture;
        if (mix.dim() != dim) throw std::invalid_argument("write_mixtures_csv: inconsistent dimensions");
        for (std::size_t m = 0; m < mix.size(); ++m) {
            out << snap.iteration << ',' << m << ',' << format_double(mix.weights()[m]);
            for (double v : mix.mean(m)) out << ',' << format_double(v);
            const Eigen::MatrixXd& c = mix.cov(m);
            for (Eigen::Index i = 0; i < dim; ++i) {
                for (Eigen::Index j = 0; j < dim; ++j) out << ',' << format_double(c(i, j));
            }
            out << ',';
            if (mix.kind() == ComponentKind::student_t) out << format_double(mix.dof(m));
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("error writing " + path.string());
}

std::vector<MixtureSnapshot> read_mixtures_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!next_line(in, line)) throw parse_error(path, 1, "missing header");
    const auto header = split_fields(line);
    if (header.size() < 4 || header[0] != "iteration" || header[1] != "component" || header[2] != "weight" ||
        header.back() != "dof") {
        throw parse_error(path, 1, "unexpected header '" + line + "'");
    }
    // 3 + D + D*D + 1 columns.
    const std::size_t rest = header.size() - 4;
    std::size_t dim = 0;
    while (dim + dim * dim < rest) ++dim;
    if (dim + dim * dim != rest) throw parse_error(path, 1, "column count does not match any dimension");
    const auto D = static_cast<Eigen::Index>(dim);

    struct Row {
        std::size_t component;
        double weight;
        Eigen::VectorXd mean;
        Eigen::MatrixXd cov;
        std::optional<double> dof;
        std::size_t line_no;
    };
    std::vector<std::pair<std::size_t, std::vector<Row>>> groups;
    std::size_t line_no = 1;
    while (next_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != header.size()) {
            throw parse_error(path, line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                                 std::to_string(f.size()));
        }
        try {
            Row row;
            const std::size_t it = parse_index(f[0]);
            row.component = parse_index(f[1]);
            row.weight = parse_double(f[2]);
            row.mean.resize(D);
            row.cov.resize(D, D);
            for (Eigen::Index d = 0; d < D; ++d) row.mean[d] = parse_double(f[3 + static_cast<std::size_t>(d)]);
            for (Eigen::Index i = 0; i < D; ++i) {
                for (Eigen::Index j = 0; j < D; ++j) {
                    row.cov(i, j) = parse_double(f[3 + dim + static_cast<std::size_t>(i * D + j)]);
                }
            }
            if (!f.back().empty()) row.dof = parse_double(f.back());
            row.line_no = line_no;
            if (groups.empty() || groups.back().first != it) groups.emplace_back(it, std::vector<Row>{});
            if (row.component != groups.back().second.size()) {
                throw std::invalid_argument("components must be listed in order from 0");
            }
            groups.back().second.push_back(std::move(row));
        } catch (const std::invalid_argument& e) {
            throw parse_error(path, line_no, e.what());
        }
    }

    std::vector<MixtureSnapshot> history;
    for (auto& [it, rows] : groups) {
        const std::size_t first_line = rows.front().line_no;
        try {
            std::vector<double> weights;
            for (const auto& r : rows) weights.push_back(r.weight);
            const bool student = rows.front().dof.has_value();
            for (const auto& r : rows) {
                if (r.dof.has_value() != student) throw std::invalid_argument("mixed component kinds");
            }
            if (student) {
                std::vector<StudentT> comps;
                for (auto& r : rows) comps.emplace_back(r.mean, r.cov, *r.dof);
                history.push_back({it, MixtureModel(std::move(weights), std::move(comps))});
            } else {
                std::vector<Gaussian> comps;
                for (auto& r : rows) comps.emplace_back(r.mean, r.cov);
                history.push_back({it, MixtureModel(std::move(weights), std::move(comps))});
            }
        } catch (const std::exception& e) {
            throw parse_error(path, first_line, "iteration " + std::to_string(it) + ": " + e.what());
        }
    }
    return history;
}

void write_trace_csv(const Traces& traces, const std::vector<MixtureSnapshot>& history,
                     const std::filesystem::path& path, const std::filesystem::path& mixtures_path) {
    write_trace_csv(traces, path);
    write_mixtures_csv(history, mixtures_path);
}

}  // namespace rgess
