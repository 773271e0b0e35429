#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "funloc/cli_io.hpp"
#include "funloc/errors.hpp"

namespace funloc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        cells.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno != ERANGE;
}

double require_number(const std::string& s, const std::string& where) {
    double v;
    if (!parse_number(s, v)) throw ConfigError(where + ": not a number: '" + s + "'");
    return v;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

/// Curves from rows of cells, either coefficient columns (coeff*, optional tail_norm_sq) or grid values.
FunctionVec curve_from_cells(const std::vector<std::string>& header, const std::vector<std::string>& cells,
                             std::size_t first, bool coefficient_form, const Basis& basis, int grid_L,
                             const std::string& where) {
    if (coefficient_form) {
        std::vector<double> c;
        double tail = 0.0;
        for (std::size_t i = first; i < cells.size(); ++i) {
            const double v = require_number(cells[i], where);
            if (header[i] == "tail_norm_sq")
                tail = v;
            else
                c.push_back(v);
        }
        return FunctionVec(std::move(c), tail);
    }
    std::vector<double> samples;
    for (std::size_t i = first; i < cells.size(); ++i) samples.push_back(require_number(cells[i], where));
    const int L = grid_L > 0 ? grid_L : std::max(1, static_cast<int>(samples.size() / 4));
    return analyze_grid(samples, basis, L);
}

bool is_coefficient_header(const std::vector<std::string>& header, std::size_t first) {
    if (header.size() <= first) return false;
    for (std::size_t i = first; i < header.size(); ++i)
        if (!starts_with(header[i], "coeff") && header[i] != "tail_norm_sq") return false;
    return true;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
    out << content;
    out.flush();
    if (!out) throw IoError("cannot write " + path.string() + ": " + std::strerror(errno));
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json manifest_to_json(const RunManifest& m) {
    return json{{"tool_version", m.tool_version},
                {"config_digest", m.config_digest},
                {"seed", m.seed},
                {"timestamp", m.timestamp},
                {"files", m.files}};
}

void write_manifest(const RunManifest& manifest, const fs::path& out_dir) {
    write_text_file(out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

std::string results_csv(const RateStudyResult& result) {
    std::string out = "n,J,K,median_sq_err,mean_sq_err,q10,q90,mean_n_local,smallball_hat,arm\n";
    for (const auto& arm : result.arms)
        for (const auto& p : arm.per_n) {
            out += std::to_string(p.n) + "," + std::to_string(p.J) + "," + std::to_string(p.K) + "," +
                   format_double(p.median_sq_err) + "," + format_double(p.mean_sq_err) + "," + format_double(p.q10) +
                   "," + format_double(p.q90) + "," + format_double(p.mean_n_local) + "," +
                   format_double(p.smallball_hat) + "," + p.arm + "\n";
        }
    return out;
}

std::string plotdata_csv(const RateStudyResult& result) {
    std::string out = "arm,log_n,log_median_sq_err\n";
    for (const auto& arm : result.arms)
        for (const auto& p : arm.per_n)
            out += arm.name + "," + format_double(std::log(static_cast<double>(p.n))) + "," +
                   format_double(std::log(p.median_sq_err)) + "\n";
    return out;
}

json conditions_to_json(const ConditionCheck& c) {
    return json{{"gamma", c.gamma},
                {"D0", c.D0},
                {"D1", c.D1},
                {"c1", c.c1},
                {"cond1", c.cond1},
                {"cond1_value", c.cond1_value},
                {"cond2_lhs", c.cond2_lhs},
                {"cond2_printed", c.cond2_printed},
                {"cond2_printed_value", c.cond2_printed_value},
                {"cond2_derived", c.cond2_derived},
                {"cond2_derived_value", c.cond2_derived_value},
                {"cond3", c.cond3},
                {"cond3_value", c.cond3_value},
                {"kappa_target", c.kappa_target}};
}

json summary_json(const RateStudyResult& result) {
    json arms = json::object();
    json trace = json::array();
    for (const auto& arm : result.arms) {
        arms[arm.name] = arm.kappa_hat;
        if (arm.name == "tuned")
            for (const auto& p : arm.per_n) trace.push_back({{"n", p.n}, {"J", p.J}, {"K", p.K}, {"delta", p.delta}});
    }
    json empties = json::object();
    if (!result.arms.empty())
        for (const auto& p : result.arms.front().per_n) empties[std::to_string(p.n)] = p.empty_neighborhoods;
    return json{{"kappa_hat", result.kappa_hat},
                {"baseline_kappa_hat", result.baseline_kappa_hat},
                {"arm_kappa_hat", arms},
                {"tuning_trace", trace},
                {"empty_neighborhoods", empties},
                {"conditions", conditions_to_json(result.conditions)},
                {"small_ball_condition",
                 {{"sup_ratio", result.small_ball.sup_ratio},
                  {"c2_star", result.small_ball.c2_star_used},
                  {"c1", result.small_ball.c1},
                  {"holds", result.small_ball.holds}}},
                {"advisories", result.advisories},
                {"seed", result.seed},
                {"config_digest", result.config_digest}};
}

RunManifest write_results(const RateStudyResult& result, const fs::path& out_dir) {
    if (result.arms.empty()) throw ConfigError("write_results: result has no arms");
    for (const auto& arm : result.arms)
        if (arm.per_n.empty()) throw ConfigError("write_results: arm '" + arm.name + "' has no rows");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    write_text_file(out_dir / "results.csv", results_csv(result));
    write_text_file(out_dir / "summary.json", summary_json(result).dump(2) + "\n");
    write_text_file(out_dir / "plotdata.csv", plotdata_csv(result));

    RunManifest m{kToolVersion, result.config_digest, result.seed, utc_timestamp(),
                  {"results.csv", "summary.json", "plotdata.csv"}};
    write_manifest(m, out_dir);
    return m;
}

std::vector<RatePoint> read_results_csv(const fs::path& path) {
    const auto rows = read_csv_rows(path);
    if (rows.empty()) throw ConfigError(path.string() + ": empty results file");
    const std::vector<std::string> expected{"n", "J", "K", "median_sq_err", "mean_sq_err", "q10", "q90",
                                            "mean_n_local", "smallball_hat", "arm"};
    if (rows.front() != expected) throw ConfigError(path.string() + ": unexpected header");
    std::vector<RatePoint> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& c = rows[r];
        const std::string where = path.string() + ":" + std::to_string(r + 1);
        if (c.size() != expected.size()) throw ConfigError(where + ": wrong column count");
        RatePoint p;
        p.n = static_cast<std::size_t>(require_number(c[0], where));
        p.J = static_cast<int>(require_number(c[1], where));
        p.K = static_cast<int>(require_number(c[2], where));
        p.median_sq_err = require_number(c[3], where);
        p.mean_sq_err = require_number(c[4], where);
        p.q10 = require_number(c[5], where);
        p.q90 = require_number(c[6], where);
        p.mean_n_local = require_number(c[7], where);
        p.smallball_hat = require_number(c[8], where);
        p.arm = c[9];
        out.push_back(p);
    }
    return out;
}

json decomposition_to_json(const DecompositionReport& r) {
    return json{{"B1", r.B1},
                {"B2", r.B2},
                {"B3", r.B3},
                {"V", r.V},
                {"g_hat", r.g_hat},
                {"g_true", r.g_true},
                {"identity_residual", r.identity_residual},
                {"remainder_bound_violations", r.remainder_bound_violations},
                {"inputs_trace", {{"J", r.J}, {"K", r.K}, {"delta", r.delta}, {"n_local", r.n_local}}}};
}

json bounds_to_json(const BoundsReport& r) {
    return json{{"u0_hat", r.u0_hat},
                {"u0_bound", r.u0_bound},
                {"u0_pass", r.u0_pass},
                {"variance_proxy", r.variance_proxy},
                {"variance_proxy_bound", r.variance_proxy_bound},
                {"b2cond_value", r.b2cond_value},
                {"smallball_hat", r.smallball_hat}};
}

json estimate_to_json(const EstimateResult& r) {
    std::vector<double> alpha(r.alpha.data(), r.alpha.data() + r.alpha.size());
    return json{{"g_hat", r.g_hat},
                {"n_local", r.n_local},
                {"alpha", alpha},
                {"first_derivative", r.first_derivative},
                {"solver_report",
                 {{"method", r.solver_report.method},
                  {"condition_proxy", r.solver_report.condition_proxy},
                  {"residual", r.solver_report.residual}}}};
}

json gamma_to_json(const GammaDiagonalReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back(
            {{"j", e.j}, {"estimate", e.estimate}, {"std_error", e.std_error}, {"bound", e.bound}, {"pass", e.pass}});
    return json{{"entries", entries},
                {"drawn", r.drawn},
                {"accepted", r.accepted},
                {"tail_from", r.tail_from},
                {"tail_estimate", r.tail_estimate},
                {"tail_std_error", r.tail_std_error},
                {"tail_bound", r.tail_bound},
                {"tail_pass", r.tail_pass}};
}

json diagnose_to_json(const DiagnoseResult& r) {
    json out = decomposition_to_json(r.decomposition);
    const json bounds = bounds_to_json(r.bounds);
    for (const auto& [k, v] : bounds.items()) out[k] = v;
    out["gamma_diagonal"] = gamma_to_json(r.gamma);
    return out;
}

void write_dataset_csv(const fs::path& path, const Dataset& data) {
    std::size_t L = 1;
    bool tails = false;
    for (const auto& X : data.covariates) {
        L = std::max(L, X.size());
        tails |= X.tail_norm_sq() > 0.0;
    }
    std::string out = "y";
    for (std::size_t l = 1; l <= L; ++l) out += ",coeff" + std::to_string(l);
    if (tails) out += ",tail_norm_sq";
    out += "\n";
    for (std::size_t j = 0; j < data.size(); ++j) {
        out += format_double(data.responses[j]);
        for (std::size_t l = 1; l <= L; ++l) out += "," + format_double(data.covariates[j].coeff(static_cast<int>(l)));
        if (tails) out += "," + format_double(data.covariates[j].tail_norm_sq());
        out += "\n";
    }
    write_text_file(path, out);
}

void write_dataset_grid_csv(const fs::path& path, const Dataset& data, const Basis& basis, std::size_t grid_points) {
    std::string out = "y";
    for (std::size_t i = 0; i < grid_points; ++i) out += ",t" + std::to_string(i);
    out += "\n";
    for (std::size_t j = 0; j < data.size(); ++j) {
        out += format_double(data.responses[j]);
        for (double v : synthesize(data.covariates[j], basis, grid_points)) out += "," + format_double(v);
        out += "\n";
    }
    write_text_file(path, out);
}

Dataset read_dataset_csv(const fs::path& path, const Basis& basis, int grid_L) {
    const auto rows = read_csv_rows(path);
    if (rows.size() < 2) throw ConfigError(path.string() + ": dataset needs a header and at least one row");
    const auto& header = rows.front();
    if (header.empty() || header.front() != "y")
        throw ConfigError(path.string() + ": first header column must be 'y'");
    if (header.size() < 2) throw ConfigError(path.string() + ": no curve columns");
    const bool coeff = is_coefficient_header(header, 1);
    Dataset data;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string where = path.string() + ":" + std::to_string(r + 1);
        if (rows[r].size() != header.size()) throw ConfigError(where + ": wrong column count");
        data.responses.push_back(require_number(rows[r][0], where));
        data.covariates.push_back(curve_from_cells(header, rows[r], 1, coeff, basis, grid_L, where));
    }
    return data;
}

FunctionVec read_site(const std::string& spec, const Basis& basis, int grid_L) {
    std::error_code ec;
    if (fs::is_regular_file(spec, ec)) {
        const auto rows = read_csv_rows(spec);
        if (rows.empty()) throw ConfigError(spec + ": empty site file");
        double probe;
        const bool headerless = parse_number(rows.front().front(), probe);
        if (headerless) {
            std::vector<std::string> header(rows.front().size(), "t");
            return curve_from_cells(header, rows.front(), 0, false, basis, grid_L, spec + ":1");
        }
        if (rows.size() < 2) throw ConfigError(spec + ": site file has a header but no row");
        const auto& header = rows.front();
        if (rows[1].size() != header.size()) throw ConfigError(spec + ":2: wrong column count");
        return curve_from_cells(header, rows[1], 0, is_coefficient_header(header, 0), basis, grid_L, spec + ":2");
    }
    std::vector<double> c;
    for (const auto& cell : split_csv_line(spec)) c.push_back(require_number(cell, "--site"));
    if (c.empty()) throw ConfigError("--site: no coefficients given");
    return FunctionVec(std::move(c));
}

}  // namespace funloc
