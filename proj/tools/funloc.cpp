// funloc: local polynomial regression on functional covariates.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "funloc/cli_io.hpp"
#include "funloc/errors.hpp"
#include "funloc/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace funloc;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
};

unsigned resolve_threads(const Globals& g) {
    if (g.threads) return std::max(1u, *g.threads);
    if (const char* env = std::getenv("FUNLOC_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("FUNLOC_THREADS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    return 1;
}

fs::path prepare_out(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out + ": " + ec.message());
    return fs::path(out);
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Prints the report, and with --out also writes it next to a manifest.
void emit_report(const json& report, const std::string& file, const Globals& g, const std::string& digest,
                 std::uint64_t seed) {
    const std::string text = report.dump(2) + "\n";
    std::fputs(text.c_str(), stdout);
    if (g.out.empty()) return;
    const fs::path dir = prepare_out(g.out);
    write_text_file(dir / file, text);
    write_manifest({kToolVersion, digest, seed, utc_now(), {file}}, dir);
}

ExperimentConfig load_with_seed(const std::string& path, const Globals& g) {
    auto loaded = load_config(path);
    for (const auto& n : loaded.notices) std::fprintf(stderr, "notice: %s\n", n.c_str());
    if (g.seed) loaded.config.seed = *g.seed;
    return loaded.config;
}

int run(int argc, char** argv) {
    CLI::App app{"Local polynomial regression with functional covariates"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::uint64_t seed_value = 0;
    unsigned threads_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Master seed (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads_value, "Worker threads (default: FUNLOC_THREADS or 1)")
                            ->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory");

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate g at one site from a dataset CSV");
    std::string data_path, site_spec, basis_name = "trig";
    double delta = 0.5;
    int J = 2, K = 2, grid_L = 0;
    est->add_option("--data", data_path, "Dataset CSV (coefficient or grid layout)")->required();
    est->add_option("--site", site_spec, "Site: CSV file or comma-separated coefficients")->required();
    est->add_option("--delta", delta, "Neighbourhood radius in (0,1)")->required();
    est->add_option("--J", J, "Number of projected coordinates")->required();
    est->add_option("--K", K, "Polynomial order (degree < K)")->required();
    est->add_option("--basis", basis_name, "Basis for grid curves")->check(CLI::IsMember({"trig"}));
    est->add_option("--grid-L", grid_L, "Coefficients kept when projecting grid curves (0: N/4)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Draw a dataset CSV from a model config");
    std::string sim_config;
    std::size_t sim_n = 0, sim_grid = 0;
    sim->add_option("--config", sim_config, "Experiment config JSON")->required();
    sim->add_option("--n", sim_n, "Sample size (default: diagnose.n)");
    sim->add_option("--grid", sim_grid, "Write curves on an N-point grid instead of coefficients");

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "Error decomposition and bound checks on one simulated dataset");
    std::string diag_config;
    diag->add_option("--config", diag_config, "Experiment config JSON")->required();

    // rate-study
    auto* rate = app.add_subcommand("rate-study", "Monte Carlo convergence-rate study");
    std::string rate_config;
    rate->add_option("--config", rate_config, "Experiment config JSON")->required();

    // check-conditions
    auto* cond = app.add_subcommand("check-conditions", "Evaluate the rate conditions on (gamma, D0, D1, c1)");
    TuningRule rule;
    cond->add_option("--D0", rule.D0)->required();
    cond->add_option("--D1", rule.D1)->required();
    cond->add_option("--gamma", rule.gamma)->required();
    cond->add_option("--c1", rule.c1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    if (*seed_opt) g.seed = seed_value;
    if (*threads_opt) g.threads = threads_value;

    if (*est) {
        const Basis basis = Basis::trigonometric();
        const Dataset data = read_dataset_csv(data_path, basis, grid_L);
        const FunctionVec site = read_site(site_spec, basis, grid_L);
        EstimatorConfig cfg;
        cfg.J = J;
        cfg.K = K;
        cfg.delta = delta;
        cfg.basis = basis;
        const auto result = estimate_at(data, site, cfg);
        const json args{{"data", sha256_hex(read_text_file(data_path))},
                        {"site", site_spec},
                        {"delta", delta},
                        {"J", J},
                        {"K", K},
                        {"basis", basis_name},
                        {"grid_L", grid_L}};
        emit_report(estimate_to_json(result), "estimate.json", g, sha256_hex(args.dump()), g.seed.value_or(0));
        return kOk;
    }

    if (*cond) {
        const auto check = check_conditions(rule);
        const json args{{"D0", rule.D0}, {"D1", rule.D1}, {"gamma", rule.gamma}, {"c1", rule.c1}};
        emit_report(conditions_to_json(check), "conditions.json", g, sha256_hex(args.dump()), g.seed.value_or(0));
        return kOk;
    }

    if (*diag) {
        const auto config = load_with_seed(diag_config, g);
        emit_report(diagnose_to_json(run_diagnose(config)), "diagnose.json", g, config_digest(config), config.seed);
        return kOk;
    }

    if (*sim) {
        const auto config = load_with_seed(sim_config, g);
        const auto model = config.build_model();
        const auto target = config.build_target();
        const std::size_t n = sim_n ? sim_n : config.diagnose.n;
        Rng cov_rng = make_rng(config.seed, {0x5151, static_cast<std::uint64_t>(Stream::Covariates)});
        Rng noise_rng = make_rng(config.seed, {0x5151, static_cast<std::uint64_t>(Stream::Noise)});
        Dataset data;
        data.covariates = sample_covariates(model, n, cov_rng);
        data.responses = respond(target, config.noise, data.covariates, noise_rng).y;
        if (g.out.empty()) throw ConfigError("simulate needs --out");
        const fs::path dir = prepare_out(g.out);
        if (sim_grid)
            write_dataset_grid_csv(dir / "dataset.csv", data, model.basis, sim_grid);
        else
            write_dataset_csv(dir / "dataset.csv", data);
        write_manifest({kToolVersion, config_digest(config), config.seed, utc_now(), {"dataset.csv"}}, dir);
        std::printf("%s\n", (dir / "dataset.csv").string().c_str());
        return kOk;
    }

    if (*rate) {
        const auto config = load_with_seed(rate_config, g);
        if (g.out.empty()) throw ConfigError("rate-study needs --out");
        RateStudyOptions opts;
        opts.threads = resolve_threads(g);
        const auto result = run_rate_study(config, opts);
        write_results(result, g.out);
        for (const auto& a : result.advisories) std::fprintf(stderr, "advisory: %s\n", a.c_str());
        std::printf("kappa_hat %s baseline_kappa_hat %s\n", format_double(result.kappa_hat).c_str(),
                    format_double(result.baseline_kappa_hat).c_str());
        return kOk;
    }
    return kConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kNumerical;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kIo;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    }
}
