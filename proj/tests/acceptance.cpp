// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <unistd.h>

#include "funloc/cli_io.hpp"
#include "funloc/diagnostics.hpp"
#include "funloc/experiments.hpp"
#include "oracles.hpp"

using namespace funloc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

GaussianCovariateModel gaussian(std::vector<double> lambda, std::vector<double> mean) {
    GaussianCovariateModel m;
    m.eigenvalues = std::move(lambda);
    m.mean = FunctionVec(std::move(mean));
    return m;
}

EstimatorConfig estimator(int J, int K, double delta) {
    EstimatorConfig c;
    c.J = J;
    c.K = K;
    c.delta = delta;
    return c;
}

std::string fmt(const char* f, double a) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

/// Largest solver residual seen across criteria 1 and 2, relative to ||Yv||.
double g_worst_residual_ratio = 0.0;

void note_residual(const LocalDesign& design) {
    const auto r = solve(design);
    const double scale = design.Yv.norm();
    const double ratio = scale > 0 ? r.solver_report.residual / scale : (r.solver_report.residual > 0 ? INFINITY : 0);
    g_worst_residual_ratio = std::max(g_worst_residual_ratio, ratio);
}

// 100 random configurations, J <= 4, K <= 4, n <= 200, ExpLinear and PolyCoord targets, sigma in {0, 0.5}.
Outcome decomposition_identity() {
    std::mt19937_64 rng(20240101);
    std::uniform_int_distribution<int> jk(1, 4);
    std::uniform_int_distribution<int> nd(20, 200);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    std::size_t with_local = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int J = jk(rng), K = jk(rng);
        const std::size_t n = static_cast<std::size_t>(nd(rng));
        const double sigma = trial % 2 ? 0.5 : 0.0;
        const double delta = 0.5 + 0.4 * (u(rng) + 1.0) / 2.0;
        const auto model = gaussian(exponential_eigenvalues(0.4, 0.6, 1.0 + (u(rng) + 1.0) / 2.0),
                                    {0.05 * u(rng), 0.05 * u(rng)});
        const FunctionVec x({0.05 * u(rng), 0.05 * u(rng), 0.02 * u(rng)});
        RegressionTarget target = RegressionTarget::exp_linear(FunctionVec({0.0}));
        if (trial % 4 < 2) {
            target = RegressionTarget::exp_linear(FunctionVec({u(rng), u(rng), 0.5 * u(rng), 0.5 * u(rng), 0.3 * u(rng)}));
        } else {
            std::vector<RegressionTarget::PolyTerm> terms;
            for (int t = 0; t < 5; ++t) {
                MultiIndex e(5);
                for (auto& v : e) v = static_cast<int>((u(rng) + 1.0) * 1.6);
                terms.push_back({e, u(rng)});
            }
            target = RegressionTarget::poly_coord(std::move(terms));
        }
        Rng cr = make_rng(trial, {static_cast<std::uint64_t>(Stream::Covariates)});
        Rng nr = make_rng(trial, {static_cast<std::uint64_t>(Stream::Noise)});
        Dataset data;
        data.covariates = sample_covariates(model, n, cr);
        const auto resp = respond(target, NoiseModel{sigma, NoiseModel::Law::Gaussian}, data.covariates, nr);
        data.responses = resp.y;
        auto cfg = estimator(J, K, delta);
        cfg.retain_rows = true;
        const auto design = assemble(data, x, cfg);
        note_residual(design);
        const auto rep = decompose_error(design, data, x, cfg, target, resp.eps);
        if (rep.n_local > 0) ++with_local;
        const double err = rep.g_hat - target.value(x);
        const double lhs = std::abs(err - (rep.B1 + rep.B2 + rep.B3 + rep.V));
        worst = std::max(worst, lhs / (1.0 + std::abs(err)));
    }
    Outcome o;
    o.pass = worst <= 1e-8 && with_local >= 90;
    o.detail = "max |err - (B1+B2+B3+V)|/(1+|err|) = " + fmt("%.3e", worst) + ", configs with local data " +
               std::to_string(with_local) + "/100";
    return o;
}

Outcome solver_contract() {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> jk(1, 3), nd(10, 100);

    // Locally constant closed form.
    double worst_closed = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Dataset d;
        const std::size_t n = static_cast<std::size_t>(nd(rng));
        for (std::size_t j = 0; j < n; ++j) {
            d.covariates.push_back(FunctionVec({0.5 * u(rng), 0.5 * u(rng), 0.3 * u(rng)}));
            d.responses.push_back(2.0 * u(rng));
        }
        const FunctionVec x({0.1 * u(rng), 0.1 * u(rng)});
        const auto cfg = estimator(jk(rng), 1, 0.6);
        const auto mask = neighborhood_mask(d.covariates, x, cfg.delta);
        double sum = 0.0;
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (mask[j]) {
                sum += d.responses[j];
                m += 1.0;
            }
        const auto design = assemble(d, x, cfg);
        note_residual(design);
        worst_closed = std::max(worst_closed, std::abs(solve(design).g_hat - sum / (m + 1.0)));
    }

    // Independent long-double normal equations.
    double worst_oracle = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int J = jk(rng), K = jk(rng);
        const std::size_t n = static_cast<std::size_t>(nd(rng));
        Dataset d;
        const FunctionVec x({0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng)});
        for (std::size_t j = 0; j < n; ++j) {
            d.covariates.push_back(FunctionVec({x.coeff(1) + 0.5 * u(rng), x.coeff(2) + 0.5 * u(rng),
                                                x.coeff(3) + 0.5 * u(rng), 0.2 * u(rng)}));
            d.responses.push_back(std::exp(d.covariates.back().coeff(1)) + 0.3 * u(rng));
        }
        const auto cfg = estimator(J, K, 0.7);
        const auto design = assemble(d, x, cfg);
        note_residual(design);
        const auto ref = oracle::local_fit(d, x, J, K, 0.7);
        worst_oracle = std::max(worst_oracle, std::abs(solve(design).g_hat - static_cast<double>(ref.alpha[0])));
    }

    Outcome o;
    o.pass = g_worst_residual_ratio <= 1e-10 && worst_closed <= 1e-12 && worst_oracle <= 1e-8;
    o.detail = "max residual/||Y|| = " + fmt("%.3e", g_worst_residual_ratio) + ", K=1 closed form " +
               fmt("%.3e", worst_closed) + ", oracle " + fmt("%.3e", worst_oracle);
    return o;
}

Outcome remainder_audits() {
    // Eigenvalues decay slowly enough that X - x has real mass beyond the first four coordinates.
    const auto model = gaussian(exponential_eigenvalues(0.3, 0.5, 1.0), {0.0});
    const FunctionVec x({0.05, -0.05, 0.02});
    const auto target = RegressionTarget::exp_linear(FunctionVec({0.5, 0.4, -0.3, 0.3, 0.2, -0.2, 0.15, 0.1}));
    const double delta = 0.5;
    const std::size_t draws = 10000;

    Rng rng = make_rng(4242, {static_cast<std::uint64_t>(Stream::Covariates)});
    std::vector<FunctionVec> accepted;
    std::size_t tries = 0;
    while (accepted.size() < draws) {
        for (auto& X : sample_covariates(model, 4096, rng)) {
            ++tries;
            if (accepted.size() < draws && distance_sq(X, x) <= delta * delta) accepted.push_back(std::move(X));
        }
    }
    std::size_t rd_violations = 0, rs_violations = 0, checks = 0;
    double max_rd_ratio = 0.0, max_rs_ratio = 0.0;
    for (int J : {2, 4})
        for (int K : {2, 4}) {
            const double rs_bound = remainder_RS_bound(target, x, K, delta);
            for (const auto& X : accepted) {
                const double rd = std::abs(remainder_RD(target, x, X, J, K));
                const double rdb = remainder_RD_bound(target, x, X, J, K, delta);
                const double rs = std::abs(remainder_RS(target, x, X, K));
                if (rd > rdb + 1e-10) ++rd_violations;
                if (rs > rs_bound + 1e-10) ++rs_violations;
                if (rdb > 0) max_rd_ratio = std::max(max_rd_ratio, rd / rdb);
                max_rs_ratio = std::max(max_rs_ratio, rs / rs_bound);
                ++checks;
            }
        }
    Outcome o;
    o.pass = rd_violations == 0 && rs_violations == 0;
    o.detail = std::to_string(draws) + " conditioned draws (acceptance " +
               fmt("%.3f", static_cast<double>(draws) / static_cast<double>(tries)) + ") x 4 (J,K): R_D violations " +
               std::to_string(rd_violations) + ", R_S violations " + std::to_string(rs_violations) +
               ", max |R_D|/bound " + fmt("%.3f", max_rd_ratio) + ", max |R_S|/bound " + fmt("%.3f", max_rs_ratio);
    return o;
}

Outcome moment_checks() {
    Outcome o;
    // (a) conditional second moments, off-centre mean so z != 0
    const auto shifted = gaussian(exponential_eigenvalues(1.0, 1.0, 1.0, 10), {0.15, -0.1, 0.05});
    const auto g = gamma_diagonal_monte_carlo(shifted, FunctionVec({0.0}), 0.6, 100000, 8, 2, 99);
    bool a = g.tail_pass;
    double worst_z = -INFINITY;
    for (const auto& e : g.entries) {
        a = a && e.pass;
        if (e.std_error > 0) worst_z = std::max(worst_z, (e.estimate - e.bound) / e.std_error);
    }

    // (b) u0 bound with c1 = 1 + 2 c2*, c2 = 1
    const auto model = gaussian(exponential_eigenvalues(1.0, 1.0, 2.0), {0.1});
    const FunctionVec x({0.0});
    bool b = true;
    std::string bdetail;
    for (auto [J, K] : {std::pair{2, 1}, std::pair{2, 2}, std::pair{3, 2}}) {
        const auto r = u0_monte_carlo(model, x, estimator(J, K, 0.6), 1000 + J * 10 + K);
        b = b && r.pass && r.c2 == 1.0 && r.c1 == 1.0 + 2.0 * r.c2_star;
        bdetail += " (" + std::to_string(J) + "," + std::to_string(K) + "): " + fmt("%.4g", r.u0_hat) + " <= " +
                   fmt("%.4g", r.u0_bound) + ";";
    }

    // (c) variance proxy on 200-replication averages
    bool c = true;
    std::string cdetail;
    for (auto [J, K] : {std::pair{2, 2}, std::pair{3, 2}}) {
        const auto cfg = estimator(J, K, 0.6);
        const auto u0 = u0_monte_carlo(model, x, cfg, 2000 + J);
        const auto v = variance_proxy_study(model, x, cfg, 500, 200, u0.u0_hat, 3000 + J);
        c = c && v.pass && v.replications == 200;
        cdetail += " (" + std::to_string(J) + "," + std::to_string(K) + "): " + fmt("%.4g", v.mean) + " <= " +
                   fmt("%.4g", v.bound) + ";";
    }
    o.pass = a && b && c;
    o.detail = std::string("(a) ") + (a ? "ok" : "FAIL") + ", worst (est-bound)/se " + fmt("%.2f", worst_z) +
               "; (b) " + (b ? "ok" : "FAIL") + bdetail + " (c) " + (c ? "ok" : "FAIL") + cdetail;
    return o;
}

Outcome tuning_and_conditions() {
    TuningRule r;
    r.D0 = 0.09;
    r.D1 = 0.95;
    r.gamma = 12.0;
    r.c1 = 1.0;
    const auto t = tune(8000, r);
    const auto c = check_conditions(r);
    const bool arithmetic = t.J == 2 && t.K == 3 && c.kappa_target == 0.0595 && c.all_hold();

    std::vector<std::pair<double, double>> pts;
    for (double n : {250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0}) pts.emplace_back(n, std::pow(n, -0.5));
    const double direct = fit_rate(pts).kappa;

    ExperimentConfig cfg;
    cfg.model.eigen = {"exp", 1.0, 1.0, 2.0, 2.0};
    cfg.target.theta_coeffs = {0.64, 0.48};
    cfg.delta = 0.6;
    cfg.n_grid = {250, 500, 1000, 2000, 4000, 8000};
    cfg.replications = 5;
    cfg.fixed_arms.clear();
    const double gx = cfg.build_target().value(cfg.site());
    RateStudyOptions opt;
    opt.estimator = [gx](const Dataset& d, const FunctionVec&, const EstimatorConfig&) {
        EstimateResult e;
        e.g_hat = gx + std::pow(static_cast<double>(d.size()), -0.25);
        e.n_local = d.size();
        return e;
    };
    const double planted = run_rate_study(cfg, opt).kappa_hat;

    Outcome o;
    o.pass = arithmetic && std::abs(direct - 0.5) <= 0.01 && std::abs(planted - 0.5) <= 0.01;
    o.detail = "J=" + std::to_string(t.J) + " K=" + std::to_string(t.K) + " kappa_target=" +
               format_double(c.kappa_target) + ", planted kappa " + fmt("%.6f", planted) + " (direct fit " +
               fmt("%.6f", direct) + ")";
    return o;
}

RateStudyResult g_study;

Outcome rate_study() {
    const auto loaded = load_config(fs::path(FUNLOC_CONFIG_DIR) / "rate_study.json");
    const auto& c = loaded.config;
    Outcome o;
    const bool setup = c.delta == 0.6 && c.replications == 300 && c.noise.sigma == 0.25 &&
                       c.n_grid == std::vector<std::size_t>{250, 500, 1000, 2000, 4000, 8000} &&
                       c.fixed_arms == std::vector<std::pair<int, int>>{{3, 3}} &&
                       std::abs(std::sqrt(norm_sq(FunctionVec(c.target.theta_coeffs))) - 0.8) < 1e-12;
    RateStudyOptions opt;
    opt.threads = 1;
    g_study = run_rate_study(c, opt);
    const auto& arm = g_study.arm("fixed_J3_K3");
    bool decreasing = true;
    std::string medians;
    for (std::size_t i = 0; i < arm.per_n.size(); ++i) {
        if (i > 0 && !(arm.per_n[i].median_sq_err < arm.per_n[i - 1].median_sq_err)) decreasing = false;
        medians += (i ? " " : "") + fmt("%.3e", arm.per_n[i].median_sq_err);
    }
    o.pass = setup && decreasing && arm.kappa_hat >= 0.15 && arm.kappa_hat >= g_study.baseline_kappa_hat - 0.05;
    o.detail = "medians [" + medians + "], kappa_hat " + fmt("%.4f", arm.kappa_hat) + ", baseline " +
               fmt("%.4f", g_study.baseline_kappa_hat) + (setup ? "" : ", config mismatch");
    return o;
}

Outcome reproducibility() {
    const auto loaded = load_config(fs::path(FUNLOC_CONFIG_DIR) / "rate_study.json");
    RateStudyOptions opt;
    opt.threads = 8;
    const auto eight = run_rate_study(loaded.config, opt);
    const fs::path base = fs::temp_directory_path() / ("funloc_acceptance_" + std::to_string(::getpid()));
    write_results(g_study, base / "t1");
    write_results(eight, base / "t8");
    bool same = true;
    for (const char* f : {"results.csv", "summary.json"})
        same = same && read_text_file(base / "t1" / f) == read_text_file(base / "t8" / f);
    fs::remove_all(base);
    Outcome o;
    o.pass = same;
    o.detail = same ? "results.csv and summary.json byte-identical for 1 and 8 threads" : "outputs differ";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "decomposition identity", 60.0, decomposition_identity},
        {2, "solver contract", 60.0, solver_contract},
        {3, "remainder bound audits", 120.0, remainder_audits},
        {4, "moment and bound checks", 300.0, moment_checks},
        {5, "tuning and conditions", 60.0, tuning_and_conditions},
        {6, "rate study", 600.0, rate_study},
        {7, "reproducibility across thread counts", 600.0, reproducibility},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("criterion %d [%s] %s (%.1fs of %.0fs): %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                    c.budget_s, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
