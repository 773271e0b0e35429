#include "funloc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "funloc/cli_io.hpp"
#include "funloc/errors.hpp"

namespace funloc {

Tuning tune(std::size_t n, const TuningRule& rule) {
    if (n < 10) throw ConfigError("tune: n must be >= 10, got " + std::to_string(n));
    const double ln = std::log(static_cast<double>(n));
    Tuning t;
    t.J = rule.J_override ? *rule.J_override
                          : std::max(2, static_cast<int>(std::ceil(std::pow(ln, rule.D0))));
    t.K = rule.K_override ? *rule.K_override
                          : std::max(1, static_cast<int>(std::floor(rule.D1 * ln / std::log(ln))));
    return t;
}

ConditionCheck check_conditions(const TuningRule& rule) {
    ConditionCheck c;
    c.gamma = rule.gamma;
    c.D0 = rule.D0;
    c.D1 = rule.D1;
    c.c1 = rule.c1;
    c.cond1_value = rule.gamma * rule.D0;
    c.cond2_lhs = (4.0 * rule.c1 + 1.0) * rule.D0;
    c.cond2_printed_value = 2.0 * rule.D1 * (c.cond2_lhs - 1.0);
    c.cond2_derived_value = 2.0 * rule.D1 * (1.0 - c.cond2_lhs);
    c.cond3_value = (8.0 * rule.c1 + 3.0) * rule.D0 * rule.D1;
    c.cond1 = c.cond1_value > 1.0;
    c.cond2_printed = c.cond2_lhs < 1.0 && c.cond2_printed_value > 1.0;
    c.cond2_derived = c.cond2_lhs < 1.0 && c.cond2_derived_value > 1.0;
    c.cond3 = c.cond3_value < 1.0;
    c.kappa_target = 1.0 - c.cond3_value;
    return c;
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
    RateFit fit;
    std::vector<double> lx, ly;
    for (const auto& [n, err] : points) {
        if (!(err > 0.0) || !std::isfinite(err) || !(n > 0.0)) {
            ++fit.excluded;
            continue;
        }
        lx.push_back(std::log(n));
        ly.push_back(std::log(err));
    }
    fit.used = lx.size();
    if (fit.used < 3)
        throw NumericalError("fit_rate: need at least 3 points with positive error, have " + std::to_string(fit.used));
    const double m = static_cast<double>(fit.used);
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / m;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw NumericalError("fit_rate: sample sizes must not all coincide");
    fit.kappa = -sxy / sxx;
    return fit;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

GaussianCovariateModel ExperimentConfig::build_model() const {
    GaussianCovariateModel m;
    m.mean = FunctionVec(model.mean_coeffs);
    if (model.eigen.kind == "exp")
        m.eigenvalues = exponential_eigenvalues(model.eigen.C_lambda, model.eigen.C_gamma1, model.eigen.gamma, model.L);
    else if (model.eigen.kind == "poly")
        m.eigenvalues = polynomial_eigenvalues(model.eigen.C_lambda, model.eigen.p, model.L);
    else
        throw ConfigError("model.eigen.kind must be \"exp\" or \"poly\"");
    m.validate();
    return m;
}

RegressionTarget ExperimentConfig::build_target() const {
    using Kind = RegressionTarget::Kind;
    switch (target.kind) {
    case Kind::ExpLinear: return RegressionTarget::exp_linear(FunctionVec(target.theta_coeffs));
    case Kind::CosLinear: return RegressionTarget::cos_linear(FunctionVec(target.theta_coeffs));
    case Kind::Quadratic: return RegressionTarget::quadratic(FunctionVec(target.theta_coeffs));
    case Kind::PolyCoord: return RegressionTarget::poly_coord(target.terms);
    }
    throw ConfigError("unknown target kind");
}

FunctionVec ExperimentConfig::site() const { return FunctionVec(site_coeffs); }

TuningRule ExperimentConfig::resolved_tuning() const {
    TuningRule rule = tuning;
    if (gamma_override)
        rule.gamma = *gamma_override;
    else
        rule.gamma = (model.eigen.kind == "exp") ? model.eigen.gamma : 0.0;
    if (!c1_configured) rule.c1 = check_small_ball_condition(build_model(), site(), delta).c1;
    return rule;
}

const ArmResult& RateStudyResult::arm(const std::string& name) const {
    for (const auto& a : arms)
        if (a.name == name) return a;
    throw ConfigError("rate study has no arm named " + name);
}

std::vector<std::string> arm_names(const ExperimentConfig& config) {
    std::vector<std::string> names{"tuned"};
    for (const auto& [J, K] : config.fixed_arms)
        names.push_back("fixed_J" + std::to_string(J) + "_K" + std::to_string(K));
    if (config.baseline) names.push_back("baseline");
    return names;
}

RateStudyResult run_rate_study(const ExperimentConfig& config, const RateStudyOptions& options) {
    if (config.n_grid.empty()) throw ConfigError("n_grid must not be empty");
    if (config.replications == 0) throw ConfigError("replications must be >= 1");
    if (!std::is_sorted(config.n_grid.begin(), config.n_grid.end()))
        throw ConfigError("n_grid must be sorted ascending");

    const auto model = config.build_model();
    const auto target = config.build_target();
    const FunctionVec x = config.site();
    const double g_x = target.value(x);
    const TuningRule rule = config.resolved_tuning();

    RateStudyResult result;
    result.seed = config.seed;
    result.config_digest = config_digest(config);
    result.conditions = check_conditions(rule);
    result.small_ball = check_small_ball_condition(model, x, config.delta);
    if (!result.small_ball.holds) result.advisories.push_back("small-ball condition on the covariate mean fails");

    // Per-arm (J, K) for every grid point.
    const auto names = arm_names(config);
    const std::size_t n_arms = names.size();
    const std::size_t n_grid = config.n_grid.size();
    std::vector<std::vector<Tuning>> arm_tuning(n_arms, std::vector<Tuning>(n_grid));
    for (std::size_t i = 0; i < n_grid; ++i) {
        const Tuning tuned = tune(config.n_grid[i], rule);
        std::size_t a = 0;
        arm_tuning[a++][i] = tuned;
        for (const auto& [J, K] : config.fixed_arms) arm_tuning[a++][i] = Tuning{J, K};
        if (config.baseline) arm_tuning[a][i] = Tuning{tuned.J, 1};
    }

    const std::size_t R = config.replications;
    const std::size_t tasks = n_grid * R;
    // sq_err[arm][grid][rep]
    std::vector<std::vector<std::vector<double>>> sq_err(n_arms, std::vector<std::vector<double>>(n_grid, std::vector<double>(R)));
    std::vector<std::vector<std::size_t>> n_local(n_grid, std::vector<std::size_t>(R));

    auto run_task = [&](std::size_t task) {
        const std::size_t i = task / R;
        const std::size_t r = task % R;
        const std::size_t n = config.n_grid[i];
        Rng cov_rng = make_rng(config.seed, {i, r, static_cast<std::uint64_t>(Stream::Covariates)});
        Rng noise_rng = make_rng(config.seed, {i, r, static_cast<std::uint64_t>(Stream::Noise)});
        Dataset data;
        data.covariates = sample_covariates(model, n, cov_rng);
        data.responses = respond(target, config.noise, data.covariates, noise_rng).y;
        for (std::size_t a = 0; a < n_arms; ++a) {
            EstimatorConfig cfg;
            cfg.J = arm_tuning[a][i].J;
            cfg.K = arm_tuning[a][i].K;
            cfg.delta = config.delta;
            cfg.basis = model.basis;
            const EstimateResult est = options.estimator ? options.estimator(data, x, cfg) : estimate_at(data, x, cfg);
            const double e = est.g_hat - g_x;
            sq_err[a][i][r] = e * e;
            if (a == 0) n_local[i][r] = est.n_local;
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(tasks)));
    if (workers == 1) {
        for (std::size_t t = 0; t < tasks; ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next.fetch_add(1); t < tasks; t = next.fetch_add(1)) {
                    try {
                        run_task(t);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next.store(tasks);
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    // Aggregation in index order.
    std::vector<double> smallball(n_grid), mean_local(n_grid);
    std::vector<std::size_t> empties(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        double sum = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            sum += static_cast<double>(n_local[i][r]);
            if (n_local[i][r] == 0) ++empties[i];
        }
        mean_local[i] = sum / static_cast<double>(R);
        smallball[i] = mean_local[i] / static_cast<double>(config.n_grid[i]);
        if (static_cast<double>(empties[i]) > 0.2 * static_cast<double>(R))
            throw ConfigError("rate study: " + std::to_string(empties[i]) + " of " + std::to_string(R) +
                              " replications at n = " + std::to_string(config.n_grid[i]) +
                              " had an empty neighbourhood; increase delta or n");
        if (smallball[i] < config.smallball_floor)
            result.advisories.push_back("small-ball probability " + std::to_string(smallball[i]) + " at n = " +
                                        std::to_string(config.n_grid[i]) + " is below the floor " +
                                        std::to_string(config.smallball_floor));
    }

    for (std::size_t a = 0; a < n_arms; ++a) {
        ArmResult arm;
        arm.name = names[a];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < n_grid; ++i) {
            std::vector<double> errs = sq_err[a][i];
            std::sort(errs.begin(), errs.end());
            RatePoint p;
            p.arm = arm.name;
            p.n = config.n_grid[i];
            p.J = arm_tuning[a][i].J;
            p.K = arm_tuning[a][i].K;
            p.delta = config.delta;
            p.median_sq_err = quantile_sorted(errs, 0.5);
            p.mean_sq_err = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(R);
            p.q10 = quantile_sorted(errs, 0.1);
            p.q90 = quantile_sorted(errs, 0.9);
            p.mean_n_local = mean_local[i];
            p.smallball_hat = smallball[i];
            p.empty_neighborhoods = empties[i];
            pts.emplace_back(static_cast<double>(p.n), p.median_sq_err);
            arm.per_n.push_back(p);
        }
        arm.kappa_hat = (n_grid >= 3) ? fit_rate(pts).kappa : std::nan("");
        result.arms.push_back(std::move(arm));
    }
    result.kappa_hat = result.arms.front().kappa_hat;
    result.baseline_kappa_hat = config.baseline ? result.arms.back().kappa_hat : std::nan("");
    return result;
}

DiagnoseResult run_diagnose(const ExperimentConfig& config) {
    const auto model = config.build_model();
    const auto target = config.build_target();
    const FunctionVec x = config.site();
    const auto& d = config.diagnose;
    if (d.n == 0) throw ConfigError("diagnose.n must be positive");

    EstimatorConfig cfg;
    cfg.J = d.J;
    cfg.K = d.K;
    cfg.delta = config.delta;
    cfg.basis = model.basis;
    cfg.retain_rows = true;
    cfg.validate();

    constexpr std::uint64_t kDiagnoseTag = 0xd1a6;
    Rng cov_rng = make_rng(config.seed, {kDiagnoseTag, static_cast<std::uint64_t>(Stream::Covariates)});
    Rng noise_rng = make_rng(config.seed, {kDiagnoseTag, static_cast<std::uint64_t>(Stream::Noise)});
    Dataset data;
    data.covariates = sample_covariates(model, d.n, cov_rng);
    auto resp = respond(target, config.noise, data.covariates, noise_rng);
    data.responses = resp.y;

    DiagnoseResult out;
    const LocalDesign design = assemble(data, x, cfg);
    out.decomposition = decompose_error(design, data, x, cfg, target, resp.eps);

    U0Options opts;
    opts.samples = d.u0_samples;
    const auto u0 = u0_monte_carlo(model, x, cfg, derive_seed(config.seed, {kDiagnoseTag, 4}), opts);
    const double d2 = config.delta * config.delta;
    out.bounds.u0_hat = u0.u0_hat;
    out.bounds.u0_bound = u0.u0_bound;
    out.bounds.u0_pass = u0.pass;
    out.bounds.variance_proxy = variance_proxy(design);
    out.bounds.variance_proxy_bound = (2.0 - d2) / (1.0 - d2) * u0.u0_hat / static_cast<double>(d.n);
    out.bounds.b2cond_value = b2cond_value(target, x, cfg);
    out.bounds.smallball_hat = u0.smallball_hat;

    out.gamma = gamma_diagonal_monte_carlo(model, x, config.delta, d.gamma_draws, d.gamma_j_max, d.J,
                                           derive_seed(config.seed, {kDiagnoseTag, 5}));
    return out;
}

}  // namespace funloc
