#include "funloc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "funloc/errors.hpp"

namespace funloc {

namespace {

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

FunctionVec head_part(const FunctionVec& h, int J) {
    auto proj = project_head(h, J);
    return FunctionVec(std::move(proj.head));
}

struct MeanAccumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    double std_error() const {
        if (count < 2) return 0.0;
        const double n = static_cast<double>(count);
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
        return std::sqrt(var / n);
    }
};

}  // namespace

double remainder_RS(const RegressionTarget& target, const FunctionVec& x, const FunctionVec& X, int K) {
    return target.value(X) - target.taylor_sum(x, subtract(X, x), K);
}

double remainder_RD(const RegressionTarget& target, const FunctionVec& x, const FunctionVec& X, int J, int K) {
    const FunctionVec h = subtract(X, x);
    return target.taylor_sum(x, h, K) - target.taylor_sum(x, head_part(h, J), K);
}

double remainder_RD_bound(const RegressionTarget& target, const FunctionVec& x, const FunctionVec& X, int J, int K,
                          double delta) {
    const double tail = std::sqrt(project_head(subtract(X, x), J).tail_norm_sq);
    double sum = 0.0;
    for (int k = 1; k < K; ++k) sum += std::pow(delta, k - 1) / factorial(k - 1) * target.derivative_norm(x, k);
    return sum * tail;
}

double remainder_RS_bound(const RegressionTarget& target, const FunctionVec& x, int K, double delta) {
    return target.derivative_norm_sup(x, delta, K) * std::pow(delta, K) / factorial(K);
}

double b2cond_value(const RegressionTarget& target, const FunctionVec& x, const EstimatorConfig& cfg) {
    double sum = 0.0;
    for (int k = 1; k < cfg.K; ++k) sum += std::pow(cfg.delta, k - 1) / factorial(k - 1) * target.derivative_norm(x, k);
    return sum;
}

double ridge_bias_energy(const RegressionTarget& target, const FunctionVec& x, const MultiIndexSet& set) {
    const auto G = frechet_coefficients(target, x, set);
    double e = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) e += G[i] * G[i] / static_cast<double>(set.multinomials()[i]);
    return e;
}

double ridge_bias_energy_bound(const RegressionTarget& target, const FunctionVec& x, int J, int K) {
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
        const double nk = target.derivative_norm(x, k);
        const double f = factorial(k);
        sum += std::pow(static_cast<double>(J), k) * nk * nk / (f * f);
    }
    return sum;
}

DecompositionReport decompose_error(const LocalDesign& design, const Dataset& data, const FunctionVec& x,
                                    const EstimatorConfig& cfg, const RegressionTarget& target,
                                    std::span<const double> eps) {
    if (!design.rows_retained)
        throw ConfigError("decompose_error: the design was assembled without retained monomial rows (set retain_rows)");
    if (eps.size() != data.size()) throw ConfigError("decompose_error: one noise value per sample is required");

    DecompositionReport rep;
    rep.J = cfg.J;
    rep.K = cfg.K;
    rep.delta = cfg.delta;
    rep.n_local = design.n_local;

    const auto p = static_cast<Eigen::Index>(design.indices.size());
    RegularizedSystem system(design);
    const EstimateResult est = solve(design);
    rep.g_hat = est.g_hat;
    rep.g_true = target.value(x);

    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(p);
    e0[0] = 1.0;
    // A is symmetric, so e0^T A^{-1} v = w^T v with A w = e0.
    const Eigen::VectorXd w = system.solve(e0);

    const auto G = frechet_coefficients(target, x, design.indices);
    Eigen::VectorXd SG(p);
    for (Eigen::Index i = 0; i < p; ++i) SG[i] = design.S_diag[i] * G[static_cast<std::size_t>(i)];
    rep.B1 = -w.dot(SG);

    Eigen::VectorXd sum_rd = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_rs = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_eps = Eigen::VectorXd::Zero(p);
    const double rs_bound = remainder_RS_bound(target, x, cfg.K, cfg.delta);
    for (std::size_t r = 0; r < design.local_indices.size(); ++r) {
        const std::size_t j = design.local_indices[r];
        const FunctionVec& X = data.covariates[j];
        const auto row = design.xi_rows.row(static_cast<Eigen::Index>(r)).transpose();
        const double rd = remainder_RD(target, x, X, cfg.J, cfg.K);
        const double rs = remainder_RS(target, x, X, cfg.K);
        sum_rd += row * rd;
        sum_rs += row * rs;
        sum_eps += row * eps[j];
        if (std::abs(rd) > remainder_RD_bound(target, x, X, cfg.J, cfg.K, cfg.delta) + 1e-10 ||
            std::abs(rs) > rs_bound + 1e-10)
            ++rep.remainder_bound_violations;
    }
    rep.B2 = w.dot(sum_rd);
    rep.B3 = w.dot(sum_rs);
    rep.V = w.dot(sum_eps);
    rep.identity_residual = std::abs((rep.g_hat - rep.g_true) - (rep.B1 + rep.B2 + rep.B3 + rep.V));
    return rep;
}

DecompositionReport decompose_error(const Dataset& data, const FunctionVec& x, const EstimatorConfig& cfg,
                                    const RegressionTarget& target, std::span<const double> eps) {
    EstimatorConfig with_rows = cfg;
    with_rows.retain_rows = true;
    return decompose_error(assemble(data, x, with_rows), data, x, with_rows, target, eps);
}

U0Estimate u0_monte_carlo(const GaussianCovariateModel& model, const FunctionVec& x, const EstimatorConfig& cfg,
                          std::uint64_t seed, const U0Options& options) {
    cfg.validate();
    if (options.samples == 0 || options.batches == 0) throw ConfigError("u0_monte_carlo: samples and batches must be > 0");
    const auto set = MultiIndexSet::enumerate(cfg.J, cfg.K, cfg.index_cap);
    const auto p = static_cast<Eigen::Index>(set.size());
    const double r2 = cfg.delta * cfg.delta;

    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(Stream::Covariates)});
    constexpr std::size_t kChunk = 4096;

    std::size_t target_samples = options.samples;
    std::size_t drawn = 0;
    std::vector<Eigen::MatrixXd> batch_sums(options.batches, Eigen::MatrixXd::Zero(p, p));
    std::vector<std::size_t> batch_hits(options.batches, 0);
    std::vector<std::size_t> batch_draws(options.batches, 0);
    std::vector<double> coords(static_cast<std::size_t>(cfg.J));
    Eigen::VectorXd row(p);

    U0Estimate out;
    while (true) {
        while (drawn < target_samples) {
            const std::size_t chunk = std::min(kChunk, target_samples - drawn);
            const auto X = sample_covariates(model, chunk, rng);
            for (std::size_t i = 0; i < chunk; ++i, ++drawn) {
                // Batches are interleaved so every batch grows when m doubles.
                const std::size_t b = drawn % options.batches;
                ++batch_draws[b];
                if (distance_sq(X[i], x) > r2) continue;
                for (int l = 1; l <= cfg.J; ++l) coords[static_cast<std::size_t>(l - 1)] = X[i].coeff(l) - x.coeff(l);
                monomial_row(coords, set, std::span<double>(row.data(), set.size()));
                batch_sums[b].selfadjointView<Eigen::Lower>().rankUpdate(row);
                ++batch_hits[b];
            }
        }
        Eigen::MatrixXd total = Eigen::MatrixXd::Zero(p, p);
        std::size_t hits = 0;
        for (std::size_t b = 0; b < options.batches; ++b) {
            total += batch_sums[b];
            hits += batch_hits[b];
        }
        total = total.selfadjointView<Eigen::Lower>();
        total /= static_cast<double>(drawn);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(total);
        const double min_pivot = hits ? ldlt.vectorD().minCoeff() : 0.0;
        if (hits > 0 && ldlt.info() == Eigen::Success && min_pivot >= options.min_pivot) {
            Eigen::VectorXd e0 = Eigen::VectorXd::Zero(p);
            e0[0] = 1.0;
            out.u0_hat = ldlt.solve(e0)[0];
            out.smallball_hat = static_cast<double>(hits) / static_cast<double>(drawn);
            break;
        }
        if (target_samples >= options.max_samples)
            throw NumericalError("u0_monte_carlo: estimated M_n stays singular after " + std::to_string(drawn) +
                                 " samples");
        target_samples = std::min(options.max_samples, 2 * target_samples);
    }
    out.samples_used = drawn;

    MeanAccumulator batches;
    for (std::size_t b = 0; b < options.batches; ++b) {
        if (batch_hits[b] == 0) continue;
        Eigen::MatrixXd mb = batch_sums[b].selfadjointView<Eigen::Lower>();
        mb /= static_cast<double>(batch_draws[b]);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(mb);
        if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) continue;
        Eigen::VectorXd e0 = Eigen::VectorXd::Zero(p);
        e0[0] = 1.0;
        batches.add(ldlt.solve(e0)[0]);
    }
    out.std_error = batches.std_error();

    const auto cond = check_small_ball_condition(model, x, cfg.delta, options.c2_star_override);
    out.c2_star = cond.c2_star_used;
    out.c1 = cond.c1;
    out.c2 = cond.c2;
    const double km1 = static_cast<double>(cfg.K - 1);
    out.u0_bound = out.c2 * std::exp(8.0 * out.c1 * km1) *
                   std::pow(static_cast<double>(cfg.J), (8.0 * out.c1 + 2.0) * km1) / out.smallball_hat;
    out.pass = out.u0_hat <= out.u0_bound + mc_slack(out.std_error);
    return out;
}

double variance_proxy(const LocalDesign& design) {
    RegularizedSystem system(design);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.indices.size()));
    e0[0] = 1.0;
    return system.solve(e0)[0];
}

VarianceProxyStudy variance_proxy_study(const GaussianCovariateModel& model, const FunctionVec& x,
                                        const EstimatorConfig& cfg, std::size_t n, std::size_t replications,
                                        double u0, std::uint64_t seed) {
    cfg.validate();
    if (n == 0 || replications == 0) throw ConfigError("variance_proxy_study: n and replications must be > 0");
    MeanAccumulator acc;
    EstimatorConfig plain = cfg;
    plain.retain_rows = false;
    for (std::size_t r = 0; r < replications; ++r) {
        Rng rng = make_rng(seed, {r, static_cast<std::uint64_t>(Stream::Covariates)});
        Dataset data{sample_covariates(model, n, rng), std::vector<double>(n, 0.0)};
        acc.add(variance_proxy(assemble(data, x, plain)));
    }
    VarianceProxyStudy out;
    out.replications = replications;
    out.mean = acc.mean();
    out.std_error = acc.std_error();
    const double d2 = cfg.delta * cfg.delta;
    out.bound = (2.0 - d2) / (1.0 - d2) * u0 / static_cast<double>(n);
    out.pass = out.mean <= out.bound + mc_slack(out.std_error);
    return out;
}

GammaDiagonalReport gamma_diagonal_monte_carlo(const GaussianCovariateModel& model, const FunctionVec& x,
                                               double delta, std::size_t draws, int j_max, int J,
                                               std::uint64_t seed) {
    model.validate();
    if (j_max < 1 || J < 0) throw ConfigError("gamma_diagonal_monte_carlo: need j_max >= 1 and J >= 0");
    const std::size_t dim = std::max({model.rank(), model.mean.size(), x.size(), static_cast<std::size_t>(j_max)});
    std::vector<MeanAccumulator> diag(static_cast<std::size_t>(j_max));
    MeanAccumulator tail;
    const double r2 = delta * delta;

    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(Stream::Covariates)});
    constexpr std::size_t kChunk = 4096;
    GammaDiagonalReport rep;
    while (rep.drawn < draws) {
        const std::size_t chunk = std::min(kChunk, draws - rep.drawn);
        const auto X = sample_covariates(model, chunk, rng);
        rep.drawn += chunk;
        for (const auto& Xi : X) {
            if (distance_sq(Xi, x) > r2) continue;
            ++rep.accepted;
            double t = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const int l = static_cast<int>(j) + 1;
                const double c = Xi.coeff(l) - x.coeff(l);
                if (j < diag.size()) diag[j].add(c * c);
                if (l > J) t += c * c;
            }
            tail.add(t + Xi.tail_norm_sq() + x.tail_norm_sq());
        }
    }
    if (rep.accepted < 2) throw NumericalError("gamma_diagonal_monte_carlo: too few draws landed in the neighbourhood");

    auto lambda = [&](std::size_t j) { return j < model.rank() ? model.eigenvalues[j] : 0.0; };
    for (int j = 1; j <= j_max; ++j) {
        const auto& a = diag[static_cast<std::size_t>(j - 1)];
        const double z = model.mean.coeff(j) - x.coeff(j);
        GammaDiagonalEntry e;
        e.j = j;
        e.estimate = a.mean();
        e.std_error = a.std_error();
        e.bound = z * z + lambda(static_cast<std::size_t>(j - 1));
        e.pass = e.estimate <= e.bound + mc_slack(e.std_error);
        rep.entries.push_back(e);
    }
    rep.tail_from = J;
    rep.tail_estimate = tail.mean();
    rep.tail_std_error = tail.std_error();
    double bound = model.mean.tail_norm_sq() + x.tail_norm_sq();
    for (std::size_t j = static_cast<std::size_t>(J); j < dim; ++j) {
        const int l = static_cast<int>(j) + 1;
        const double z = model.mean.coeff(l) - x.coeff(l);
        bound += z * z + lambda(j);
    }
    rep.tail_bound = bound;
    rep.tail_pass = rep.tail_estimate <= rep.tail_bound + mc_slack(rep.tail_std_error);
    return rep;
}

}  // namespace funloc
