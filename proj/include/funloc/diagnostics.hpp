#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "funloc/estimator.hpp"
#include "funloc/simulation.hpp"

namespace funloc {

/// g_hat(x) - g(x) = B1 + B2 + B3 + V, each term evaluated from its definition.
struct DecompositionReport {
    double B1 = 0.0;  ///< ridge bias, -e0^T (M+S)^{-1} S G
    double B2 = 0.0;  ///< finite-dimensional truncation remainder
    double B3 = 0.0;  ///< Taylor remainder
    double V = 0.0;   ///< noise term
    double g_hat = 0.0;
    double g_true = 0.0;
    double identity_residual = 0.0;
    std::size_t remainder_bound_violations = 0;
    int J = 0;
    int K = 0;
    double delta = 0.0;
    std::size_t n_local = 0;
};

/// R_S = g(X) - sum_{k<K} g^{(k)}(x; X-x, ..., X-x) / k!.
double remainder_RS(const RegressionTarget& target, const FunctionVec& x, const FunctionVec& X, int K);

/// R_D: Taylor sum along X - x minus the same sum along its projection on phi_1..phi_J.
double remainder_RD(const RegressionTarget& target, const FunctionVec& x, const FunctionVec& X, int J, int K);

/// sum_{k=1}^{K-1} delta^{k-1} ||g^{(k)}(x;.)|| ||(X - x) beyond J|| / (k-1)!; bounds |R_D| when X is in N.
double remainder_RD_bound(const RegressionTarget& target, const FunctionVec& x, const FunctionVec& X, int J, int K,
                          double delta);

/// sup_{y in N} ||g^{(K)}(y;.)|| delta^K / K!; bounds |R_S| when X is in N.
double remainder_RS_bound(const RegressionTarget& target, const FunctionVec& x, int K, double delta);

/// sum_{k=1}^{K-1} delta^{k-1} ||g^{(k)}(x;.)|| / (k-1)!.
double b2cond_value(const RegressionTarget& target, const FunctionVec& x, const EstimatorConfig& cfg);

/// G^T S G for the Frechet coefficient vector of `target` at x.
double ridge_bias_energy(const RegressionTarget& target, const FunctionVec& x, const MultiIndexSet& set);

/// sum_{k<K} J^k ||g^{(k)}(x;.)||^2 / k!^2, the upper bound on G^T S G.
double ridge_bias_energy_bound(const RegressionTarget& target, const FunctionVec& x, int J, int K);

/// Decomposition from a design assembled with retain_rows. `eps` are the noise draws used to
/// build the responses, indexed like the dataset.
DecompositionReport decompose_error(const LocalDesign& design, const Dataset& data, const FunctionVec& x,
                                    const EstimatorConfig& cfg, const RegressionTarget& target,
                                    std::span<const double> eps);

/// Assembles with retained rows, then decomposes.
DecompositionReport decompose_error(const Dataset& data, const FunctionVec& x, const EstimatorConfig& cfg,
                                    const RegressionTarget& target, std::span<const double> eps);

/// Monte Carlo slack convention for one-sided bound checks.
inline double mc_slack(double std_error) { return 3.0 * std_error + 1e-10; }

struct U0Estimate {
    double u0_hat = 0.0;
    double u0_bound = 0.0;
    double std_error = 0.0;  ///< batch-means standard error of u0_hat
    bool pass = false;       ///< u0_hat <= u0_bound + mc_slack(std_error)
    double smallball_hat = 0.0;
    std::size_t samples_used = 0;
    double c1 = 1.0;
    double c2 = 1.0;
    double c2_star = 0.0;
};

struct U0Options {
    std::size_t samples = 200000;
    std::size_t max_samples = 10000000;
    std::size_t batches = 20;
    double c2_star_override = -1.0;
    double min_pivot = 1e-12;
};

/// u0 = e0^T M_n^{-1} e0 with M_n = E 1_N(X) xi xi^T estimated from simulated covariates,
/// against c2 exp(8 c1 (K-1)) J^{(8 c1 + 2)(K-1)} / P[X in N], c1 = 1 + 2 c2*, c2 = 1.
U0Estimate u0_monte_carlo(const GaussianCovariateModel& model, const FunctionVec& x, const EstimatorConfig& cfg,
                          std::uint64_t seed, const U0Options& options = {});

struct VarianceProxyStudy {
    double mean = 0.0;  ///< average of e0^T (M+S)^{-1} e0 over replications
    double std_error = 0.0;
    double bound = 0.0;  ///< (2 - delta^2)/(1 - delta^2) u0 / n
    bool pass = false;
    std::size_t replications = 0;
};

VarianceProxyStudy variance_proxy_study(const GaussianCovariateModel& model, const FunctionVec& x,
                                        const EstimatorConfig& cfg, std::size_t n, std::size_t replications,
                                        double u0, std::uint64_t seed);

/// e0^T (M+S)^{-1} e0 for one design.
double variance_proxy(const LocalDesign& design);

struct GammaDiagonalEntry {
    int j = 0;
    double estimate = 0.0;  ///< E(<X-x, phi_j>^2 | X in N)
    double std_error = 0.0;
    double bound = 0.0;     ///< <z, phi_j>^2 + lambda_j
    bool pass = false;
};

struct GammaDiagonalReport {
    std::vector<GammaDiagonalEntry> entries;
    std::size_t drawn = 0;
    std::size_t accepted = 0;
    int tail_from = 0;  ///< tail sum runs over j > tail_from
    double tail_estimate = 0.0;
    double tail_std_error = 0.0;
    double tail_bound = 0.0;
    bool tail_pass = false;
};

/// Diagonal of Gamma_N = E((X-x) (x) (X-x) | X in N) by rejection sampling, j = 1..j_max, plus
/// the tail sum over j > J against sum_{j>J} (z_j^2 + lambda_j).
GammaDiagonalReport gamma_diagonal_monte_carlo(const GaussianCovariateModel& model, const FunctionVec& x,
                                               double delta, std::size_t draws, int j_max, int J,
                                               std::uint64_t seed);

struct BoundsReport {
    double u0_hat = 0.0;
    double u0_bound = 0.0;
    bool u0_pass = false;
    double variance_proxy = 0.0;
    double variance_proxy_bound = 0.0;
    double b2cond_value = 0.0;
    double smallball_hat = 0.0;
};

}  // namespace funloc
