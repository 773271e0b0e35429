#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "funloc/diagnostics.hpp"
#include "funloc/estimator.hpp"
#include "funloc/simulation.hpp"

namespace funloc {

/// J(n) = max(2, ceil((log n)^D0)), K(n) = max(1, floor(D1 log n / log log n)); overrides win.
struct TuningRule {
    double D0 = 0.09;
    double D1 = 0.95;
    double gamma = 1.0;  ///< eigenvalue decay exponent
    double c1 = 1.0;
    std::optional<int> J_override;
    std::optional<int> K_override;
};

struct Tuning {
    int J = 2;
    int K = 1;
};

/// Requires n >= 10.
Tuning tune(std::size_t n, const TuningRule& rule);

/// Rate conditions on (gamma, D0, D1, c1). The second condition is reported in its literal
/// form, which cannot hold together with (4 c1 + 1) D0 < 1, and in its sign-corrected form;
/// only the corrected form counts towards all_hold().
struct ConditionCheck {
    double gamma = 0.0, D0 = 0.0, D1 = 0.0, c1 = 0.0;
    double cond1_value = 0.0;          ///< gamma D0, must exceed 1
    double cond2_lhs = 0.0;            ///< (4 c1 + 1) D0, must stay below 1
    double cond2_printed_value = 0.0;  ///< 2 D1 ((4 c1 + 1) D0 - 1)
    double cond2_derived_value = 0.0;  ///< 2 D1 (1 - (4 c1 + 1) D0)
    double cond3_value = 0.0;          ///< (8 c1 + 3) D0 D1, must stay below 1
    bool cond1 = false;
    bool cond2_printed = false;
    bool cond2_derived = false;
    bool cond3 = false;
    double kappa_target = 0.0;  ///< 1 - (8 c1 + 3) D0 D1
    bool all_hold() const { return cond1 && cond2_derived && cond3; }
};

ConditionCheck check_conditions(const TuningRule& rule);

struct RateFit {
    double kappa = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;  ///< points dropped for nonpositive or non-finite error
};

/// Negative least-squares slope of log err on log n. Needs >= 3 usable points.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct EigenSpec {
    std::string kind = "exp";  ///< "exp" or "poly"
    double C_lambda = 1.0;
    double C_gamma1 = 1.0;
    double gamma = 2.0;
    double p = 2.0;
};

struct ModelSpec {
    EigenSpec eigen;
    std::vector<double> mean_coeffs{0.0};
    int L = 0;  ///< 0: automatic truncation (exp family only)
};

struct TargetSpec {
    RegressionTarget::Kind kind = RegressionTarget::Kind::ExpLinear;
    std::vector<double> theta_coeffs{1.0};
    std::vector<RegressionTarget::PolyTerm> terms;  ///< PolyCoord only
};

struct DiagnoseSpec {
    std::size_t n = 1000;
    int J = 2;
    int K = 2;
    std::size_t u0_samples = 200000;
    std::size_t gamma_draws = 100000;
    int gamma_j_max = 8;
};

struct ExperimentConfig {
    ModelSpec model;
    TargetSpec target;
    NoiseModel noise{0.25, NoiseModel::Law::Gaussian};
    std::vector<double> site_coeffs{0.0};
    double delta = 0.5;
    std::vector<std::size_t> n_grid{250, 500, 1000, 2000, 4000};
    std::size_t replications = 200;
    TuningRule tuning;
    bool c1_configured = false;  ///< false: c1 = 1 + 2 c2* from the model
    std::optional<double> gamma_override;
    std::vector<std::pair<int, int>> fixed_arms{{3, 3}, {4, 3}};
    bool baseline = true;
    double smallball_floor = 0.05;
    std::uint64_t seed = 1;
    DiagnoseSpec diagnose;

    GaussianCovariateModel build_model() const;
    RegressionTarget build_target() const;
    FunctionVec site() const;
    /// Tuning rule with gamma and c1 resolved against the model.
    TuningRule resolved_tuning() const;
};

struct RatePoint {
    std::string arm;
    std::size_t n = 0;
    int J = 0;
    int K = 0;
    double delta = 0.0;
    double median_sq_err = 0.0;
    double mean_sq_err = 0.0;
    double q10 = 0.0;
    double q90 = 0.0;
    double mean_n_local = 0.0;
    double smallball_hat = 0.0;
    std::size_t empty_neighborhoods = 0;
};

struct ArmResult {
    std::string name;
    std::vector<RatePoint> per_n;  ///< sorted by n
    double kappa_hat = 0.0;
};

struct RateStudyResult {
    std::vector<ArmResult> arms;  ///< "tuned" first, "baseline" last when enabled
    double kappa_hat = 0.0;       ///< tuned arm
    double baseline_kappa_hat = 0.0;
    ConditionCheck conditions;
    SmallBallCondition small_ball;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<std::string> advisories;

    const ArmResult& arm(const std::string& name) const;
};

/// Replaces the estimator inside a rate study (used to plant known behaviour).
using EstimatorHook = std::function<EstimateResult(const Dataset&, const FunctionVec&, const EstimatorConfig&)>;

struct RateStudyOptions {
    unsigned threads = 1;
    EstimatorHook estimator;  ///< empty: estimate_at
};

/// Arm names: "tuned", "fixed_J<j>_K<k>" per fixed arm, "baseline" (K forced to 1).
std::vector<std::string> arm_names(const ExperimentConfig& config);

RateStudyResult run_rate_study(const ExperimentConfig& config, const RateStudyOptions& options = {});

struct DiagnoseResult {
    DecompositionReport decomposition;
    BoundsReport bounds;
    GammaDiagonalReport gamma;
};

/// One simulated dataset of size diagnose.n at the configured site: exact error decomposition,
/// u0 and variance-proxy bounds, and the conditional second moments of the coordinates.
DiagnoseResult run_diagnose(const ExperimentConfig& config);

/// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace funloc
