#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "funloc/function_space.hpp"
#include "funloc/poly_index.hpp"

namespace funloc {

/// Paired sample (X_j, Y_j), j = 1..n; all covariates share one basis.
struct Dataset {
    std::vector<FunctionVec> covariates;
    std::vector<double> responses;

    std::size_t size() const { return covariates.size(); }
};

struct EstimatorConfig {
    int J = 2;
    int K = 2;
    double delta = 0.5;  ///< neighbourhood radius, in (0, 1)
    Basis basis = Basis::trigonometric();
    bool retain_rows = false;  ///< keep per-sample monomial rows for diagnostics
    std::size_t index_cap = kDefaultIndexCap;

    /// Throws ConfigError unless 0 < delta < 1 and J, K >= 1.
    void validate() const;
};

/// Normal-equation data of the local fit at one site.
struct LocalDesign {
    MultiIndexSet indices;
    Eigen::MatrixXd M;       ///< sum over local samples of xi xi^T
    Eigen::VectorXd S_diag;  ///< 1 / multinomial(k)
    Eigen::VectorXd Yv;      ///< sum over local samples of xi Y_j
    std::size_t n_local = 0;
    std::vector<std::size_t> local_indices;  ///< dataset positions of local samples, ascending
    Eigen::MatrixXd xi_rows;                 ///< n_local x |K|, only when retained
    bool rows_retained = false;
};

struct SolverReport {
    std::string method;            ///< "llt" or "ldlt"
    double condition_proxy = 0.0;  ///< (max/min Cholesky pivot)^2
    double residual = 0.0;         ///< ||(M+S) alpha - Yv||
};

struct EstimateResult {
    double g_hat = 0.0;
    Eigen::VectorXd alpha;
    std::size_t n_local = 0;
    SolverReport solver_report;
    /// alpha at the degree-one indices e_1..e_J; empty when K == 1.
    std::vector<double> first_derivative;
};

/// mask_j = (||X_j - x||^2 <= delta^2), tail mass included.
std::vector<bool> neighborhood_mask(std::span<const FunctionVec> data, const FunctionVec& x, double delta);

LocalDesign assemble(const Dataset& data, const FunctionVec& x, const EstimatorConfig& cfg);

/// Solves (M + diag(S)) alpha = Yv. Cholesky first, pivoted LDL^T if positivity is lost.
EstimateResult solve(const LocalDesign& design);

/// Symmetric factorization of M + diag(S) shared by solve() and the diagnostics.
class RegularizedSystem {
public:
    explicit RegularizedSystem(const LocalDesign& design);

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    const Eigen::MatrixXd& matrix() const { return A_; }
    const SolverReport& report() const { return report_; }

private:
    Eigen::MatrixXd A_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    bool use_ldlt_ = false;
    SolverReport report_;
};

EstimateResult estimate_at(const Dataset& data, const FunctionVec& x, const EstimatorConfig& cfg);

}  // namespace funloc
