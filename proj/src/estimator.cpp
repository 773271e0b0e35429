#include "funloc/estimator.hpp"

#include <cmath>
#include <string>

#include "funloc/errors.hpp"

namespace funloc {

namespace {

constexpr double kPositivityFloor = 1e-10;
constexpr double kRefineTarget = 1e-13;
constexpr int kMaxRefinement = 3;

bool all_finite(const LocalDesign& d) {
    return d.M.allFinite() && d.S_diag.allFinite() && d.Yv.allFinite();
}

}  // namespace

void EstimatorConfig::validate() const {
    if (J < 1) throw ConfigError("estimator: J must be >= 1, got " + std::to_string(J));
    if (K < 1) throw ConfigError("estimator: K must be >= 1, got " + std::to_string(K));
    if (!(delta > 0.0 && delta < 1.0))
        throw ConfigError("estimator: delta must lie in (0, 1), got " + std::to_string(delta));
}

std::vector<bool> neighborhood_mask(std::span<const FunctionVec> data, const FunctionVec& x, double delta) {
    std::vector<bool> mask(data.size());
    const double r2 = delta * delta;
    for (std::size_t j = 0; j < data.size(); ++j) mask[j] = distance_sq(data[j], x) <= r2;
    return mask;
}

LocalDesign assemble(const Dataset& data, const FunctionVec& x, const EstimatorConfig& cfg) {
    cfg.validate();
    if (data.covariates.size() != data.responses.size())
        throw ConfigError("assemble: covariate and response counts differ");
    if (data.size() == 0) throw ConfigError("assemble: empty dataset");

    LocalDesign d;
    d.indices = MultiIndexSet::enumerate(cfg.J, cfg.K, cfg.index_cap);
    const std::size_t p = d.indices.size();
    d.M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    d.Yv = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    d.S_diag.resize(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i)
        d.S_diag[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(d.indices.multinomials()[i]);

    const auto mask = neighborhood_mask(data.covariates, x, cfg.delta);
    std::vector<double> coords(static_cast<std::size_t>(cfg.J));
    Eigen::VectorXd row(static_cast<Eigen::Index>(p));
    std::vector<Eigen::VectorXd> kept;

    for (std::size_t j = 0; j < data.size(); ++j) {
        if (!mask[j]) continue;
        const FunctionVec& X = data.covariates[j];
        for (int l = 1; l <= cfg.J; ++l) coords[static_cast<std::size_t>(l - 1)] = X.coeff(l) - x.coeff(l);
        monomial_row(coords, d.indices, std::span<double>(row.data(), p));
        const double y = data.responses[j];
        for (Eigen::Index a = 0; a < row.size(); ++a) {
            const double ra = row[a];
            for (Eigen::Index b = 0; b <= a; ++b) d.M(a, b) += ra * row[b];
            d.Yv[a] += ra * y;
        }
        d.local_indices.push_back(j);
        if (cfg.retain_rows) kept.push_back(row);
    }
    for (Eigen::Index a = 0; a < d.M.rows(); ++a)
        for (Eigen::Index b = 0; b < a; ++b) d.M(b, a) = d.M(a, b);

    d.n_local = d.local_indices.size();
    d.rows_retained = cfg.retain_rows;
    if (cfg.retain_rows) {
        d.xi_rows.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(p));
        for (std::size_t r = 0; r < kept.size(); ++r) d.xi_rows.row(static_cast<Eigen::Index>(r)) = kept[r].transpose();
    }
    return d;
}

RegularizedSystem::RegularizedSystem(const LocalDesign& design) {
    if (!all_finite(design)) throw NumericalError("solve: design contains non-finite entries");
    if ((design.S_diag.array() <= 0.0).any()) throw NumericalError("solve: regularizer must be positive");
    A_ = design.M;
    A_.diagonal() += design.S_diag;

    llt_.compute(A_);
    bool ok = llt_.info() == Eigen::Success;
    if (ok) {
        const Eigen::VectorXd pivots = llt_.matrixL().toDenseMatrix().diagonal();
        const double lo = pivots.minCoeff();
        const double hi = pivots.maxCoeff();
        ok = lo * lo > kPositivityFloor;
        report_.condition_proxy = (hi / lo) * (hi / lo);
        report_.method = "llt";
    }
    if (!ok) {
        ldlt_.compute(A_);
        if (ldlt_.info() != Eigen::Success) throw NumericalError("solve: symmetric factorization failed");
        const Eigen::VectorXd dvals = ldlt_.vectorD().cwiseAbs();
        report_.condition_proxy = dvals.maxCoeff() / std::max(dvals.minCoeff(), 1e-300);
        report_.method = "ldlt";
        use_ldlt_ = true;
    }
}

Eigen::VectorXd RegularizedSystem::solve(const Eigen::VectorXd& rhs) const {
    auto apply = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
        return use_ldlt_ ? Eigen::VectorXd(ldlt_.solve(b)) : Eigen::VectorXd(llt_.solve(b));
    };
    Eigen::VectorXd sol = apply(rhs);
    const double scale = std::max(rhs.norm(), 1e-300);
    for (int step = 0; step < kMaxRefinement; ++step) {
        const Eigen::VectorXd r = rhs - A_ * sol;
        if (r.norm() <= kRefineTarget * scale) break;
        sol += apply(r);
    }
    if (!sol.allFinite()) throw NumericalError("solve: non-finite solution");
    return sol;
}

EstimateResult solve(const LocalDesign& design) {
    RegularizedSystem system(design);
    EstimateResult out;
    out.alpha = system.solve(design.Yv);
    out.g_hat = out.alpha[0];
    out.n_local = design.n_local;
    out.solver_report = system.report();
    out.solver_report.residual = (system.matrix() * out.alpha - design.Yv).norm();
    for (std::size_t i : design.indices.linear_positions())
        out.first_derivative.push_back(out.alpha[static_cast<Eigen::Index>(i)]);
    return out;
}

EstimateResult estimate_at(const Dataset& data, const FunctionVec& x, const EstimatorConfig& cfg) {
    return solve(assemble(data, x, cfg));
}

}  // namespace funloc
