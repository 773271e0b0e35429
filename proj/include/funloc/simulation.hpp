#pragma once

#include <span>
#include <utility>
#include <vector>

#include "funloc/function_space.hpp"
#include "funloc/poly_index.hpp"
#include "funloc/rng.hpp"

namespace funloc {

/// Gaussian covariate X = mean + sum_j sqrt(lambda_j) eta_j phi_j, truncated at L terms.
struct GaussianCovariateModel {
    FunctionVec mean;
    std::vector<double> eigenvalues;  ///< positive, nonincreasing
    Basis basis = Basis::trigonometric();

    /// Throws ConfigError when eigenvalues are empty, nonpositive or increasing.
    void validate() const;
    std::size_t rank() const { return eigenvalues.size(); }
};

inline constexpr double kTruncationRatio = 1e-12;
inline constexpr int kMaxAutoRank = 100000;

/// lambda_j = C_lambda exp(-C_gamma1 j^gamma), j = 1..L. With L == 0 the rank is the
/// smallest L whose discarded tail is at most kTruncationRatio of the total mass.
std::vector<double> exponential_eigenvalues(double c_lambda, double c_gamma1, double gamma, int L = 0);

/// lambda_j = C_lambda j^{-p}, j = 1..L. L is required: this family has no cheap
/// truncation at the kTruncationRatio level.
std::vector<double> polynomial_eigenvalues(double c_lambda, double p, int L);

/// Smallest L with sum_{j>L} lambda_j <= ratio * sum_j lambda_j over the given sequence.
int truncation_rank(std::span<const double> eigenvalues, double ratio = kTruncationRatio);

std::vector<FunctionVec> sample_covariates(const GaussianCovariateModel& model, std::size_t n, Rng& rng);

/// Functional g: L2 -> R with closed-form Frechet derivatives.
///
/// ExpLinear, CosLinear and Quadratic are ridge functions h(<theta, x>) with h = exp, cos
/// and s^2, so g^{(k)}(x; u_1..u_k) = h^{(k)}(<theta,x>) prod_i <theta, u_i>. PolyCoord is a
/// polynomial in the coordinates <x, phi_1>, ..., <x, phi_P>.
class RegressionTarget {
public:
    enum class Kind { ExpLinear, CosLinear, Quadratic, PolyCoord };

    struct PolyTerm {
        MultiIndex exponents;
        double coefficient = 0.0;
    };

    static RegressionTarget exp_linear(FunctionVec theta);
    static RegressionTarget cos_linear(FunctionVec theta);
    static RegressionTarget quadratic(FunctionVec theta);
    /// g(x) = sum_terms coefficient * prod_l <x, phi_l>^{exponents_l}. All exponent
    /// vectors must share one length P >= 1.
    static RegressionTarget poly_coord(std::vector<PolyTerm> terms);

    Kind kind() const { return kind_; }
    const FunctionVec& theta() const { return theta_; }
    const std::vector<PolyTerm>& terms() const { return terms_; }
    /// Total degree of a PolyCoord target; -1 for ridge kinds (infinitely smooth or not a polynomial).
    int poly_degree() const;

    double value(const FunctionVec& x) const;

    /// h^{(k)}(<theta, x>) for ridge kinds; throws UnsupportedError for PolyCoord.
    double profile_derivative(const FunctionVec& x, int k) const {
        return ridge_profile(inner_product(theta_, x), k);
    }

    /// Number of coordinates a PolyCoord target depends on (0 for ridge kinds).
    int poly_dimension() const { return poly_dim_; }

    /// PolyCoord Taylor coefficient G_m at coordinates c (both of length poly_dimension()):
    /// sum over terms of coefficient * prod_l binom(e_l, m_l) c_l^{e_l - m_l}.
    double taylor_coefficient(std::span<const double> c, std::span<const int> m) const {
        return poly_taylor_coefficient(c, m);
    }

    /// g^{(k)}(x; u_1, ..., u_k) with k = directions.size().
    double derivative(const FunctionVec& x, std::span<const FunctionVec> directions) const;

    /// ||g^{(k)}(x; .)||. Exact for ridge kinds; for PolyCoord the Hilbert-Schmidt norm of
    /// the coordinate tensor, an upper bound that is exact for k <= 1.
    double derivative_norm(const FunctionVec& x, int k) const;

    /// Upper bound on sup_{||y - x|| <= delta} ||g^{(k)}(y; .)||. Exact for ExpLinear.
    /// CosLinear uses the envelope |cos|, |sin| <= 1.
    double derivative_norm_sup(const FunctionVec& x, double delta, int k) const;

    /// sum_{k<K} g^{(k)}(x; h, ..., h) / k!.
    double taylor_sum(const FunctionVec& x, const FunctionVec& h, int K) const;

private:
    RegressionTarget() = default;

    double ridge_profile(double s, int k) const;
    /// Taylor coefficient of the PolyCoord polynomial at coordinates c for exponent m.
    double poly_taylor_coefficient(std::span<const double> c, std::span<const int> m) const;
    std::vector<double> poly_coordinates(const FunctionVec& x) const;
    double poly_hs_norm(std::span<const double> c, int k, bool absolute) const;

    Kind kind_ = Kind::ExpLinear;
    FunctionVec theta_;
    std::vector<PolyTerm> terms_;
    int poly_dim_ = 0;
};

/// G_k(x) = g^{(|k|)}(x; phi_1 x k_1, ..., phi_J x k_J) / prod_l k_l!, in set order.
std::vector<double> frechet_coefficients(const RegressionTarget& target, const FunctionVec& x,
                                         const MultiIndexSet& set);

/// P_{J,K}(coords) = sum_k G_k(x) prod_l coords_l^{k_l}.
double taylor_polynomial(const RegressionTarget& target, const FunctionVec& x, const MultiIndexSet& set,
                         std::span<const double> coords);

struct NoiseModel {
    enum class Law { Gaussian, Uniform, None };
    double sigma = 0.0;
    Law law = Law::Gaussian;
};

/// n centered draws with variance sigma^2 (Uniform on +-sigma sqrt(3)); zeros for None.
std::vector<double> draw_noise(const NoiseModel& noise, std::size_t n, Rng& rng);

struct Responses {
    std::vector<double> y;
    std::vector<double> eps;
};

/// Y_j = g(X_j) + eps_j; the noise realisations are returned alongside.
Responses respond(const RegressionTarget& target, const NoiseModel& noise, std::span<const FunctionVec> X,
                  Rng& rng);

/// Gaussian sufficient condition sup_j <z, phi_j>^2 / lambda_j <= c2* delta^2, z = mean - x.
struct SmallBallCondition {
    double sup_ratio = 0.0;     ///< sup_j z_j^2 / lambda_j
    double c2_star_tight = 0.0; ///< sup_ratio / delta^2
    double c2_star_used = 0.0;
    double c1 = 1.0;            ///< 1 + 2 c2*_used
    double c2 = 1.0;
    bool holds = true;
};

/// c2* defaults to the tight value; pass c2_star_override >= 0 to check a configured one.
SmallBallCondition check_small_ball_condition(const GaussianCovariateModel& model, const FunctionVec& x,
                                              double delta, double c2_star_override = -1.0);

}  // namespace funloc
