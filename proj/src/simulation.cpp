#include "funloc/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "funloc/errors.hpp"

namespace funloc {

namespace {

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

double int_pow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

/// All exponent vectors of dimension P with total degree exactly k.
std::vector<MultiIndex> exponents_of_degree(int P, int k) {
    std::vector<MultiIndex> out;
    const auto set = MultiIndexSet::enumerate(P, k + 1, std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.degrees()[i] == k) out.push_back(set[i]);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Covariate model

void GaussianCovariateModel::validate() const {
    if (eigenvalues.empty()) throw ConfigError("covariate model: no eigenvalues");
    for (std::size_t j = 0; j < eigenvalues.size(); ++j) {
        if (!(eigenvalues[j] > 0.0) || !std::isfinite(eigenvalues[j]))
            throw ConfigError("covariate model: eigenvalue " + std::to_string(j + 1) + " must be finite and > 0");
        if (j > 0 && eigenvalues[j] > eigenvalues[j - 1])
            throw ConfigError("covariate model: eigenvalues must be nonincreasing");
    }
}

int truncation_rank(std::span<const double> eigenvalues, double ratio) {
    const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
    double tail = total;
    for (std::size_t L = 0; L < eigenvalues.size(); ++L) {
        if (tail <= ratio * total) return static_cast<int>(std::max<std::size_t>(L, 1));
        tail -= eigenvalues[L];
    }
    return static_cast<int>(eigenvalues.size());
}

std::vector<double> exponential_eigenvalues(double c_lambda, double c_gamma1, double gamma, int L) {
    if (!(c_lambda > 0.0) || !(c_gamma1 > 0.0) || !(gamma > 0.0))
        throw ConfigError("exponential eigenvalues: C_lambda, C_gamma1 and gamma must be > 0");
    auto term = [&](int j) { return c_lambda * std::exp(-c_gamma1 * std::pow(static_cast<double>(j), gamma)); };
    if (L > 0) {
        std::vector<double> out(static_cast<std::size_t>(L));
        for (int j = 1; j <= L; ++j) out[static_cast<std::size_t>(j - 1)] = term(j);
        if (out.back() <= 0.0) throw ConfigError("exponential eigenvalues: L too large, eigenvalues underflow");
        return out;
    }
    std::vector<double> all;
    for (int j = 1; j <= kMaxAutoRank; ++j) {
        const double v = term(j);
        if (v <= 0.0) break;
        all.push_back(v);
        // once the remaining terms cannot matter the scan can stop
        if (v < 1e-3 * kTruncationRatio * all.front() && j > 1) break;
    }
    const int rank = truncation_rank(all);
    if (rank >= kMaxAutoRank) throw SizingError("exponential eigenvalues: decay too slow for automatic truncation");
    all.resize(static_cast<std::size_t>(rank));
    return all;
}

std::vector<double> polynomial_eigenvalues(double c_lambda, double p, int L) {
    if (!(c_lambda > 0.0) || !(p > 0.0)) throw ConfigError("polynomial eigenvalues: C_lambda and p must be > 0");
    if (L < 1) throw ConfigError("polynomial eigenvalues: an explicit L >= 1 is required");
    std::vector<double> out(static_cast<std::size_t>(L));
    for (int j = 1; j <= L; ++j) out[static_cast<std::size_t>(j - 1)] = c_lambda * std::pow(static_cast<double>(j), -p);
    return out;
}

std::vector<FunctionVec> sample_covariates(const GaussianCovariateModel& model, std::size_t n, Rng& rng) {
    model.validate();
    if (n == 0) throw ConfigError("sample_covariates: n must be >= 1");
    const std::size_t L = std::max(model.rank(), model.mean.size());
    std::vector<double> scale(model.rank());
    for (std::size_t j = 0; j < model.rank(); ++j) scale[j] = std::sqrt(model.eigenvalues[j]);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<FunctionVec> out;
    out.reserve(n);
    std::vector<double> c(L);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < L; ++j) c[j] = model.mean.coeff(static_cast<int>(j) + 1);
        for (std::size_t j = 0; j < model.rank(); ++j) c[j] += scale[j] * normal(rng);
        out.emplace_back(c, model.mean.tail_norm_sq());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regression targets

RegressionTarget RegressionTarget::exp_linear(FunctionVec theta) {
    RegressionTarget t;
    t.kind_ = Kind::ExpLinear;
    t.theta_ = std::move(theta);
    return t;
}

RegressionTarget RegressionTarget::cos_linear(FunctionVec theta) {
    RegressionTarget t;
    t.kind_ = Kind::CosLinear;
    t.theta_ = std::move(theta);
    return t;
}

RegressionTarget RegressionTarget::quadratic(FunctionVec theta) {
    RegressionTarget t;
    t.kind_ = Kind::Quadratic;
    t.theta_ = std::move(theta);
    return t;
}

RegressionTarget RegressionTarget::poly_coord(std::vector<PolyTerm> terms) {
    if (terms.empty()) throw ConfigError("PolyCoord target needs at least one term");
    const std::size_t P = terms.front().exponents.size();
    if (P == 0) throw ConfigError("PolyCoord exponents must have length >= 1");
    for (const auto& term : terms) {
        if (term.exponents.size() != P) throw ConfigError("PolyCoord exponents must share one length");
        for (int e : term.exponents)
            if (e < 0) throw ConfigError("PolyCoord exponents must be >= 0");
        if (!std::isfinite(term.coefficient)) throw ConfigError("PolyCoord coefficient must be finite");
    }
    RegressionTarget t;
    t.kind_ = Kind::PolyCoord;
    t.terms_ = std::move(terms);
    t.poly_dim_ = static_cast<int>(P);
    return t;
}

int RegressionTarget::poly_degree() const {
    if (kind_ != Kind::PolyCoord) return -1;
    int d = 0;
    for (const auto& term : terms_) d = std::max(d, std::accumulate(term.exponents.begin(), term.exponents.end(), 0));
    return d;
}

double RegressionTarget::ridge_profile(double s, int k) const {
    switch (kind_) {
    case Kind::ExpLinear:
        return std::exp(s);
    case Kind::CosLinear:
        switch (k % 4) {
        case 0: return std::cos(s);
        case 1: return -std::sin(s);
        case 2: return -std::cos(s);
        default: return std::sin(s);
        }
    case Kind::Quadratic:
        if (k == 0) return s * s;
        if (k == 1) return 2.0 * s;
        if (k == 2) return 2.0;
        return 0.0;
    case Kind::PolyCoord:
        break;
    }
    throw UnsupportedError("ridge profile requested for a PolyCoord target");
}

std::vector<double> RegressionTarget::poly_coordinates(const FunctionVec& x) const {
    std::vector<double> c(static_cast<std::size_t>(poly_dim_));
    for (int l = 1; l <= poly_dim_; ++l) c[static_cast<std::size_t>(l - 1)] = x.coeff(l);
    return c;
}

double RegressionTarget::poly_taylor_coefficient(std::span<const double> c, std::span<const int> m) const {
    double sum = 0.0;
    for (const auto& term : terms_) {
        double prod = term.coefficient;
        for (std::size_t l = 0; l < m.size() && prod != 0.0; ++l) {
            const int e = term.exponents[l];
            if (e < m[l]) {
                prod = 0.0;
                break;
            }
            prod *= static_cast<double>(binomial(e, m[l])) * int_pow(c[l], e - m[l]);
        }
        sum += prod;
    }
    return sum;
}

double RegressionTarget::poly_hs_norm(std::span<const double> c, int k, bool absolute) const {
    double acc = 0.0;
    const double kfact = factorial(k);
    for (const auto& m : exponents_of_degree(poly_dim_, k)) {
        double G;
        if (absolute) {
            G = 0.0;
            for (const auto& term : terms_) {
                double prod = std::abs(term.coefficient);
                for (std::size_t l = 0; l < m.size(); ++l) {
                    const int e = term.exponents[l];
                    if (e < m[l]) {
                        prod = 0.0;
                        break;
                    }
                    prod *= static_cast<double>(binomial(e, m[l])) * int_pow(c[l], e - m[l]);
                }
                G += prod;
            }
        } else {
            G = poly_taylor_coefficient(c, m);
        }
        double mfact = 1.0;
        for (int v : m) mfact *= factorial(v);
        acc += kfact * mfact * G * G;
    }
    return std::sqrt(acc);
}

double RegressionTarget::value(const FunctionVec& x) const {
    if (kind_ != Kind::PolyCoord) return ridge_profile(inner_product(theta_, x), 0);
    const auto c = poly_coordinates(x);
    double sum = 0.0;
    for (const auto& term : terms_) sum += term.coefficient * monomial(c, term.exponents);
    return sum;
}

double RegressionTarget::derivative(const FunctionVec& x, std::span<const FunctionVec> directions) const {
    const int k = static_cast<int>(directions.size());
    if (kind_ != Kind::PolyCoord) {
        double r = ridge_profile(inner_product(theta_, x), k);
        for (const auto& u : directions) r *= inner_product(theta_, u);
        return r;
    }
    if (k > 20) throw SizingError("derivative order too large for PolyCoord expansion");
    // Expand g(x + sum_i t_i u_i) keeping only square-free monomials in t; the coefficient
    // of t_1 ... t_k is the mixed derivative.
    const std::size_t full = (std::size_t{1} << k) - 1;
    const auto c = poly_coordinates(x);
    std::vector<double> poly(full + 1), next(full + 1);
    double total = 0.0;
    for (const auto& term : terms_) {
        std::fill(poly.begin(), poly.end(), 0.0);
        poly[0] = 1.0;
        for (int l = 0; l < poly_dim_; ++l) {
            for (int p = 0; p < term.exponents[static_cast<std::size_t>(l)]; ++p) {
                for (std::size_t mask = 0; mask <= full; ++mask) {
                    double v = c[static_cast<std::size_t>(l)] * poly[mask];
                    for (int i = 0; i < k; ++i)
                        if (mask & (std::size_t{1} << i))
                            v += directions[static_cast<std::size_t>(i)].coeff(l + 1) * poly[mask ^ (std::size_t{1} << i)];
                    next[mask] = v;
                }
                poly.swap(next);
            }
        }
        total += term.coefficient * poly[full];
    }
    return total;
}

double RegressionTarget::derivative_norm(const FunctionVec& x, int k) const {
    if (k < 0) throw ConfigError("derivative order must be >= 0");
    if (kind_ != Kind::PolyCoord) {
        const double tn = std::sqrt(norm_sq(theta_));
        return std::abs(ridge_profile(inner_product(theta_, x), k)) * int_pow(tn, k);
    }
    return poly_hs_norm(poly_coordinates(x), k, false);
}

double RegressionTarget::derivative_norm_sup(const FunctionVec& x, double delta, int k) const {
    if (k < 0) throw ConfigError("derivative order must be >= 0");
    if (kind_ == Kind::PolyCoord) {
        auto c = poly_coordinates(x);
        for (double& v : c) v = std::abs(v) + delta;
        return poly_hs_norm(c, k, true);
    }
    const double tn = std::sqrt(norm_sq(theta_));
    const double s = inner_product(theta_, x);
    const double reach = delta * tn;
    double h = 0.0;
    switch (kind_) {
    case Kind::ExpLinear: h = std::exp(s + reach); break;
    case Kind::CosLinear: h = 1.0; break;
    case Kind::Quadratic: {
        const double a = std::abs(s) + reach;
        h = (k == 0) ? a * a : (k == 1) ? 2.0 * a : (k == 2) ? 2.0 : 0.0;
        break;
    }
    case Kind::PolyCoord: break;
    }
    return h * int_pow(tn, k);
}

double RegressionTarget::taylor_sum(const FunctionVec& x, const FunctionVec& h, int K) const {
    if (K < 1) return 0.0;
    if (kind_ != Kind::PolyCoord) {
        const double s = inner_product(theta_, x);
        const double t = inner_product(theta_, h);
        double sum = 0.0, power = 1.0, fact = 1.0;
        for (int k = 0; k < K; ++k) {
            if (k > 0) {
                power *= t;
                fact *= k;
            }
            sum += ridge_profile(s, k) * power / fact;
        }
        return sum;
    }
    const int top = std::min(K, poly_degree() + 1);
    const auto set = MultiIndexSet::enumerate(poly_dim_, top, std::numeric_limits<std::size_t>::max());
    const auto c = poly_coordinates(x);
    const auto hc = poly_coordinates(h);
    double sum = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) sum += poly_taylor_coefficient(c, set[i]) * monomial(hc, set[i]);
    return sum;
}

std::vector<double> frechet_coefficients(const RegressionTarget& target, const FunctionVec& x,
                                         const MultiIndexSet& set) {
    std::vector<double> G(set.size(), 0.0);
    const int J = set.dimension();
    if (target.kind() != RegressionTarget::Kind::PolyCoord) {
        std::vector<double> profile(static_cast<std::size_t>(set.degree_bound()));
        for (int k = 0; k < set.degree_bound(); ++k) profile[static_cast<std::size_t>(k)] = target.profile_derivative(x, k);
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto& k = set[i];
            double v = profile[static_cast<std::size_t>(set.degrees()[i])];
            for (int l = 0; l < J; ++l)
                v *= int_pow(target.theta().coeff(l + 1), k[static_cast<std::size_t>(l)]) / factorial(k[static_cast<std::size_t>(l)]);
            G[i] = v;
        }
        return G;
    }
    const int P = target.poly_dimension();
    std::vector<double> c(static_cast<std::size_t>(P));
    for (int l = 1; l <= P; ++l) c[static_cast<std::size_t>(l - 1)] = x.coeff(l);
    MultiIndex m(static_cast<std::size_t>(P));
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& k = set[i];
        bool outside = false;
        for (int l = P; l < J; ++l) outside |= k[static_cast<std::size_t>(l)] != 0;
        if (outside) continue;  // g does not depend on coordinates beyond P
        for (int l = 0; l < P; ++l) m[static_cast<std::size_t>(l)] = (l < J) ? k[static_cast<std::size_t>(l)] : 0;
        G[i] = target.taylor_coefficient(c, m);
    }
    return G;
}

double taylor_polynomial(const RegressionTarget& target, const FunctionVec& x, const MultiIndexSet& set,
                         std::span<const double> coords) {
    const auto G = frechet_coefficients(target, x, set);
    const auto row = monomial_row(coords, set);
    double sum = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) sum += G[i] * row[i];
    return sum;
}

// ---------------------------------------------------------------------------
// Noise and responses

std::vector<double> draw_noise(const NoiseModel& noise, std::size_t n, Rng& rng) {
    if (!(noise.sigma >= 0.0) || !std::isfinite(noise.sigma)) throw ConfigError("noise.sigma must be finite and >= 0");
    std::vector<double> eps(n, 0.0);
    switch (noise.law) {
    case NoiseModel::Law::Gaussian: {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& e : eps) e = noise.sigma * normal(rng);
        break;
    }
    case NoiseModel::Law::Uniform: {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        const double half_width = noise.sigma * std::sqrt(3.0);
        for (double& e : eps) e = half_width * unif(rng);
        break;
    }
    case NoiseModel::Law::None:
        break;
    }
    return eps;
}

Responses respond(const RegressionTarget& target, const NoiseModel& noise, std::span<const FunctionVec> X,
                  Rng& rng) {
    Responses out;
    out.eps = draw_noise(noise, X.size(), rng);
    out.y.resize(X.size());
    for (std::size_t j = 0; j < X.size(); ++j) out.y[j] = target.value(X[j]) + out.eps[j];
    return out;
}

SmallBallCondition check_small_ball_condition(const GaussianCovariateModel& model, const FunctionVec& x,
                                              double delta, double c2_star_override) {
    model.validate();
    if (!(delta > 0.0)) throw ConfigError("small-ball condition: delta must be > 0");
    SmallBallCondition out;
    const std::size_t L = std::max({model.rank(), model.mean.size(), x.size()});
    double sup = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
        const int l = static_cast<int>(j) + 1;
        const double z = model.mean.coeff(l) - x.coeff(l);
        if (z == 0.0) continue;
        if (j >= model.rank()) {
            sup = std::numeric_limits<double>::infinity();
            break;
        }
        sup = std::max(sup, z * z / model.eigenvalues[j]);
    }
    if (model.mean.tail_norm_sq() + x.tail_norm_sq() > 0.0) sup = std::numeric_limits<double>::infinity();
    out.sup_ratio = sup;
    out.c2_star_tight = sup / (delta * delta);
    out.c2_star_used = (c2_star_override >= 0.0) ? c2_star_override : out.c2_star_tight;
    out.c1 = 1.0 + 2.0 * out.c2_star_used;
    out.c2 = 1.0;
    out.holds = std::isfinite(sup) && sup <= out.c2_star_used * delta * delta * (1.0 + 1e-12);
    return out;
}

}  // namespace funloc
