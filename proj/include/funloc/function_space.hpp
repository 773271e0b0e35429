#pragma once

#include <functional>
#include <span>
#include <vector>

namespace funloc {

/// Orthonormal basis {phi_l}, l >= 1, of L2([0,1]).
///
/// The built-in trigonometric system is phi_1 = 1, phi_{2m} = sqrt(2) cos(2 pi m t),
/// phi_{2m+1} = sqrt(2) sin(2 pi m t). A user-supplied evaluator is trusted to be
/// orthonormal; nothing checks it.
class Basis {
public:
    enum class Kind { TrigonometricFourier, UserSuppliedOrthonormal };
    using Evaluator = std::function<double(int, double)>;

    static Basis trigonometric();
    static Basis user_supplied(Evaluator evaluator);

    Kind kind() const { return kind_; }

    /// phi_l(t) for l >= 1.
    double operator()(int l, double t) const;

private:
    Basis(Kind kind, Evaluator evaluator) : kind_(kind), evaluator_(std::move(evaluator)) {}

    Kind kind_;
    Evaluator evaluator_;
};

/// Element of L2([0,1]) stored as basis coefficients (c_1, ..., c_L) plus the squared
/// norm of whatever lies beyond index L. Index l is stored at coeffs[l - 1].
class FunctionVec {
public:
    FunctionVec() : coeffs_(1, 0.0) {}
    explicit FunctionVec(std::vector<double> coeffs, double tail_norm_sq = 0.0);

    static FunctionVec zero(std::size_t length) { return FunctionVec(std::vector<double>(length, 0.0)); }
    /// Unit vector phi_l.
    static FunctionVec unit(int l);

    std::span<const double> coeffs() const { return coeffs_; }
    std::size_t size() const { return coeffs_.size(); }
    double tail_norm_sq() const { return tail_norm_sq_; }

    /// Coefficient of phi_l (1-based); zero beyond the stored length.
    double coeff(int l) const {
        return (l >= 1 && static_cast<std::size_t>(l) <= coeffs_.size()) ? coeffs_[l - 1] : 0.0;
    }

private:
    std::vector<double> coeffs_;
    double tail_norm_sq_ = 0.0;
};

/// Sum of products of coefficients; tails are treated as mutually orthogonal.
double inner_product(const FunctionVec& f, const FunctionVec& g);

double norm_sq(const FunctionVec& f);

/// f - g coefficientwise. The tail masses add (orthogonal-tail convention), which is
/// exact whenever one operand is finite-rank.
FunctionVec subtract(const FunctionVec& f, const FunctionVec& g);

/// ||f - g||^2 without materialising the difference.
double distance_sq(const FunctionVec& f, const FunctionVec& g);

struct HeadProjection {
    std::vector<double> head;
    double tail_norm_sq = 0.0;
};

/// (<f,phi_1>, ..., <f,phi_J>) and the squared norm of the remainder.
HeadProjection project_head(const FunctionVec& f, int J);

/// Midpoint-rule nodes t_i = (i + 1/2)/N of the uniform grid on [0,1].
std::vector<double> midpoint_grid(std::size_t n_points);

/// Coefficients of a curve sampled at the midpoint grid. Requires samples.size() >= 4L.
FunctionVec analyze_grid(std::span<const double> samples, const Basis& basis, int L);

/// Values of f (head only) at the midpoint grid of size n_points.
std::vector<double> synthesize(const FunctionVec& f, const Basis& basis, std::size_t n_points);

}  // namespace funloc
