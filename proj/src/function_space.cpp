#include "funloc/function_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "funloc/errors.hpp"

namespace funloc {

Basis Basis::trigonometric() {
    return Basis(Kind::TrigonometricFourier, [](int l, double t) {
        if (l == 1) return 1.0;
        const int m = l / 2;
        const double arg = 2.0 * std::numbers::pi * m * t;
        return std::numbers::sqrt2 * ((l % 2 == 0) ? std::cos(arg) : std::sin(arg));
    });
}

Basis Basis::user_supplied(Evaluator evaluator) {
    if (!evaluator) throw ConfigError("user-supplied basis needs an evaluator");
    return Basis(Kind::UserSuppliedOrthonormal, std::move(evaluator));
}

double Basis::operator()(int l, double t) const {
    if (l < 1) throw ConfigError("basis index must be >= 1, got " + std::to_string(l));
    return evaluator_(l, t);
}

FunctionVec::FunctionVec(std::vector<double> coeffs, double tail_norm_sq)
    : coeffs_(std::move(coeffs)), tail_norm_sq_(tail_norm_sq) {
    if (coeffs_.empty()) throw ConfigError("FunctionVec needs at least one coefficient");
    if (!(tail_norm_sq_ >= 0.0) || !std::isfinite(tail_norm_sq_))
        throw ConfigError("FunctionVec tail_norm_sq must be finite and >= 0");
}

FunctionVec FunctionVec::unit(int l) {
    if (l < 1) throw ConfigError("unit vector index must be >= 1");
    std::vector<double> c(static_cast<std::size_t>(l), 0.0);
    c.back() = 1.0;
    return FunctionVec(std::move(c));
}

double inner_product(const FunctionVec& f, const FunctionVec& g) {
    const auto a = f.coeffs();
    const auto b = g.coeffs();
    const std::size_t n = std::min(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm_sq(const FunctionVec& f) {
    double s = 0.0;
    for (double c : f.coeffs()) s += c * c;
    return s + f.tail_norm_sq();
}

FunctionVec subtract(const FunctionVec& f, const FunctionVec& g) {
    const std::size_t n = std::max(f.size(), g.size());
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int l = static_cast<int>(i) + 1;
        d[i] = f.coeff(l) - g.coeff(l);
    }
    return FunctionVec(std::move(d), f.tail_norm_sq() + g.tail_norm_sq());
}

double distance_sq(const FunctionVec& f, const FunctionVec& g) {
    const std::size_t n = std::max(f.size(), g.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int l = static_cast<int>(i) + 1;
        const double d = f.coeff(l) - g.coeff(l);
        s += d * d;
    }
    return s + f.tail_norm_sq() + g.tail_norm_sq();
}

HeadProjection project_head(const FunctionVec& f, int J) {
    if (J < 1) throw ConfigError("project_head: J must be >= 1");
    HeadProjection out;
    out.head.assign(static_cast<std::size_t>(J), 0.0);
    const auto c = f.coeffs();
    double tail = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (i < out.head.size())
            out.head[i] = c[i];
        else
            tail += c[i] * c[i];
    }
    out.tail_norm_sq = tail + f.tail_norm_sq();
    return out;
}

std::vector<double> midpoint_grid(std::size_t n_points) {
    std::vector<double> t(n_points);
    const double h = 1.0 / static_cast<double>(n_points);
    for (std::size_t i = 0; i < n_points; ++i) t[i] = (static_cast<double>(i) + 0.5) * h;
    return t;
}

FunctionVec analyze_grid(std::span<const double> samples, const Basis& basis, int L) {
    if (L < 1) throw ConfigError("analyze_grid: L must be >= 1");
    const std::size_t n = samples.size();
    if (n < 4 * static_cast<std::size_t>(L))
        throw ConfigError("analyze_grid: grid of " + std::to_string(n) + " points is too coarse for L = " +
                          std::to_string(L) + " (need N >= 4L)");
    const auto t = midpoint_grid(n);
    const double h = 1.0 / static_cast<double>(n);

    double total = 0.0;
    for (double v : samples) {
        if (!std::isfinite(v)) throw NumericalError("analyze_grid: non-finite sample");
        total += v * v;
    }
    total *= h;

    std::vector<double> c(static_cast<std::size_t>(L), 0.0);
    double head = 0.0;
    for (int l = 1; l <= L; ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += samples[i] * basis(l, t[i]);
        c[l - 1] = s * h;
        head += c[l - 1] * c[l - 1];
    }
    return FunctionVec(std::move(c), std::max(0.0, total - head));
}

std::vector<double> synthesize(const FunctionVec& f, const Basis& basis, std::size_t n_points) {
    const auto t = midpoint_grid(n_points);
    std::vector<double> v(n_points, 0.0);
    const auto c = f.coeffs();
    for (std::size_t i = 0; i < n_points; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < c.size(); ++l) s += c[l] * basis(static_cast<int>(l) + 1, t[i]);
        v[i] = s;
    }
    return v;
}

}  // namespace funloc
