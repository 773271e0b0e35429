#include "funloc/poly_index.hpp"

#include <map>
#include <string>

#include "funloc/errors.hpp"

namespace funloc {

namespace {

void append_degree(int J, int remaining, int slot, MultiIndex& current, std::vector<MultiIndex>& out) {
    if (slot == J - 1) {
        current[slot] = remaining;
        out.push_back(current);
        return;
    }
    for (int v = remaining; v >= 0; --v) {
        current[slot] = v;
        append_degree(J, remaining - v, slot + 1, current, out);
    }
    current[slot] = 0;
}

}  // namespace

std::uint64_t binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        // r * (n - k + i) / i is exact at each step; divide by gcd first to delay overflow.
        std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
        std::uint64_t den = static_cast<std::uint64_t>(i);
        std::uint64_t a = r, b = den;
        while (b) { const auto t = a % b; a = b; b = t; }
        const std::uint64_t g = a;
        const std::uint64_t r_red = r / g;
        den /= g;
        num /= den;  // den divides num after removing the gcd with r
        std::uint64_t prod;
        if (__builtin_mul_overflow(r_red, num, &prod))
            throw SizingError("binomial(" + std::to_string(n) + ", " + std::to_string(k) + ") overflows 64 bits");
        r = prod;
    }
    return r;
}

std::uint64_t multinomial(std::span<const int> k) {
    std::uint64_t r = 1;
    int running = 0;
    for (int kl : k) {
        if (kl < 0) throw ConfigError("multi-index entries must be >= 0");
        running += kl;
        std::uint64_t prod;
        if (__builtin_mul_overflow(r, binomial(running, kl), &prod))
            throw SizingError("multinomial coefficient overflows 64 bits");
        r = prod;
    }
    return r;
}

double monomial(std::span<const double> coords, std::span<const int> k) {
    if (coords.size() != k.size()) throw ConfigError("monomial: dimension mismatch");
    double r = 1.0;
    for (std::size_t l = 0; l < k.size(); ++l)
        for (int p = 0; p < k[l]; ++p) r *= coords[l];
    return r;
}

MultiIndexSet MultiIndexSet::enumerate(int J, int K, std::size_t cap) {
    if (J < 1) throw ConfigError("enumerate: J must be >= 1");
    if (K < 1) throw ConfigError("enumerate: K must be >= 1");
    if (K > kMaxDegreeBound)
        throw SizingError("enumerate: K = " + std::to_string(K) + " exceeds the guard K <= " +
                          std::to_string(kMaxDegreeBound));
    const std::uint64_t count = binomial(J + K - 1, J);
    if (count > cap)
        throw SizingError("enumerate: binomial(J+K-1, J) = " + std::to_string(count) + " exceeds the cap " +
                          std::to_string(cap));

    MultiIndexSet set;
    set.J_ = J;
    set.K_ = K;
    set.indices_.reserve(count);
    MultiIndex current(static_cast<std::size_t>(J), 0);
    for (int d = 0; d < K; ++d) append_degree(J, d, 0, current, set.indices_);

    std::map<MultiIndex, std::size_t> position;
    const std::size_t n = set.indices_.size();
    set.multinomials_.resize(n);
    set.degrees_.resize(n);
    set.parent_.assign(n, 0);
    set.parent_var_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& k = set.indices_[i];
        position.emplace(k, i);
        set.multinomials_[i] = multinomial(k);
        int deg = 0;
        for (int v : k) deg += v;
        set.degrees_[i] = deg;
        if (deg == 0) continue;
        std::size_t l = 0;
        while (k[l] == 0) ++l;
        MultiIndex p = k;
        --p[l];
        set.parent_[i] = position.at(p);
        set.parent_var_[i] = static_cast<int>(l);
    }
    return set;
}

std::vector<std::size_t> MultiIndexSet::linear_positions() const {
    std::vector<std::size_t> out;
    if (K_ < 2) return out;
    out.reserve(static_cast<std::size_t>(J_));
    for (std::size_t i = 1; i <= static_cast<std::size_t>(J_); ++i) out.push_back(i);
    return out;
}

void monomial_row(std::span<const double> coords, const MultiIndexSet& set, std::span<double> out) {
    if (coords.size() != static_cast<std::size_t>(set.dimension()))
        throw ConfigError("monomial_row: coordinate length does not match J");
    if (out.size() != set.size()) throw ConfigError("monomial_row: output length does not match the set");
    out[0] = 1.0;
    for (std::size_t i = 1; i < set.size(); ++i)
        out[i] = out[set.parent(i)] * coords[static_cast<std::size_t>(set.parent_variable(i))];
}

std::vector<double> monomial_row(std::span<const double> coords, const MultiIndexSet& set) {
    std::vector<double> out(set.size());
    monomial_row(coords, set, out);
    return out;
}

}  // namespace funloc
