#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace funloc {

using MultiIndex = std::vector<int>;

inline constexpr std::size_t kDefaultIndexCap = 20000;
inline constexpr int kMaxDegreeBound = 20;

/// Total-degree multi-index set {k in N0^J : |k| <= K - 1}.
///
/// Indices are graded, and within one degree ordered lexicographically descending
/// (for J = 2: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2)), so the zero index is first.
/// Every nonzero index also records a parent k - e_l (l its first nonzero slot), which
/// lets monomial rows be built with one multiplication per entry.
class MultiIndexSet {
public:
    static MultiIndexSet enumerate(int J, int K, std::size_t cap = kDefaultIndexCap);

    int dimension() const { return J_; }
    int degree_bound() const { return K_; }
    std::size_t size() const { return indices_.size(); }

    const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
    const std::vector<MultiIndex>& indices() const { return indices_; }
    std::span<const std::uint64_t> multinomials() const { return multinomials_; }
    std::span<const int> degrees() const { return degrees_; }

    std::size_t parent(std::size_t i) const { return parent_[i]; }
    int parent_variable(std::size_t i) const { return parent_var_[i]; }

    /// Positions of the J degree-one indices (e_1, ..., e_J); empty when K == 1.
    std::vector<std::size_t> linear_positions() const;

private:
    int J_ = 0;
    int K_ = 0;
    std::vector<MultiIndex> indices_;
    std::vector<std::uint64_t> multinomials_;
    std::vector<int> degrees_;
    std::vector<std::size_t> parent_;
    std::vector<int> parent_var_;
};

/// binomial(n, k) with overflow detection; throws SizingError on overflow.
std::uint64_t binomial(int n, int k);

/// |k|! / (k_1! ... k_J!), exact; throws SizingError on overflow.
std::uint64_t multinomial(std::span<const int> k);

/// prod_l coords_l^{k_l} with 0^0 = 1.
double monomial(std::span<const double> coords, std::span<const int> k);

/// (monomial(coords, k))_{k in set}, in set order. coords.size() must equal set.dimension().
std::vector<double> monomial_row(std::span<const double> coords, const MultiIndexSet& set);

/// Same as monomial_row, writing into out (size set.size()).
void monomial_row(std::span<const double> coords, const MultiIndexSet& set, std::span<double> out);

}  // namespace funloc
