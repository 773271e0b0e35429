#pragma once

#include <random>
#include <vector>

#include "funloc/estimator.hpp"

namespace testdata {

/// Curves with `L` coefficients drawn uniformly from [-scale, scale] around the site.
inline funloc::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t L, double scale,
                                      const funloc::FunctionVec& site) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::normal_distribution<double> z;
    funloc::Dataset d;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> c(L);
        for (std::size_t l = 0; l < L; ++l) c[l] = site.coeff(static_cast<int>(l + 1)) + u(rng);
        d.covariates.emplace_back(std::move(c));
        d.responses.push_back(z(rng));
    }
    return d;
}

}  // namespace testdata
