#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "funloc/errors.hpp"
#include "funloc/estimator.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace funloc;

namespace {

EstimatorConfig config(int J, int K, double delta) {
    EstimatorConfig c;
    c.J = J;
    c.K = K;
    c.delta = delta;
    return c;
}

}  // namespace

TEST_CASE("neighbourhood mask uses the full distance") {
    const FunctionVec x({0.0, 0.0});
    std::vector<FunctionVec> X{x, FunctionVec({0.3, 0.4}), FunctionVec({0.3, 0.3}, 0.05),
                               FunctionVec({0.0, 0.0, 0.39}), FunctionVec({0.2}, 0.2)};
    // distances: 0, 0.5, sqrt(0.23), 0.39, sqrt(0.24)
    CHECK(neighborhood_mask(X, x, 0.4) == std::vector<bool>{true, false, false, true, false});
    CHECK(neighborhood_mask(X, x, 0.49) == std::vector<bool>{true, false, true, true, true});
    CHECK(neighborhood_mask(X, x, 0.5) == std::vector<bool>{true, true, true, true, true});
}

TEST_CASE("config validation") {
    Dataset d;
    d.covariates = {FunctionVec({0.0})};
    d.responses = {1.0};
    CHECK_THROWS_AS(estimate_at(d, FunctionVec(), config(1, 1, 0.0)), ConfigError);
    CHECK_THROWS_AS(estimate_at(d, FunctionVec(), config(1, 1, 1.0)), ConfigError);
    CHECK_THROWS_AS(estimate_at(d, FunctionVec(), config(0, 1, 0.5)), ConfigError);
    d.responses.push_back(2.0);
    CHECK_THROWS_AS(estimate_at(d, FunctionVec(), config(1, 1, 0.5)), ConfigError);
}

TEST_CASE("empty neighbourhood gives zero") {
    Dataset d;
    d.covariates = {FunctionVec({5.0}), FunctionVec({-5.0})};
    d.responses = {1.0, 2.0};
    const auto design = assemble(d, FunctionVec({0.0}), config(2, 3, 0.5));
    CHECK(design.n_local == 0);
    CHECK(design.M.isZero(0.0));
    CHECK(design.Yv.isZero(0.0));
    const auto r = solve(design);
    CHECK(r.g_hat == 0.0);
    CHECK(r.n_local == 0);
}

TEST_CASE("regulariser diagonal") {
    Dataset d;
    d.covariates = {FunctionVec({0.0})};
    d.responses = {1.0};
    const auto design = assemble(d, FunctionVec({0.0}), config(2, 4, 0.5));
    CHECK(design.S_diag[0] == 1.0);
    for (Eigen::Index i = 0; i < design.S_diag.size(); ++i) {
        CHECK(design.S_diag[i] > 0.0);
        CHECK(design.S_diag[i] <= 1.0);
        CHECK(design.S_diag[i] == 1.0 / static_cast<double>(design.indices.multinomials()[static_cast<std::size_t>(i)]));
    }
}

TEST_CASE("duplicated local point doubles M") {
    const FunctionVec x({0.1, -0.2, 0.0});
    const FunctionVec X({0.2, -0.1, 0.05});
    Dataset one{{X}, {1.5}};
    Dataset two{{X, X}, {1.5, 1.5}};
    const auto cfg = config(3, 3, 0.5);
    const auto a = assemble(one, x, cfg);
    const auto b = assemble(two, x, cfg);
    CHECK((b.M - 2.0 * a.M).cwiseAbs().maxCoeff() == 0.0);
    CHECK((b.Yv - 2.0 * a.Yv).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("locally constant fit has a closed form") {
    Dataset d{{FunctionVec({0.0}), FunctionVec({0.1}), FunctionVec({-0.1}), FunctionVec({3.0})}, {1.0, 2.0, 3.0, 100.0}};
    const auto r = estimate_at(d, FunctionVec({0.0}), config(1, 1, 0.5));
    CHECK(r.n_local == 3);
    CHECK(r.g_hat == 1.5);
    CHECK(r.first_derivative.empty());

    // g == c, noiseless: c m / (m + 1)
    std::mt19937_64 rng(5);
    auto data = testdata::random_dataset(rng, 40, 3, 0.4, FunctionVec({0.0}));
    std::fill(data.responses.begin(), data.responses.end(), 2.5);
    const auto e = estimate_at(data, FunctionVec({0.0}), config(2, 1, 0.45));
    const double m = static_cast<double>(e.n_local);
    CHECK(e.g_hat == doctest::Approx(2.5 * m / (m + 1.0)).epsilon(1e-14));
}

TEST_CASE("g_hat is the first coefficient and the first derivative block follows") {
    std::mt19937_64 rng(2);
    const FunctionVec x({0.2, 0.1});
    const auto data = testdata::random_dataset(rng, 80, 2, 0.5, x);
    const auto r = estimate_at(data, x, config(2, 3, 0.6));
    CHECK(r.g_hat == r.alpha[0]);
    REQUIRE(r.first_derivative.size() == 2);
    CHECK(r.first_derivative[0] == r.alpha[1]);
    CHECK(r.first_derivative[1] == r.alpha[2]);
}

TEST_CASE("property: agreement with the long-double normal-equations oracle") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> jd(1, 3), kd(1, 3), nd(5, 100);
    for (int trial = 0; trial < 50; ++trial) {
        const int J = jd(rng), K = kd(rng);
        const FunctionVec x({0.1 * trial / 50.0, -0.05, 0.02, 0.0});
        const auto data = testdata::random_dataset(rng, static_cast<std::size_t>(nd(rng)), 4, 0.5, x);
        const auto r = estimate_at(data, x, config(J, K, 0.7));
        const auto ref = oracle::local_fit(data, x, J, K, 0.7);
        CHECK(r.n_local == ref.n_local);
        CHECK(std::abs(r.g_hat - static_cast<double>(ref.alpha[0])) <= 1e-8);
        for (std::size_t i = 0; i < ref.alpha.size(); ++i)
            CHECK(std::abs(r.alpha[static_cast<Eigen::Index>(i)] - static_cast<double>(ref.alpha[i])) <=
                  1e-8 * (1.0 + std::abs(static_cast<double>(ref.alpha[i]))));
    }
}

TEST_CASE("property: residual contract and positive semidefinite M") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 60; ++trial) {
        const int J = 1 + trial % 4, K = 1 + (trial / 4) % 4;
        const FunctionVec x({0.0, 0.0});
        const auto data = testdata::random_dataset(rng, 150, 5, 0.4, x);
        const auto design = assemble(data, x, config(J, K, 0.5));
        const auto r = solve(design);
        CHECK(r.solver_report.residual <= 1e-10 * design.Yv.norm());
        Eigen::MatrixXd A = design.M;
        A.diagonal() += design.S_diag;
        CHECK((A * r.alpha - design.Yv).norm() <= 1e-10 * design.Yv.norm() + 1e-300);
        for (int probe = 0; probe < 5; ++probe) {
            Eigen::VectorXd v(design.M.rows());
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = z(rng);
            CHECK(v.dot(design.M * v) >= -1e-10 * v.squaredNorm());
        }
    }
}

TEST_CASE("property: permutation invariance") {
    std::mt19937_64 rng(29);
    const FunctionVec x({0.1, 0.0, -0.1});
    auto data = testdata::random_dataset(rng, 120, 3, 0.5, x);
    const auto cfg = config(3, 3, 0.6);
    const double g0 = estimate_at(data, x, cfg).g_hat;
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        Dataset s;
        for (auto p : perm) {
            s.covariates.push_back(data.covariates[p]);
            s.responses.push_back(data.responses[p]);
        }
        CHECK(std::abs(estimate_at(s, x, cfg).g_hat - g0) <= 1e-12);
    }
}

TEST_CASE("property: far points have no influence") {
    std::mt19937_64 rng(31);
    const FunctionVec x({0.0, 0.0});
    const auto data = testdata::random_dataset(rng, 200, 2, 0.8, x);
    const auto cfg = config(2, 3, 0.5);
    const auto mask = neighborhood_mask(data.covariates, x, cfg.delta);
    Dataset local;
    for (std::size_t j = 0; j < data.size(); ++j)
        if (mask[j]) {
            local.covariates.push_back(data.covariates[j]);
            local.responses.push_back(data.responses[j]);
        }
    const auto a = assemble(data, x, cfg);
    const auto b = assemble(local, x, cfg);
    CHECK(a.M == b.M);
    CHECK(a.Yv == b.Yv);
    CHECK(estimate_at(data, x, cfg).g_hat == estimate_at(local, x, cfg).g_hat);
}

TEST_CASE("property: linearity in the responses") {
    std::mt19937_64 rng(37);
    const FunctionVec x({0.0, 0.1});
    auto data = testdata::random_dataset(rng, 90, 2, 0.5, x);
    const auto cfg = config(2, 2, 0.6);
    const auto base = estimate_at(data, x, cfg);
    auto shifted = data;
    for (auto& y : shifted.responses) y += 0.75;
    Dataset ones = data;
    std::fill(ones.responses.begin(), ones.responses.end(), 1.0);
    const double unit = estimate_at(ones, x, cfg).g_hat;
    CHECK(estimate_at(shifted, x, cfg).g_hat == doctest::Approx(base.g_hat + 0.75 * unit).epsilon(1e-12));
}

TEST_CASE("property: polynomial data are reproduced by the unregularised system") {
    std::mt19937_64 rng(41);
    const FunctionVec x({0.1, -0.1});
    for (int K = 1; K <= 3; ++K) {
        auto data = testdata::random_dataset(rng, 150, 2, 0.5, x);
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double a = data.covariates[j].coeff(1) - 0.1, b = data.covariates[j].coeff(2) + 0.1;
            data.responses[j] = 2.0 + (K > 1 ? 0.5 * a - b : 0.0) + (K > 2 ? a * a - 0.3 * a * b + 0.2 * b * b : 0.0);
        }
        const auto design = assemble(data, x, config(2, K, 0.6));
        const Eigen::VectorXd alpha = design.M.ldlt().solve(design.Yv);
        CHECK(alpha[0] == doctest::Approx(2.0).epsilon(1e-8));
    }
}

TEST_CASE("non-finite data are rejected") {
    Dataset d{{FunctionVec({0.0})}, {std::nan("")}};
    CHECK_THROWS_AS(estimate_at(d, FunctionVec({0.0}), config(1, 2, 0.5)), NumericalError);
}
