// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "lfmimo/gmd.hpp"
#include "lfmimo/rng.hpp"
#include "support/oracles.hpp"

using namespace lfmimo;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

double geo_mean(const Eigen::VectorXd& d) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) acc += std::log(d(i));
    return std::exp(acc / double(d.size()));
}

void check_gmd_contract(const Eigen::VectorXd& delta, const GmdResult& g, double tol_rel) {
    const Eigen::Index k = delta.size();
    const double dmax = delta.maxCoeff();
    const double gbar = geo_mean(delta);

    // factorization: Diag(delta) * V == Q * R
    const Eigen::MatrixXd lhs = delta.asDiagonal() * g.v;
    const Eigen::MatrixXd rhs = g.q * g.r;
    REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() <= tol_rel * dmax);

    // orthogonality
    REQUIRE((g.v.transpose() * g.v - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() <=
            1e-10);
    REQUIRE((g.q.transpose() * g.q - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() <=
            1e-10);

    // upper triangular with equal diagonal at the geometric mean
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) REQUIRE(g.r(i, j) == 0.0);
        REQUIRE(std::abs(g.r(i, i) - gbar) <= tol_rel * gbar);
    }
    const double spread = g.r.diagonal().maxCoeff() - g.r.diagonal().minCoeff();
    REQUIRE(spread <= 1e-8 * gbar);
}

}  // namespace

TEST_CASE("equal_diag_rotation on already-equal singular values is the identity") {
    const Eigen::VectorXd delta = vec({2.0, 2.0, 2.0});
    const GmdResult g = equal_diag_rotation(delta);
    REQUIRE((g.v - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((g.q - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((g.r - 2.0 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("equal_diag_rotation handles k = 1") {
    const GmdResult g = equal_diag_rotation(vec({0.7}));
    REQUIRE(g.v(0, 0) == 1.0);
    REQUIRE(g.q(0, 0) == 1.0);
    REQUIRE(g.r(0, 0) == 0.7);
}

TEST_CASE("2x2 rotation matches the bisection oracle") {
    const Eigen::VectorXd delta = vec({1.0, 0.5});
    const GmdResult g = equal_diag_rotation(delta);

    const oracle::Gmd2Oracle ref = oracle::gmd2_bisect(1.0, 0.5);
    REQUIRE(g.r(0, 0) == Catch::Approx(ref.rdiag).margin(1e-12));
    REQUIRE(g.r(1, 1) == Catch::Approx(ref.rdiag).margin(1e-12));
    REQUIRE(std::abs(g.v(0, 0)) == Catch::Approx(std::cos(ref.theta)).margin(1e-12));
    REQUIRE(std::abs(g.v(1, 0)) == Catch::Approx(std::sin(ref.theta)).margin(1e-12));

    // geometric mean of {1, 1/2} is 2^-1/2
    REQUIRE(g.r(0, 0) == Catch::Approx(0.7071067811865476).margin(1e-9));
    check_gmd_contract(delta, g, 1e-12);
}

TEST_CASE("random spectra satisfy the GMD contract") {
    Rng rng(314159);
    for (int rep = 0; rep < 1000; ++rep) {
        const int k = 2 + int(rng.below(7));  // 2..8
        Eigen::VectorXd delta(k);
        for (int i = 0; i < k; ++i) {
            // log-uniform over three decades keeps conditioning moderate
            delta(i) = std::pow(10.0, -1.5 + 3.0 * rng.uniform());
        }
        std::sort(delta.data(), delta.data() + k, std::greater<double>());
        const GmdResult g = equal_diag_rotation(delta);
        check_gmd_contract(delta, g, 1e-9);

        // determinant is preserved
        double logdet_r = 0.0;
        for (int i = 0; i < k; ++i) logdet_r += std::log(g.r(i, i));
        double logdet_d = 0.0;
        for (int i = 0; i < k; ++i) logdet_d += std::log(delta(i));
        REQUIRE(logdet_r == Catch::Approx(logdet_d).margin(1e-9));
    }
}

TEST_CASE("diagonal of R depends only on the multiset of singular values") {
    const Eigen::VectorXd a = vec({3.0, 1.0, 0.25, 0.1});
    const Eigen::VectorXd b = vec({3.0, 1.0, 0.25, 0.1});
    // same values, feed them through distinct ordering paths by permuting the
    // spectrum; the routine sorts internally so results must agree
    Eigen::VectorXd c(4);
    c << 0.25, 3.0, 0.1, 1.0;
    const GmdResult ga = equal_diag_rotation(a);
    const GmdResult gb = equal_diag_rotation(b);
    const GmdResult gc = equal_diag_rotation(c);
    REQUIRE((ga.r.diagonal() - gb.r.diagonal()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 4; ++i)
        REQUIRE(gc.r(i, i) == Catch::Approx(ga.r(i, i)).epsilon(1e-12));
    check_gmd_contract(c, gc, 1e-9);
}

TEST_CASE("equal_diag_rotation rejects bad spectra") {
    REQUIRE_THROWS_AS(equal_diag_rotation(vec({1.0, 0.0})), DomainError);
    REQUIRE_THROWS_AS(equal_diag_rotation(vec({1.0, -2.0})), DomainError);
    REQUIRE_THROWS_AS(equal_diag_rotation(Eigen::VectorXd()), DomainError);
    REQUIRE_THROWS_AS(equal_diag_rotation(vec({1.0, std::numeric_limits<double>::quiet_NaN()})),
                      DomainError);
}
