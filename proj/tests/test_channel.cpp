// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "lfmimo/channel.hpp"
#include "support/oracles.hpp"

using namespace lfmimo;

TEST_CASE("generate_channel is deterministic in (config, seed)") {
    SystemConfig cfg{4, 3, 2, 2.0, 1.0};
    const ChannelMatrix a = generate_channel(cfg, 42);
    const ChannelMatrix b = generate_channel(cfg, 42);
    REQUIRE(a.h.rows() == 3);
    REQUIRE(a.h.cols() == 4);
    REQUIRE((a.h - b.h).cwiseAbs().maxCoeff() == 0.0);

    const ChannelMatrix c = generate_channel(cfg, 43);
    REQUIRE((a.h - c.h).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("channel entries match CN(0,1) moments") {
    SystemConfig cfg{2, 2, 1, 1.0, 1.0};
    const int draws = 100000;
    double sum_p = 0.0, sum_re = 0.0, sum_im = 0.0;
    std::int64_t n = 0;
    for (int d = 0; d < draws; ++d) {
        const ChannelMatrix ch = generate_channel(cfg, derive_seed(7, d));
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i < 2; ++i) {
                sum_p += std::norm(ch.h(i, j));
                sum_re += ch.h(i, j).real();
                sum_im += ch.h(i, j).imag();
                ++n;
            }
    }
    REQUIRE(std::abs(sum_p / double(n) - 1.0) < 0.02);
    REQUIRE(std::abs(sum_re / double(n)) < 0.02);
    REQUIRE(std::abs(sum_im / double(n)) < 0.02);
}

TEST_CASE("config validation") {
    REQUIRE_THROWS_AS((SystemConfig{2, 2, 3, 1.0, 1.0}.validate()), DomainError);
    REQUIRE_THROWS_AS((SystemConfig{2, 2, 2, 0.0, 1.0}.validate()), DomainError);
    REQUIRE_THROWS_AS((SystemConfig{2, 2, 2, 1.0, -1.0}.validate()), DomainError);
    REQUIRE_THROWS_AS((SystemConfig{0, 2, 1, 1.0, 1.0}.validate()), DomainError);
    REQUIRE_NOTHROW((SystemConfig{4, 3, 3, 2.0, 0.5}.validate()));
}

TEST_CASE("eig_basis on diagonal and identity channels") {
    ChannelMatrix ch;
    ch.h = Eigen::MatrixXcd::Zero(2, 2);
    ch.h(0, 0) = 2.0;
    ch.h(1, 1) = 1.0;
    const EigBasis eb = eig_basis(ch, 1);
    REQUIRE(eb.lambda1(0) == Catch::Approx(4.0).margin(1e-12));
    REQUIRE(std::abs(eb.u1(0, 0) - 1.0) < 1e-12);
    REQUIRE(std::abs(eb.u1(1, 0)) < 1e-12);

    ChannelMatrix id3;
    id3.h = Eigen::MatrixXcd::Identity(3, 3);
    const EigBasis e3 = eig_basis(id3, 3);
    for (int i = 0; i < 3; ++i)
        REQUIRE(e3.lambda1(i) == Catch::Approx(1.0).margin(1e-12));
    const Eigen::MatrixXcd gram = e3.u1.adjoint() * e3.u1;
    REQUIRE((gram - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("eig_basis eigenvalues match the characteristic polynomial roots") {
    SystemConfig cfg{3, 4, 2, 1.0, 1.0};
    for (int rep = 0; rep < 50; ++rep) {
        const ChannelMatrix ch = generate_channel(cfg, derive_seed(99, rep));
        const EigBasis eb = eig_basis(ch, 2);

        const Eigen::MatrixXcd hh = ch.h.adjoint() * ch.h;
        const std::vector<double> roots = oracle::hermitian_eigs_charpoly(hh);
        REQUIRE(eb.lambda1(0) == Catch::Approx(roots[0]).epsilon(1e-9));
        REQUIRE(eb.lambda1(1) == Catch::Approx(roots[1]).epsilon(1e-9));

        // descending, nonnegative, orthonormal, small residual, fixed phase
        REQUIRE(eb.lambda1(0) >= eb.lambda1(1));
        REQUIRE(eb.lambda1(1) >= 0.0);
        REQUIRE((eb.u1.adjoint() * eb.u1 - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() <
                1e-10);
        const Eigen::MatrixXcd resid =
            hh * eb.u1 - eb.u1 * eb.lambda1.cast<std::complex<double>>().asDiagonal();
        REQUIRE(resid.cwiseAbs().maxCoeff() <= 1e-9 * eb.lambda1(0));
        for (int c = 0; c < 2; ++c) {
            int arg = 0;
            double best = -1.0;
            for (int r = 0; r < 3; ++r)
                if (std::abs(eb.u1(r, c)) > best) {
                    best = std::abs(eb.u1(r, c));
                    arg = r;
                }
            REQUIRE(eb.u1(arg, c).real() > 0.0);
            REQUIRE(std::abs(eb.u1(arg, c).imag()) <= 1e-12 * best);
        }
    }
}

TEST_CASE("eig_basis spectrum is invariant under right-unitary channel rotation") {
    SystemConfig cfg{4, 4, 3, 1.0, 1.0};
    Rng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        const ChannelMatrix ch = generate_channel(cfg, derive_seed(5, rep));
        const Eigen::MatrixXcd z = oracle::random_unitary(rng, 4);
        ChannelMatrix chz;
        chz.h = ch.h * z;
        const EigBasis a = eig_basis(ch, 3);
        const EigBasis b = eig_basis(chz, 3);
        for (int i = 0; i < 3; ++i)
            REQUIRE(b.lambda1(i) == Catch::Approx(a.lambda1(i)).epsilon(1e-10));
    }
}

TEST_CASE("eig_basis rejects rank-deficient channels and bad k") {
    ChannelMatrix ch;
    ch.h = Eigen::MatrixXcd::Zero(2, 2);
    ch.h(0, 0) = 1.0;
    REQUIRE_THROWS_AS(eig_basis(ch, 2), RankDeficient);
    REQUIRE_THROWS_AS(eig_basis(ch, 3), DomainError);
    REQUIRE_THROWS_AS(eig_basis(ch, 0), DomainError);
}
