// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "lfmimo/codebook.hpp"
#include "support/oracles.hpp"

using namespace lfmimo;

namespace {

// literal projector-difference route for the projection two-norm
double proj2_oracle(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    const Eigen::MatrixXcd diff = a * a.adjoint() - b * b.adjoint();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(diff);
    return svd.singularValues()(0);
}

}  // namespace

TEST_CASE("subspace distances on analytic pairs") {
    // one-dimensional subspaces of C^2 at angle theta
    const double theta = std::numbers::pi / 6.0;
    Eigen::MatrixXcd a(2, 1), b(2, 1);
    a << 1.0, 0.0;
    b << std::cos(theta), std::sin(theta);
    REQUIRE(dist_proj2(a, b) == Catch::Approx(std::sin(theta)).margin(1e-12));
    REQUIRE(dist_fs(a, b) == Catch::Approx(theta).margin(1e-12));

    // identical and fully orthogonal subspaces
    REQUIRE(dist_proj2(a, a) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(dist_fs(a, a) == Catch::Approx(0.0).margin(1e-12));
    Eigen::MatrixXcd e12 = Eigen::MatrixXcd::Zero(4, 2), e34 = Eigen::MatrixXcd::Zero(4, 2);
    e12(0, 0) = 1.0;
    e12(1, 1) = 1.0;
    e34(2, 0) = 1.0;
    e34(3, 1) = 1.0;
    REQUIRE(dist_proj2(e12, e34) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(dist_fs(e12, e34) == Catch::Approx(std::numbers::pi / 2.0).margin(1e-12));

    REQUIRE_THROWS_AS(dist_proj2(e12, a), ShapeMismatch);
    REQUIRE_THROWS_AS(dist_fs(e12, a), ShapeMismatch);
}

TEST_CASE("dist_proj2 equals the projector-difference spectral norm") {
    Rng rng(505);
    for (int rep = 0; rep < 60; ++rep) {
        const int nt = 3 + int(rng.below(3));
        const int k = 1 + int(rng.below(std::uint64_t(nt - 1)));
        const Eigen::MatrixXcd a = oracle::random_stiefel(rng, nt, k);
        const Eigen::MatrixXcd b = oracle::random_stiefel(rng, nt, k);
        REQUIRE(dist_proj2(a, b) == Catch::Approx(proj2_oracle(a, b)).margin(1e-10));
    }
}

TEST_CASE("subspace distances are invariant under right-unitary factors") {
    Rng rng(506);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::MatrixXcd a = oracle::random_stiefel(rng, 4, 2);
        const Eigen::MatrixXcd b = oracle::random_stiefel(rng, 4, 2);
        const Eigen::MatrixXcd u = oracle::random_unitary(rng, 2);
        const Eigen::MatrixXcd v = oracle::random_unitary(rng, 2);
        REQUIRE(dist_proj2(a * u, b * v) == Catch::Approx(dist_proj2(a, b)).margin(1e-10));
        REQUIRE(dist_fs(a * u, b * v) == Catch::Approx(dist_fs(a, b)).margin(1e-10));
    }
}

TEST_CASE("permutation codebook enumerates ordered column tuples") {
    const Codebook cb = build_permutation_codebook(4, 2);
    REQUIRE(cb.size() == 12);
    REQUIRE(cb.kind == CodebookKind::Permutation);

    // lexicographic: entry 0 picks columns (0,1), entry 1 picks (0,2)
    REQUIRE(cb.entries[0](0, 0).real() == 1.0);
    REQUIRE(cb.entries[0](1, 1).real() == 1.0);
    REQUIRE(cb.entries[1](0, 0).real() == 1.0);
    REQUIRE(cb.entries[1](2, 1).real() == 1.0);

    // rank round trip over the full enumeration
    const auto tuples = permutation_tuples(4, 2, 10000);
    REQUIRE(tuples.size() == 12);
    for (std::size_t i = 0; i < tuples.size(); ++i)
        REQUIRE(permutation_rank(tuples[i], 4) == i);

    // (0,1) and (1,0) share a column span, so the packing distance is zero
    REQUIRE(cb.min_distance == Catch::Approx(0.0).margin(1e-12));
    REQUIRE_NOTHROW(validate_codebook(cb));

    // k = 1: the four coordinate lines are mutually orthogonal
    const Codebook lines = build_permutation_codebook(4, 1);
    REQUIRE(lines.size() == 4);
    REQUIRE(lines.min_distance == Catch::Approx(1.0).margin(1e-12));

    const Codebook fig = build_permutation_codebook(5, 4);
    REQUIRE(fig.size() == 120);

    REQUIRE_THROWS_AS(build_permutation_codebook(10, 5), TooLarge);
    REQUIRE_THROWS_AS(build_permutation_codebook(3, 4), DomainError);
}

TEST_CASE("grassmann build is deterministic and traces nondecreasing quality") {
    std::vector<double> best_seen;
    const BuildTrace trace = [&](std::uint64_t, double best) { best_seen.push_back(best); };
    const Codebook a = build_grassmann_codebook(4, 2, 8, PackingMetric::Proj2, 4000, 11, trace);
    const Codebook b = build_grassmann_codebook(4, 2, 8, PackingMetric::Proj2, 4000, 11);

    REQUIRE(a.size() == 8);
    REQUIRE_NOTHROW(validate_codebook(a));
    REQUIRE(a.min_distance == b.min_distance);
    for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE((a.entries[i] - b.entries[i]).cwiseAbs().maxCoeff() == 0.0);

    REQUIRE(best_seen.size() >= 2);
    for (std::size_t i = 1; i < best_seen.size(); ++i)
        REQUIRE(best_seen[i] >= best_seen[i - 1]);
    REQUIRE(a.min_distance == best_seen.back());

    // distinct seeds explore distinct codebooks
    const Codebook c = build_grassmann_codebook(4, 2, 8, PackingMetric::Proj2, 4000, 12);
    REQUIRE((a.entries[0] - c.entries[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("repulsion finds the antipodal packing of two lines") {
    // two one-dimensional subspaces of C^2 can be made exactly orthogonal
    const Codebook cb = build_grassmann_codebook(2, 1, 2, PackingMetric::Proj2, 500, 3);
    REQUIRE(cb.min_distance > 0.999);
}

TEST_CASE("refined packing beats pure random sampling at equal seed") {
    const Codebook raw = build_grassmann_codebook(4, 2, 16, PackingMetric::FS, 16, 7);
    const Codebook ref = build_grassmann_codebook(4, 2, 16, PackingMetric::FS, 8000, 7);
    REQUIRE(ref.min_distance > raw.min_distance);
    REQUIRE(ref.min_distance > 0.5);  // frozen floor for this deterministic build
}

TEST_CASE("grassmann build argument validation") {
    REQUIRE_THROWS_AS(build_grassmann_codebook(2, 3, 4, PackingMetric::Proj2, 100, 1), DomainError);
    REQUIRE_THROWS_AS(build_grassmann_codebook(4, 2, 0, PackingMetric::Proj2, 100, 1), TooFewEntries);
    REQUIRE_THROWS_AS(build_grassmann_codebook(4, 2, 64, PackingMetric::Proj2, 10, 1), DomainError);

    const Codebook one = build_grassmann_codebook(4, 2, 1, PackingMetric::Proj2, 1, 1);
    REQUIRE(one.size() == 1);
    REQUIRE(std::isinf(one.min_distance));
}

TEST_CASE("codebook JSON round trip preserves every bit") {
    const Codebook cb = build_grassmann_codebook(3, 2, 6, PackingMetric::FS, 2000, 21);
    const std::string path = "roundtrip_codebook.json";
    save_codebook(cb, path);
    const Codebook back = load_codebook(path);
    std::remove(path.c_str());

    REQUIRE(back.nt == cb.nt);
    REQUIRE(back.k == cb.k);
    REQUIRE(back.kind == cb.kind);
    REQUIRE(back.metric == cb.metric);
    REQUIRE(back.build_seed == cb.build_seed);
    REQUIRE(back.min_distance == cb.min_distance);
    REQUIRE(back.size() == cb.size());
    for (std::size_t i = 0; i < cb.size(); ++i)
        REQUIRE((back.entries[i] - cb.entries[i]).cwiseAbs().maxCoeff() == 0.0);

    // the +infinity sentinel survives the trip
    const Codebook one = build_grassmann_codebook(4, 2, 1, PackingMetric::Proj2, 1, 1);
    save_codebook(one, path);
    const Codebook one_back = load_codebook(path);
    std::remove(path.c_str());
    REQUIRE(std::isinf(one_back.min_distance));
}

TEST_CASE("malformed codebook files are rejected") {
    const std::string path = "malformed_codebook.json";

    {
        nlohmann::json j = codebook_to_json(build_permutation_codebook(3, 1));
        j.erase("metric");
        std::ofstream(path) << j.dump();
        REQUIRE_THROWS_AS(load_codebook(path), DomainError);
    }
    {
        nlohmann::json j = codebook_to_json(build_permutation_codebook(3, 1));
        j["min_distance"] = 0.123;  // stored value contradicts the entries
        std::ofstream(path) << j.dump();
        REQUIRE_THROWS_AS(load_codebook(path), DomainError);
    }
    {
        nlohmann::json j = codebook_to_json(build_permutation_codebook(3, 1));
        j["entries"][0][0] = {2.0, 0.0};  // breaks orthonormality
        std::ofstream(path) << j.dump();
        REQUIRE_THROWS_AS(load_codebook(path), DomainError);
    }
    {
        std::ofstream(path) << "{ not json";
        REQUIRE_THROWS_AS(load_codebook(path), DomainError);
    }
    std::remove(path.c_str());
    REQUIRE_THROWS_AS(load_codebook("no_such_file.json"), DomainError);
}
