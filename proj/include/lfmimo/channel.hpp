// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>

#include "errors.hpp"
#include "rng.hpp"

namespace lfmimo {

struct SystemConfig {
    int nt = 1;           // transmit antennas
    int nr = 1;           // receive antennas
    int k = 1;            // spatial streams, 1 <= k <= min(nt, nr)
    double p_total = 1.0; // total transmit power
    double sigma2_n = 1.0; // per-entry noise variance

    void validate() const {
        if (nt < 1 || nr < 1)
            throw DomainError("config: nt and nr must be positive");
        if (k < 1 || k > std::min(nt, nr))
            throw DomainError("config: k must satisfy 1 <= k <= min(nt, nr)");
        if (!(p_total > 0.0))
            throw DomainError("config: p_total must be positive");
        if (!(sigma2_n > 0.0))
            throw DomainError("config: sigma2_n must be positive");
    }
};

struct ChannelMatrix {
    Eigen::MatrixXcd h;  // nr x nt
};

// i.i.d. Rayleigh draw, entries CN(0,1). Column-major fill order; identical
// (config, seed) yields bit-identical matrices.
inline ChannelMatrix generate_channel(const SystemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Eigen::MatrixXcd h(cfg.nr, cfg.nt);
    for (int j = 0; j < cfg.nt; ++j)
        for (int i = 0; i < cfg.nr; ++i)
            h(i, j) = rng.cnormal();
    return {std::move(h)};
}

struct EigBasis {
    Eigen::MatrixXcd u1;     // nt x k, orthonormal columns
    Eigen::VectorXd lambda1; // k leading eigenvalues of H^H H, descending
};

// Leading eigenpairs of H^H H. Column phases are fixed so that the
// largest-magnitude entry of each eigenvector is real positive (ties broken
// toward the lowest row index).
inline EigBasis eig_basis(const ChannelMatrix& ch, int k) {
    const auto& h = ch.h;
    if (k < 1 || k > h.rows() || k > h.cols())
        throw DomainError("eig_basis: k must satisfy 1 <= k <= min(nt, nr)");

    Eigen::MatrixXcd hh = h.adjoint() * h;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hh);
    if (es.info() != Eigen::Success)
        throw RankDeficient("eig_basis: eigendecomposition failed");

    const int n = int(hh.rows());
    EigBasis out;
    out.lambda1.resize(k);
    out.u1.resize(h.cols(), k);
    for (int i = 0; i < k; ++i) {
        out.lambda1(i) = es.eigenvalues()(n - 1 - i);
        out.u1.col(i) = es.eigenvectors().col(n - 1 - i);
    }

    if (!(out.lambda1(0) > 0.0) || out.lambda1(k - 1) < 1e-12 * out.lambda1(0))
        throw RankDeficient("eig_basis: effective rank below k");

    for (int i = 0; i < k; ++i) {
        int arg = 0;
        double best = -1.0;
        for (int r = 0; r < out.u1.rows(); ++r) {
            double m = std::abs(out.u1(r, i));
            if (m > best) {
                best = m;
                arg = r;
            }
        }
        std::complex<double> z = out.u1(arg, i);
        if (best > 0.0)
            out.u1.col(i) *= std::conj(z) / best;
    }
    return out;
}

}  // namespace lfmimo
