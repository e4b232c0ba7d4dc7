// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "channel.hpp"
#include "errors.hpp"
#include "gmd.hpp"

namespace lfmimo {

struct Precoder {
    Eigen::MatrixXcd p;      // nt x k
    bool normalized = false; // true: P^H P = I; false: power-scaled
};

inline Precoder power_scale(const Eigen::MatrixXcd& pbar, const SystemConfig& cfg) {
    if (pbar.rows() != cfg.nt || pbar.cols() != cfg.k)
        throw ShapeMismatch("power_scale: precoder must be nt x k");
    return {std::sqrt(cfg.p_total / double(cfg.k)) * pbar, false};
}

struct MseAnalysis {
    Eigen::MatrixXcd n;       // k x k ZF error covariance, sigma2_n (P^H H^H H P)^-1
    Eigen::MatrixXcd l_chol;  // lower Cholesky factor of n, positive diagonal
    Eigen::VectorXd log_mse;  // l_i = ln L_ii^2
    Eigen::VectorXd snr;      // 1 / L_ii^2
    Eigen::VectorXd eigs_n;   // eigenvalues of n, descending
};

namespace detail {

// Element-wise complex Cholesky A = L L^H with real positive diagonal.
// Pivots at or below 1e-14 * trace(A) reject the matrix.
inline Eigen::MatrixXcd cholesky_lower(const Eigen::MatrixXcd& a) {
    const int k = int(a.rows());
    if (a.cols() != k || k < 1)
        throw ShapeMismatch("cholesky_lower: square input required");
    const double tr = a.trace().real();
    Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
        double d = a(j, j).real() - l.row(j).head(j).squaredNorm();
        if (!(d > 1e-14 * tr))
            throw RankDeficient("cholesky_lower: nonpositive pivot");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < k; ++i) {
            std::complex<double> acc = a(i, j);
            for (int m = 0; m < j; ++m)
                acc -= l(i, m) * std::conj(l(j, m));
            l(i, j) = acc / ljj;
        }
    }
    return l;
}

// Solve (L L^H) X = B in place given the lower factor.
inline void cholesky_solve(const Eigen::MatrixXcd& l, Eigen::MatrixXcd& b) {
    l.triangularView<Eigen::Lower>().solveInPlace(b);
    l.triangularView<Eigen::Lower>().adjoint().solveInPlace(b);
}

}  // namespace detail

// Per-stream MSE analysis of the zero-forcing DFE for transmit matrix P:
// N = sigma2_n (P^H H^H H P)^-1, N = L L^H, MSE_k = L_kk^2.
inline MseAnalysis mse_analysis(const ChannelMatrix& ch, const Precoder& pre, const SystemConfig& cfg) {
    cfg.validate();
    if (pre.p.rows() != ch.h.cols())
        throw ShapeMismatch("mse_analysis: precoder rows must equal nt");
    const int k = int(pre.p.cols());
    if (k != cfg.k)
        throw ShapeMismatch("mse_analysis: precoder columns must equal config k");
    if (!pre.normalized) {
        const double pw = (pre.p.adjoint() * pre.p).trace().real();
        if (pw > cfg.p_total + 1e-9)
            throw DomainError("mse_analysis: transmit power exceeds p_total");
    }

    const Eigen::MatrixXcd hp = ch.h * pre.p;  // nr x k
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(hp);
    const auto& sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(k - 1) < 1e-10 * sv(0))
        throw RankDeficient("mse_analysis: H*P rank below k");

    const Eigen::MatrixXcd gram = hp.adjoint() * hp;
    const Eigen::MatrixXcd lg = detail::cholesky_lower(gram);
    Eigen::MatrixXcd ninv = Eigen::MatrixXcd::Identity(k, k);
    detail::cholesky_solve(lg, ninv);

    MseAnalysis out;
    out.n = cfg.sigma2_n * ninv;
    out.n = (0.5 * (out.n + out.n.adjoint())).eval();
    out.l_chol = detail::cholesky_lower(out.n);

    out.log_mse.resize(k);
    out.snr.resize(k);
    for (int i = 0; i < k; ++i) {
        const double lii = out.l_chol(i, i).real();
        out.log_mse(i) = 2.0 * std::log(lii);
        out.snr(i) = 1.0 / (lii * lii);
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(out.n);
    out.eigs_n = es.eigenvalues().reverse();
    return out;
}

struct DfeDesign {
    Eigen::MatrixXcd g;  // k x nr feedforward
    Eigen::MatrixXcd b;  // k x k strictly lower feedback
    Eigen::MatrixXcd c;  // k x k unit-diagonal lower triangular, C = Diag(L) L^-1
    MseAnalysis analysis;
};

// Zero-forcing DFE: G H P - B = I, G = C (H P)^+, B = C - I. The error
// covariance of the decision inputs under correct past decisions is
// C N C^H = Diag(L_11^2, ..., L_kk^2).
inline DfeDesign design_receiver(const ChannelMatrix& ch, const Precoder& pre, const SystemConfig& cfg) {
    DfeDesign out;
    out.analysis = mse_analysis(ch, pre, cfg);
    const int k = int(pre.p.cols());
    const auto& l = out.analysis.l_chol;

    Eigen::MatrixXcd c = Eigen::MatrixXcd::Identity(k, k);
    l.triangularView<Eigen::Lower>().solveInPlace(c);            // L^-1
    c = (l.diagonal().asDiagonal() * c).eval();                  // Diag(L) L^-1
    for (int i = 0; i < k; ++i)
        c(i, i) = 1.0;
    out.c = c;
    out.b = c - Eigen::MatrixXcd::Identity(k, k);

    // (H P)^+ = (P^H H^H H P)^-1 (H P)^H = (N / sigma2_n) (H P)^H
    const Eigen::MatrixXcd hp = ch.h * pre.p;
    out.g = c * (out.analysis.n / cfg.sigma2_n) * hp.adjoint();
    return out;
}

// Equal log-MSE transmit design: P = sqrt(p_total / k) U1 V where V comes from
// the equal-diagonal rotation of Diag(lambda)^(-1/2). Every stream then sees
// MSE = det(N)^(1/k), which is simultaneously optimal for every Schur-convex
// objective of the log-MSE vector.
inline Precoder optimal_precoder(const ChannelMatrix& ch, const SystemConfig& cfg) {
    cfg.validate();
    const EigBasis eb = eig_basis(ch, cfg.k);
    const Eigen::VectorXd delta = eb.lambda1.array().rsqrt();
    const GmdResult gm = equal_diag_rotation(delta);
    const Eigen::MatrixXcd pbar = eb.u1 * gm.v.cast<std::complex<double>>();
    return power_scale(pbar, cfg);
}

struct LinearZfAnalysis {
    Eigen::MatrixXcd n;       // same error covariance as the DFE analysis
    Eigen::VectorXd log_mse;  // l_i = ln N_ii
    Eigen::VectorXd snr;      // 1 / N_ii
    Eigen::VectorXd eigs_n;   // eigenvalues of n, descending
};

// Linear ZF special case (B = 0, G = (H P)^+): per-stream MSEs are the
// diagonal entries of N.
inline LinearZfAnalysis linear_zf_analysis(const ChannelMatrix& ch, const Precoder& pre,
                                           const SystemConfig& cfg) {
    const MseAnalysis an = mse_analysis(ch, pre, cfg);
    LinearZfAnalysis out;
    out.n = an.n;
    out.eigs_n = an.eigs_n;
    const int k = int(an.n.rows());
    out.log_mse.resize(k);
    out.snr.resize(k);
    for (int i = 0; i < k; ++i) {
        const double nii = an.n(i, i).real();
        out.log_mse(i) = std::log(nii);
        out.snr(i) = 1.0 / nii;
    }
    return out;
}

}  // namespace lfmimo
