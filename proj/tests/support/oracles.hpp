// SPDX-License-Identifier: Apache-2.0
#pragma once

// Test-side oracles. Each one recomputes a quantity through a route that is
// independent of the library implementation it checks.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lfmimo/rng.hpp"

namespace oracle {

// Eigenvalues of a 2x2 or 3x3 Hermitian matrix from the characteristic
// polynomial in closed form (trigonometric method for the cubic), descending.
inline std::vector<double> hermitian_eigs_charpoly(const Eigen::MatrixXcd& a) {
    const int n = int(a.rows());
    std::vector<double> out;
    if (n == 1) {
        out = {a(0, 0).real()};
    } else if (n == 2) {
        const double tr = a.trace().real();
        const double det = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)).real();
        const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
        out = {tr / 2.0 + disc, tr / 2.0 - disc};
    } else if (n == 3) {
        const double q = a.trace().real() / 3.0;
        const Eigen::MatrixXcd b = a - q * Eigen::MatrixXcd::Identity(3, 3);
        const double p2 = (b * b).trace().real() / 6.0;
        const double p = std::sqrt(std::max(0.0, p2));
        if (p < 1e-300) {
            out = {q, q, q};
        } else {
            const Eigen::MatrixXcd c = b / p;
            double r = c.determinant().real() / 2.0;
            r = std::clamp(r, -1.0, 1.0);
            const double phi = std::acos(r) / 3.0;
            const double e1 = q + 2.0 * p * std::cos(phi);
            const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
            const double e2 = 3.0 * q - e1 - e3;
            out = {e1, e2, e3};
        }
    } else {
        throw std::invalid_argument("charpoly oracle supports n <= 3");
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

// Library-independent Cholesky route via Eigen's LLT.
inline Eigen::MatrixXcd llt_lower(const Eigen::MatrixXcd& a) {
    return Eigen::LLT<Eigen::MatrixXcd>(a).matrixL();
}

// Equal-diagonal rotation angle for Diag(d1, d2), d1 > d2 > 0, found by
// bisection on g(theta) = cos^2 d1^2 + sin^2 d2^2 - d1 d2 over [0, pi/2].
struct Gmd2Oracle {
    double theta = 0.0;
    double rdiag = 0.0;
};

inline Gmd2Oracle gmd2_bisect(double d1, double d2) {
    auto g = [&](double th) {
        const double c = std::cos(th), s = std::sin(th);
        return c * c * d1 * d1 + s * s * d2 * d2 - d1 * d2;
    };
    double lo = 0.0, hi = std::numbers::pi / 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    Gmd2Oracle out;
    out.theta = 0.5 * (lo + hi);
    const double c = std::cos(out.theta), s = std::sin(out.theta);
    out.rdiag = std::sqrt(c * c * d1 * d1 + s * s * d2 * d2);
    return out;
}

// Gaussian tail probability by composite Simpson integration of the density
// (deliberately not erfc).
inline double q_simpson(double x) {
    const double a = x, b = x + 14.0;
    const int n = 200000;  // even
    const double h = (b - a) / n;
    auto phi = [](double t) {
        return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
    };
    double acc = phi(a) + phi(b);
    for (int i = 1; i < n; ++i)
        acc += phi(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

inline double q_erfc(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Exact bit error rate of Gray-labelled square 16-QAM with per-axis
// minimum-distance slicing at post-equalization SNR `snr`.
inline double ber16_exact(double snr) {
    const double x = std::sqrt(snr / 5.0);
    return (3.0 * q_erfc(x) + 2.0 * q_erfc(3.0 * x) - q_erfc(5.0 * x)) / 4.0;
}

// Rayleigh average of ber16_exact at average SNR gbar: the instantaneous SNR
// is gbar * t with t ~ Exp(1). Composite Simpson on [0, 60].
inline double ber16_rayleigh(double gbar) {
    const double a = 0.0, b = 60.0;
    const int n = 120000;  // even
    const double h = (b - a) / n;
    auto f = [&](double t) { return std::exp(-t) * ber16_exact(gbar * t); };
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

inline Eigen::MatrixXcd random_gaussian(lfmimo::Rng& rng, int rows, int cols) {
    Eigen::MatrixXcd x(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            x(i, j) = rng.cnormal();
    return x;
}

// Haar-ish random unitary / Stiefel point: QR of a Gaussian matrix.
inline Eigen::MatrixXcd random_stiefel(lfmimo::Rng& rng, int n, int k) {
    const Eigen::MatrixXcd x = random_gaussian(rng, n, k);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(x);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(n, k);
}

inline Eigen::MatrixXcd random_unitary(lfmimo::Rng& rng, int n) { return random_stiefel(rng, n, n); }

}  // namespace oracle
