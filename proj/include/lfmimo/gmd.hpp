// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace lfmimo {

struct GmdResult {
    Eigen::MatrixXd v;  // k x k orthogonal right factor
    Eigen::MatrixXd q;  // k x k orthogonal left factor
    Eigen::MatrixXd r;  // k x k upper triangular, equal diagonal
};

// Equal-diagonal QR of a positive diagonal matrix:
//
//   Diag(delta) * V = Q * R,   r_11 = ... = r_kk = geomean(delta).
//
// Pairwise rotation scheme. The working matrix starts as Diag(delta). Step i
// first permutes the trailing diagonal (symmetric row/column swaps, so the
// trailing block stays diagonal) to place delta_p >= gbar >= delta_q at
// positions (i, i+1); such a pair always exists because the geometric mean of
// the remaining entries is invariantly gbar. A right rotation with
//
//   c = sqrt((gbar^2 - delta_q^2) / (delta_p^2 - delta_q^2)),  s = sqrt(1 - c^2)
//
// followed by the left rotation that re-zeros the subdiagonal sets the pivot
// (i,i) to gbar exactly and leaves delta_p * delta_q / gbar at (i+1, i+1),
// preserving the trailing product. Fill-in lands strictly above the diagonal
// only, so R stays upper triangular throughout.
inline GmdResult equal_diag_rotation(const Eigen::VectorXd& delta) {
    const int k = int(delta.size());
    if (k < 1)
        throw DomainError("equal_diag_rotation: empty input");
    for (int i = 0; i < k; ++i)
        if (!std::isfinite(delta(i)) || !(delta(i) > 0.0))
            throw DomainError("equal_diag_rotation: entries must be positive and finite");

    GmdResult out;
    out.v = Eigen::MatrixXd::Identity(k, k);
    out.q = Eigen::MatrixXd::Identity(k, k);
    out.r = Eigen::MatrixXd(delta.asDiagonal());
    if (k == 1)
        return out;

    const double gbar = std::exp(delta.array().log().sum() / double(k));
    auto& r = out.r;
    auto& v = out.v;
    auto& q = out.q;

    // symmetric swap of positions a, b; right ops mirror into v, left into q
    auto swap_positions = [&](int a, int b) {
        r.col(a).swap(r.col(b));
        v.col(a).swap(v.col(b));
        r.row(a).swap(r.row(b));
        q.col(a).swap(q.col(b));
    };

    for (int i = 0; i + 1 < k; ++i) {
        int p = i, qi = i;
        for (int m = i; m < k; ++m) {
            if (r(m, m) > r(p, p)) p = m;
            if (r(m, m) < r(qi, qi)) qi = m;
        }
        if (!(r(p, p) - r(qi, qi) > 1e-15 * gbar))
            continue;  // remaining entries already equal gbar
        if (p != i) {
            swap_positions(i, p);
            if (qi == i) qi = p;
        }
        if (qi != i + 1)
            swap_positions(i + 1, qi);

        const double dp = r(i, i), dq = r(i + 1, i + 1);

        double c2 = (gbar * gbar - dq * dq) / ((dp - dq) * (dp + dq));
        c2 = std::clamp(c2, 0.0, 1.0);
        const double c = std::sqrt(c2);
        const double s = std::sqrt(1.0 - c2);

        // right rotation on columns (i, i+1)
        for (Eigen::MatrixXd* m : {&r, &v}) {
            for (int row = 0; row < k; ++row) {
                const double a = (*m)(row, i), b = (*m)(row, i + 1);
                (*m)(row, i) = c * a + s * b;
                (*m)(row, i + 1) = -s * a + c * b;
            }
        }

        // left rotation zeroing the (i+1, i) entry created above
        const double nrm = std::hypot(c * dp, s * dq);
        const double c1 = c * dp / nrm, s1 = s * dq / nrm;
        for (int col = 0; col < k; ++col) {
            const double a = r(i, col), b = r(i + 1, col);
            r(i, col) = c1 * a + s1 * b;
            r(i + 1, col) = -s1 * a + c1 * b;
        }
        for (int row = 0; row < k; ++row) {
            const double a = q(row, i), b = q(row, i + 1);
            q(row, i) = c1 * a + s1 * b;
            q(row, i + 1) = -s1 * a + c1 * b;
        }
        r(i + 1, i) = 0.0;
    }
    return out;
}

}  // namespace lfmimo
