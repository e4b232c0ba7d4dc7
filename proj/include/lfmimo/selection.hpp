// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "channel.hpp"
#include "codebook.hpp"
#include "errors.hpp"
#include "objectives.hpp"
#include "zfdfe.hpp"

namespace lfmimo {

struct SelectionResult {
    std::size_t index = 0;
    Eigen::VectorXd log_mse;       // per-stream log-MSE of the winning entry
    double objective_value = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> per_entry_values;  // retained only on request
};

namespace detail {

template <typename Analyze>
SelectionResult select_by(const Codebook& cb, const SystemConfig& cfg, const Analyze& analyze,
                          bool keep_per_entry) {
    if (cb.nt != cfg.nt || cb.k != cfg.k)
        throw ShapeMismatch("select: codebook shape does not match config");
    if (cb.entries.empty())
        throw TooFewEntries("select: empty codebook");

    SelectionResult out;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    if (keep_per_entry)
        out.per_entry_values.reserve(cb.entries.size());

    for (std::size_t j = 0; j < cb.entries.size(); ++j) {
        double value = std::numeric_limits<double>::infinity();
        Eigen::VectorXd lvec;
        try {
            value = analyze(cb.entries[j], lvec);
        } catch (const RankDeficient&) {
            value = std::numeric_limits<double>::infinity();
        }
        if (keep_per_entry)
            out.per_entry_values.push_back(value);
        if (value < best) {
            best = value;
            out.index = j;
            out.log_mse = lvec;
            out.objective_value = value;
            found = true;
        }
    }
    if (!found)
        throw AllInfeasible("select: every codebook entry is rank deficient for this channel");
    return out;
}

}  // namespace detail

// argmin over codebook entries of the objective on the ZF-DFE log-MSE vector.
// Rank-deficient entries score +infinity; ties resolve to the lowest index.
inline SelectionResult select_precoder(const ChannelMatrix& ch, const Codebook& cb,
                                       const ObjectiveKind& kind, const SystemConfig& cfg,
                                       bool keep_per_entry = false) {
    return detail::select_by(
        cb, cfg,
        [&](const Eigen::MatrixXcd& entry, Eigen::VectorXd& lvec) {
            const MseAnalysis an = mse_analysis(ch, power_scale(entry, cfg), cfg);
            lvec = an.log_mse;
            return eval_objective(kind, an.log_mse);
        },
        keep_per_entry);
}

// Same scan for a linear ZF receiver (B = 0): the objective is evaluated on
// the linear per-stream log-MSEs ln N_ii.
inline SelectionResult select_precoder_linear(const ChannelMatrix& ch, const Codebook& cb,
                                              const ObjectiveKind& kind, const SystemConfig& cfg,
                                              bool keep_per_entry = false) {
    return detail::select_by(
        cb, cfg,
        [&](const Eigen::MatrixXcd& entry, Eigen::VectorXd& lvec) {
            const LinearZfAnalysis an = linear_zf_analysis(ch, power_scale(entry, cfg), cfg);
            lvec = an.log_mse;
            return eval_objective(kind, an.log_mse);
        },
        keep_per_entry);
}

// Norm-based ordering baseline: the k largest-norm columns of H, in
// decreasing norm order, ties toward the lower column index. The result is
// reported as the ordered column tuple plus its lexicographic rank in the
// permutation codebook; log_mse is left empty (no power/noise context here).
inline std::vector<int> ordering_norm(const ChannelMatrix& ch, int k) {
    const int nt = int(ch.h.cols());
    if (k < 1 || k > nt)
        throw DomainError("ordering_norm: need 1 <= k <= nt");
    std::vector<int> idx(nt);
    for (int i = 0; i < nt; ++i)
        idx[i] = i;
    std::vector<double> norms(nt);
    for (int i = 0; i < nt; ++i)
        norms[i] = ch.h.col(i).norm();
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return norms[a] > norms[b]; });
    idx.resize(k);
    return idx;
}

// Greedy residual-projection ordering: each step picks the column with the
// largest component outside the span of those already chosen (ties toward the
// lower index).
inline std::vector<int> ordering_greedy(const ChannelMatrix& ch, int k) {
    const int nt = int(ch.h.cols());
    const int nr = int(ch.h.rows());
    if (k < 1 || k > nt)
        throw DomainError("ordering_greedy: need 1 <= k <= nt");
    std::vector<int> order;
    std::vector<bool> used(nt, false);
    Eigen::MatrixXcd basis(nr, k);  // orthonormal basis of the selected span
    for (int step = 0; step < k; ++step) {
        int bestc = -1;
        double best = -1.0;
        for (int c = 0; c < nt; ++c) {
            if (used[c]) continue;
            Eigen::VectorXcd r = ch.h.col(c);
            for (int m = 0; m < step; ++m)
                r -= basis.col(m) * (basis.col(m).adjoint() * ch.h.col(c))(0);
            const double score = r.squaredNorm();
            if (score > best) {
                best = score;
                bestc = c;
            }
        }
        used[bestc] = true;
        order.push_back(bestc);
        Eigen::VectorXcd r = ch.h.col(bestc);
        for (int m = 0; m < step; ++m)
            r -= basis.col(m) * (basis.col(m).adjoint() * r)(0);
        const double nrm = r.norm();
        basis.col(step) = nrm > 0.0 ? (r / nrm).eval() : Eigen::VectorXcd::Zero(nr).eval();
    }
    return order;
}

inline SelectionResult ordering_result(const std::vector<int>& order, int nt) {
    SelectionResult out;
    out.index = permutation_rank(order, nt);
    return out;
}

inline SelectionResult select_ordering_norm(const ChannelMatrix& ch, int k) {
    return ordering_result(ordering_norm(ch, k), int(ch.h.cols()));
}

inline SelectionResult select_ordering_greedy(const ChannelMatrix& ch, int k) {
    return ordering_result(ordering_greedy(ch, k), int(ch.h.cols()));
}

enum class DistortionKind { MinSnrLoss, DetLoss };

struct DistortionEstimate {
    double mean_gap = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;  // effective samples after skips
    std::int64_t n_skipped = 0;
    DistortionKind kind = DistortionKind::MinSnrLoss;
};

// Monte Carlo estimate of the quantization loss of a codebook against the
// equal-log-MSE optimum:
//   MinSnrLoss: E{ (det Lambda)^(1/k) p_total / (k sigma2_n)
//                  - max_j min_i snr_i(P^j) }
//   DetLoss:    E{ (det Lambda - max_j det(Pbar_j^H H^H H Pbar_j)) / sigma2_n }
inline DistortionEstimate estimate_distortion(const Codebook& cb, DistortionKind kind,
                                              const SystemConfig& cfg, std::int64_t n_samples,
                                              std::uint64_t seed) {
    if (cb.nt != cfg.nt || cb.k != cfg.k)
        throw ShapeMismatch("estimate_distortion: codebook shape does not match config");
    if (n_samples < 1)
        throw TooFewEntries("estimate_distortion: need at least one sample");

    double mean = 0.0, m2 = 0.0;
    std::int64_t used = 0, skipped = 0;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        const ChannelMatrix ch = generate_channel(cfg, derive_seed(seed, 0xd157ull, s));
        double gap = 0.0;
        try {
            const EigBasis eb = eig_basis(ch, cfg.k);
            const double det_lambda = eb.lambda1.prod();
            double best = -std::numeric_limits<double>::infinity();
            if (kind == DistortionKind::MinSnrLoss) {
                for (const auto& entry : cb.entries) {
                    try {
                        const MseAnalysis an = mse_analysis(ch, power_scale(entry, cfg), cfg);
                        best = std::max(best, an.snr.minCoeff());
                    } catch (const RankDeficient&) {
                    }
                }
                if (!std::isfinite(best)) {
                    ++skipped;
                    continue;
                }
                const double opt =
                    std::pow(det_lambda, 1.0 / double(cfg.k)) * cfg.p_total / (double(cfg.k) * cfg.sigma2_n);
                gap = opt - best;
            } else {
                for (const auto& entry : cb.entries) {
                    const Eigen::MatrixXcd he = ch.h * entry;
                    best = std::max(best, (he.adjoint() * he).determinant().real());
                }
                gap = (det_lambda - best) / cfg.sigma2_n;
            }
        } catch (const RankDeficient&) {
            ++skipped;
            continue;
        }
        ++used;
        const double delta = gap - mean;
        mean += delta / double(used);
        m2 += delta * (gap - mean);
    }
    if (used == 0)
        throw AllInfeasible("estimate_distortion: every sample was skipped");

    DistortionEstimate out;
    out.kind = kind;
    out.mean_gap = mean;
    out.n_samples = used;
    out.n_skipped = skipped;
    out.std_error = used > 1 ? std::sqrt(m2 / double(used - 1) / double(used)) : 0.0;
    return out;
}

struct DistortionBound {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
};

// Packing-density distortion bounds. The ensemble expectations are estimated
// by Monte Carlo; density_d is the user-supplied covering density D in (0, 1].
//   MinSnrLoss (proj2 metric): E{(det Lambda)^(1/k)} / sigma2_n
//                              - E{sigma_k^2(H)} / sigma2_n * D (1 - d^2/4)
//   DetLoss (fs metric):       E{det Lambda} (1 - D cos^2(d/2)) / sigma2_n
inline DistortionBound evaluate_distortion_bound(const Codebook& cb, DistortionKind kind,
                                                 const SystemConfig& cfg,
                                                 std::optional<double> density_d,
                                                 std::int64_t n_samples, std::uint64_t seed) {
    if (!density_d.has_value())
        throw MissingDensity("evaluate_distortion_bound: packing density D is required");
    const double dd = *density_d;
    if (!(dd > 0.0) || dd > 1.0)
        throw DomainError("evaluate_distortion_bound: density D must lie in (0, 1]");
    if (n_samples < 2)
        throw TooFewEntries("evaluate_distortion_bound: need at least two samples");
    const double dist = cb.min_distance;
    if (!std::isfinite(dist))
        throw DomainError("evaluate_distortion_bound: codebook min_distance must be finite");
    if (kind == DistortionKind::MinSnrLoss && cb.metric != PackingMetric::Proj2)
        throw DomainError("evaluate_distortion_bound: MinSnrLoss bound needs a proj2-metric codebook");
    if (kind == DistortionKind::DetLoss && cb.metric != PackingMetric::FS)
        throw DomainError("evaluate_distortion_bound: DetLoss bound needs an fs-metric codebook");

    double mean_a = 0.0, m2_a = 0.0;  // (det Lambda)^(1/k) or det Lambda
    double mean_b = 0.0, m2_b = 0.0;  // sigma_k^2(H)
    std::int64_t used = 0;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        const ChannelMatrix ch = generate_channel(cfg, derive_seed(seed, 0xb0bull, s));
        EigBasis eb;
        try {
            eb = eig_basis(ch, cfg.k);
        } catch (const RankDeficient&) {
            continue;
        }
        const double det_lambda = eb.lambda1.prod();
        const double a = kind == DistortionKind::MinSnrLoss
                             ? std::pow(det_lambda, 1.0 / double(cfg.k))
                             : det_lambda;
        const double b = eb.lambda1(cfg.k - 1);
        ++used;
        double delta = a - mean_a;
        mean_a += delta / double(used);
        m2_a += delta * (a - mean_a);
        delta = b - mean_b;
        mean_b += delta / double(used);
        m2_b += delta * (b - mean_b);
    }
    if (used < 2)
        throw AllInfeasible("evaluate_distortion_bound: too many skipped samples");

    const double se_a = std::sqrt(m2_a / double(used - 1) / double(used));
    const double se_b = std::sqrt(m2_b / double(used - 1) / double(used));

    DistortionBound out;
    out.n_samples = used;
    if (kind == DistortionKind::MinSnrLoss) {
        const double w = dd * (1.0 - dist * dist / 4.0);
        out.value = mean_a / cfg.sigma2_n - mean_b / cfg.sigma2_n * w;
        out.std_error = std::sqrt(se_a * se_a + w * w * se_b * se_b) / cfg.sigma2_n;
    } else {
        const double c = std::cos(dist / 2.0);
        const double w = 1.0 - dd * c * c;
        out.value = mean_a * w / cfg.sigma2_n;
        out.std_error = se_a * w / cfg.sigma2_n;
    }
    return out;
}

}  // namespace lfmimo
