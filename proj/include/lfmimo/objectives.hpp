// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace lfmimo {

inline double q_func(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Gray-coded square/BPSK QAM bit error rate approximation as a function of
// post-equalization SNR. m = 2 is exact; m in {4, 16, 64} uses the
// nearest-neighbor expression clipped to [0, 1/2].
inline double qam_ber(double snr, int m) {
    if (!std::isfinite(snr) || snr < 0.0)
        throw DomainError("qam_ber: snr must be finite and nonnegative");
    if (m == 2)
        return q_func(std::sqrt(2.0 * snr));
    if (m == 4 || m == 16 || m == 64) {
        const double b = std::log2(double(m));
        const double v =
            (4.0 / b) * (1.0 - 1.0 / std::sqrt(double(m))) * q_func(std::sqrt(3.0 * snr / (double(m) - 1.0)));
        return std::clamp(v, 0.0, 0.5);
    }
    throw DomainError("qam_ber: unsupported constellation order");
}

enum class Objective { SumMse, MaxMse, AvgBer, NegMutualInfo, ProductMse };

struct ObjectiveKind {
    Objective tag = Objective::SumMse;
    int qam_m = 16;  // constellation order, AvgBer only
};

// Evaluate an objective on the per-stream log-MSE vector l (l_i = ln MSE_i).
// Every tag is nondecreasing in each coordinate. SumMse and MaxMse are
// Schur-convex in l; AvgBer is Schur-convex where the BER curve is convex in
// l, i.e. snr >= (m - 1) / 3 per stream; ProductMse is both Schur-convex and
// Schur-concave. NegMutualInfo is Schur-concave: -log(1 + e^-l) has second
// derivative -e^l / (1 + e^l)^2 < 0, so spreading the log-MSEs at fixed sum
// raises the mutual information.
inline double eval_objective(const ObjectiveKind& kind, const Eigen::VectorXd& l) {
    if (l.size() < 1)
        throw LengthMismatch("eval_objective: empty log-MSE vector");
    switch (kind.tag) {
    case Objective::SumMse:
        return l.array().exp().sum();
    case Objective::MaxMse:
        return std::exp(l.maxCoeff());
    case Objective::AvgBer: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < l.size(); ++i)
            acc += qam_ber(std::exp(-l(i)), kind.qam_m);
        return acc / double(l.size());
    }
    case Objective::NegMutualInfo: {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < l.size(); ++i)
            acc += std::log2(1.0 + std::exp(-l(i)));
        return -acc;
    }
    case Objective::ProductMse:
        return l.sum();
    }
    throw DomainError("eval_objective: unknown objective tag");
}

inline const char* objective_name(const ObjectiveKind& kind) {
    switch (kind.tag) {
    case Objective::SumMse: return "sum-mse";
    case Objective::MaxMse: return "max-mse";
    case Objective::AvgBer: return "avg-ber";
    case Objective::NegMutualInfo: return "mutual-info";
    case Objective::ProductMse: return "prod-mse";
    }
    return "unknown";
}

inline ObjectiveKind objective_from_name(const std::string& name, int qam_m = 16) {
    if (name == "sum-mse") return {Objective::SumMse, qam_m};
    if (name == "max-mse") return {Objective::MaxMse, qam_m};
    if (name == "avg-ber") return {Objective::AvgBer, qam_m};
    if (name == "mutual-info") return {Objective::NegMutualInfo, qam_m};
    if (name == "prod-mse") return {Objective::ProductMse, qam_m};
    throw DomainError("unknown objective name: " + name);
}

inline std::vector<ObjectiveKind> all_objectives(int qam_m = 16) {
    return {{Objective::SumMse, qam_m},
            {Objective::MaxMse, qam_m},
            {Objective::AvgBer, qam_m},
            {Objective::NegMutualInfo, qam_m},
            {Objective::ProductMse, qam_m}};
}

// a majorizes-below b (a is majorized by b): descending partial sums of a
// never exceed those of b (slack 1e-9) and the totals agree within 1e-9.
inline bool majorizes(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        throw LengthMismatch("majorizes: vectors must have equal length");
    if (a.size() == 0)
        throw LengthMismatch("majorizes: empty vectors");
    std::vector<double> sa(a.data(), a.data() + a.size());
    std::vector<double> sb(b.data(), b.data() + b.size());
    std::sort(sa.begin(), sa.end(), std::greater<>());
    std::sort(sb.begin(), sb.end(), std::greater<>());
    double pa = 0.0, pb = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        pa += sa[i];
        pb += sb[i];
        if (pa > pb + 1e-9)
            return false;
    }
    return std::abs(pa - pb) <= 1e-9;
}

}  // namespace lfmimo
