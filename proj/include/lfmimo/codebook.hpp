// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace lfmimo {

enum class PackingMetric { Proj2, FS };
enum class CodebookKind { Grassmann, Permutation };

inline const char* metric_name(PackingMetric m) { return m == PackingMetric::Proj2 ? "proj2" : "fs"; }
inline const char* kind_name(CodebookKind k) { return k == CodebookKind::Grassmann ? "grassmann" : "permutation"; }

inline PackingMetric metric_from_name(const std::string& s) {
    if (s == "proj2") return PackingMetric::Proj2;
    if (s == "fs") return PackingMetric::FS;
    throw DomainError("unknown packing metric: " + s);
}

inline CodebookKind kind_from_name(const std::string& s) {
    if (s == "grassmann") return CodebookKind::Grassmann;
    if (s == "permutation") return CodebookKind::Permutation;
    throw DomainError("unknown codebook kind: " + s);
}

// Projection two-norm distance || P1 P1^H - P2 P2^H ||_2 between the column
// spans of two orthonormal nt x k matrices. For equal-dimension subspaces this
// equals sin of the largest principal angle, i.e. sqrt(1 - sigma_min(a^H b)^2).
// Range [0, 1].
inline double dist_proj2(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch("dist_proj2: operands must share nt x k shape");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a.adjoint() * b);
    double smin = svd.singularValues()(a.cols() - 1);
    smin = std::clamp(smin, 0.0, 1.0);
    return std::sqrt(std::max(0.0, 1.0 - smin * smin));
}

// Fubini-Study distance arccos |det(a^H b)|, range [0, pi/2].
inline double dist_fs(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeMismatch("dist_fs: operands must share nt x k shape");
    const double d = std::abs((a.adjoint() * b).determinant());
    return std::acos(std::clamp(d, 0.0, 1.0));
}

inline double packing_distance(PackingMetric m, const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return m == PackingMetric::Proj2 ? dist_proj2(a, b) : dist_fs(a, b);
}

struct Codebook {
    int nt = 0;
    int k = 0;
    CodebookKind kind = CodebookKind::Grassmann;
    PackingMetric metric = PackingMetric::Proj2;
    std::uint64_t build_seed = 0;
    double min_distance = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXcd> entries;  // each nt x k with orthonormal columns

    std::size_t size() const { return entries.size(); }
};

// Smallest pairwise packing distance; +infinity for a single entry.
inline double min_pairwise_distance(const Codebook& cb) {
    if (cb.entries.empty())
        throw TooFewEntries("min_pairwise_distance: empty codebook");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < cb.entries.size(); ++i)
        for (std::size_t j = i + 1; j < cb.entries.size(); ++j)
            best = std::min(best, packing_distance(cb.metric, cb.entries[i], cb.entries[j]));
    return best;
}

namespace detail {

inline Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& x, bool* ok = nullptr) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(x);
    Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(x.rows(), x.cols());
    if (ok) {
        double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < x.cols(); ++i) {
            const double d = std::abs(qr.matrixQR()(i, i));
            dmax = std::max(dmax, d);
            dmin = std::min(dmin, d);
        }
        *ok = dmax > 0.0 && dmin > 1e-10 * dmax;
    }
    return q;
}

inline Eigen::MatrixXcd random_stiefel(Rng& rng, int nt, int k) {
    for (;;) {
        Eigen::MatrixXcd x(nt, k);
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < nt; ++i)
                x(i, j) = rng.cnormal();
        bool ok = false;
        Eigen::MatrixXcd q = orthonormalize(x, &ok);
        if (ok)
            return q;
    }
}

}  // namespace detail

using BuildTrace = std::function<void(std::uint64_t evals, double best_min_distance)>;

// Max-min subspace packing by multi-start random sampling plus pairwise
// repulsion refinement. The budget counts candidate evaluations (one fresh
// entry or one proposed move, each scored against the rest of the codebook).
// Deterministic for fixed arguments; the trace, when supplied, observes the
// nondecreasing best-so-far minimum distance.
inline Codebook build_grassmann_codebook(int nt, int k, std::size_t size, PackingMetric metric,
                                         std::uint64_t budget, std::uint64_t seed,
                                         const BuildTrace& trace = {}) {
    if (nt < 1 || k < 1 || k > nt)
        throw DomainError("build_grassmann_codebook: need 1 <= k <= nt");
    if (size < 1)
        throw TooFewEntries("build_grassmann_codebook: size must be at least 1");
    if (budget < size)
        throw DomainError("build_grassmann_codebook: budget must be at least size");

    Codebook cb;
    cb.nt = nt;
    cb.k = k;
    cb.kind = CodebookKind::Grassmann;
    cb.metric = metric;
    cb.build_seed = seed;

    Rng rng(derive_seed(seed, 0xc0debull));
    if (size == 1) {
        cb.entries.push_back(detail::random_stiefel(rng, nt, k));
        cb.min_distance = std::numeric_limits<double>::infinity();
        if (trace)
            trace(1, cb.min_distance);
        return cb;
    }

    const std::size_t n = size;
    std::vector<Eigen::MatrixXcd> best_entries;
    double best_min = -1.0;
    std::uint64_t evals = 0;

    std::vector<Eigen::MatrixXcd> ent(n);
    Eigen::MatrixXd d(n, n);

    auto pair_min_excluding = [&](std::size_t skip) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < n; ++a) {
            if (a == skip) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (b == skip) continue;
                m = std::min(m, d(a, b));
            }
        }
        return m;
    };
    auto global_min_pair = [&](std::size_t& pi, std::size_t& pj) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a + 1 < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (d(a, b) < m) {
                    m = d(a, b);
                    pi = a;
                    pj = b;
                }
        return m;
    };
    auto note_best = [&](double cur_min) {
        if (cur_min > best_min) {
            best_min = cur_min;
            best_entries = ent;
            if (trace)
                trace(evals, best_min);
        }
    };
    // score a proposed replacement for slot v: new global minimum if accepted
    auto try_replace = [&](std::size_t v, const Eigen::MatrixXcd& cand, double cur_min) {
        ++evals;
        Eigen::VectorXd row(n);
        double rmin = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n; ++m) {
            if (m == v) continue;
            // index-ordered arguments keep the cached distances bitwise equal
            // to a from-scratch recomputation
            row(m) = m < v ? packing_distance(metric, ent[m], cand)
                           : packing_distance(metric, cand, ent[m]);
            rmin = std::min(rmin, row(m));
        }
        const double newmin = std::min(rmin, pair_min_excluding(v));
        if (newmin > cur_min + 1e-15) {
            ent[v] = cand;
            for (std::size_t m = 0; m < n; ++m)
                if (m != v) {
                    d(v, m) = row(m);
                    d(m, v) = row(m);
                }
            return true;
        }
        return false;
    };

    while (evals < budget) {
        // fresh start
        for (std::size_t i = 0; i < n; ++i) {
            ent[i] = detail::random_stiefel(rng, nt, k);
            ++evals;
        }
        for (std::size_t a = 0; a + 1 < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                d(a, b) = packing_distance(metric, ent[a], ent[b]);
                d(b, a) = d(a, b);
            }
        std::size_t pi = 0, pj = 1;
        double cur_min = global_min_pair(pi, pj);
        note_best(cur_min);

        int stall = 0;
        while (evals < budget && stall < 40) {
            cur_min = global_min_pair(pi, pj);
            bool improved = false;
            for (std::size_t victim : {pi, pj}) {
                const std::size_t other = victim == pi ? pj : pi;
                for (double s : {1.0, 0.5, 0.25}) {
                    if (evals >= budget) break;
                    const Eigen::MatrixXcd overlap = ent[other] * (ent[other].adjoint() * ent[victim]);
                    bool ok = false;
                    const Eigen::MatrixXcd cand = detail::orthonormalize(ent[victim] - s * overlap, &ok);
                    if (!ok) {
                        ++evals;
                        continue;
                    }
                    if (try_replace(victim, cand, cur_min)) {
                        improved = true;
                        break;
                    }
                }
                if (improved || evals >= budget) break;
            }
            if (!improved && evals < budget) {
                // random kick on one endpoint of the blocking pair
                const std::size_t victim = rng.bit() ? pi : pj;
                improved = try_replace(victim, detail::random_stiefel(rng, nt, k), cur_min);
            }
            if (improved) {
                stall = 0;
                note_best(global_min_pair(pi, pj));
            } else {
                ++stall;
            }
        }
    }

    cb.entries = best_entries;
    cb.min_distance = min_pairwise_distance(cb);
    if (trace)
        trace(evals, cb.min_distance);
    return cb;
}

// All ordered selections of k distinct columns out of nt, lexicographic in the
// index tuple.
inline std::vector<std::vector<int>> permutation_tuples(int nt, int k, std::size_t cap) {
    std::uint64_t count = 1;
    for (int i = 0; i < k; ++i) {
        count *= std::uint64_t(nt - i);
        if (count > cap)
            throw TooLarge("permutation codebook would exceed the entry cap");
    }
    std::vector<std::vector<int>> out;
    out.reserve(count);
    std::vector<int> tuple;
    std::vector<bool> used(nt, false);
    std::function<void()> rec = [&]() {
        if (int(tuple.size()) == k) {
            out.push_back(tuple);
            return;
        }
        for (int c = 0; c < nt; ++c) {
            if (used[c]) continue;
            used[c] = true;
            tuple.push_back(c);
            rec();
            tuple.pop_back();
            used[c] = false;
        }
    };
    rec();
    return out;
}

// Lexicographic rank of an ordered column tuple within permutation_tuples.
inline std::size_t permutation_rank(const std::vector<int>& tuple, int nt) {
    const int k = int(tuple.size());
    std::vector<bool> used(nt, false);
    std::size_t rank = 0;
    for (int j = 0; j < k; ++j) {
        std::uint64_t tail = 1;
        for (int t = 0; t < k - 1 - j; ++t)
            tail *= std::uint64_t(nt - j - 1 - t);
        int smaller = 0;
        for (int c = 0; c < tuple[j]; ++c)
            if (!used[c]) ++smaller;
        rank += std::size_t(smaller) * tail;
        used[tuple[j]] = true;
    }
    return rank;
}

inline Eigen::MatrixXcd permutation_entry(const std::vector<int>& tuple, int nt) {
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(nt, int(tuple.size()));
    for (std::size_t j = 0; j < tuple.size(); ++j)
        e(tuple[j], int(j)) = 1.0;
    return e;
}

// Column-selection-with-order codebook: one entry per ordered k-tuple of
// distinct transmit antennas, nt! / (nt-k)! total.
inline Codebook build_permutation_codebook(int nt, int k, std::size_t cap = 10000) {
    if (nt < 1 || k < 1 || k > nt)
        throw DomainError("build_permutation_codebook: need 1 <= k <= nt");
    Codebook cb;
    cb.nt = nt;
    cb.k = k;
    cb.kind = CodebookKind::Permutation;
    cb.metric = PackingMetric::Proj2;
    cb.build_seed = 0;
    for (const auto& tuple : permutation_tuples(nt, k, cap))
        cb.entries.push_back(permutation_entry(tuple, nt));
    cb.min_distance = min_pairwise_distance(cb);
    return cb;
}

inline void validate_codebook(const Codebook& cb) {
    if (cb.nt < 1 || cb.k < 1 || cb.k > cb.nt)
        throw DomainError("codebook: invalid nt/k");
    if (cb.entries.empty())
        throw TooFewEntries("codebook: no entries");
    for (const auto& e : cb.entries) {
        if (e.rows() != cb.nt || e.cols() != cb.k)
            throw ShapeMismatch("codebook: entry shape mismatch");
        const double dev =
            (e.adjoint() * e - Eigen::MatrixXcd::Identity(cb.k, cb.k)).cwiseAbs().maxCoeff();
        if (dev > 1e-10)
            throw DomainError("codebook: entry columns not orthonormal");
    }
    const double re = min_pairwise_distance(cb);
    const bool both_inf = std::isinf(re) && std::isinf(cb.min_distance);
    if (!both_inf && std::abs(re - cb.min_distance) > 1e-12)
        throw DomainError("codebook: stored min_distance does not match recomputation");
}

inline nlohmann::json codebook_to_json(const Codebook& cb) {
    nlohmann::json j;
    j["nt"] = cb.nt;
    j["k"] = cb.k;
    j["kind"] = kind_name(cb.kind);
    j["metric"] = metric_name(cb.metric);
    j["build_seed"] = cb.build_seed;
    if (std::isfinite(cb.min_distance))
        j["min_distance"] = cb.min_distance;
    else
        j["min_distance"] = nullptr;  // +infinity sentinel (size-1 codebooks)
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : cb.entries) {
        nlohmann::json flat = nlohmann::json::array();
        for (int i = 0; i < e.rows(); ++i)
            for (int jj = 0; jj < e.cols(); ++jj)
                flat.push_back({e(i, jj).real(), e(i, jj).imag()});
        entries.push_back(std::move(flat));
    }
    j["entries"] = std::move(entries);
    return j;
}

inline Codebook codebook_from_json(const nlohmann::json& j) {
    Codebook cb;
    try {
        cb.nt = j.at("nt").get<int>();
        cb.k = j.at("k").get<int>();
        cb.kind = kind_from_name(j.at("kind").get<std::string>());
        cb.metric = metric_from_name(j.at("metric").get<std::string>());
        cb.build_seed = j.at("build_seed").get<std::uint64_t>();
        if (j.at("min_distance").is_null())
            cb.min_distance = std::numeric_limits<double>::infinity();
        else
            cb.min_distance = j.at("min_distance").get<double>();
        for (const auto& flat : j.at("entries")) {
            if (int(flat.size()) != cb.nt * cb.k)
                throw ShapeMismatch("codebook: entry element count mismatch");
            Eigen::MatrixXcd e(cb.nt, cb.k);
            int idx = 0;
            for (int i = 0; i < cb.nt; ++i)
                for (int jj = 0; jj < cb.k; ++jj) {
                    const auto& pair = flat.at(idx++);
                    e(i, jj) = {pair.at(0).get<double>(), pair.at(1).get<double>()};
                }
            cb.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw DomainError(std::string("codebook: malformed JSON: ") + ex.what());
    }
    validate_codebook(cb);
    return cb;
}

inline void save_codebook(const Codebook& cb, const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw DomainError("save_codebook: cannot open " + path);
    os << codebook_to_json(cb).dump(2) << '\n';
}

inline Codebook load_codebook(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw DomainError("load_codebook: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw DomainError(std::string("load_codebook: parse failure: ") + ex.what());
    }
    return codebook_from_json(j);
}

}  // namespace lfmimo
