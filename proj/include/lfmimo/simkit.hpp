// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "channel.hpp"
#include "codebook.hpp"
#include "errors.hpp"
#include "objectives.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "selection.hpp"
#include "zfdfe.hpp"

namespace lfmimo {

// ---------------------------------------------------------------------------
// Gray-coded QAM mapping. Square constellations use independent I/Q axes with
// per-axis binary-reflected Gray labels over levels (-(L-1), ..., L-1) scaled
// to unit average symbol energy; bits are laid out [I bits | Q bits] per
// symbol, most significant first. BPSK is the single-axis special case.
// ---------------------------------------------------------------------------

struct QamSpec {
    int m = 2;
    int bits_per_symbol = 1;
    int bits_per_axis = 1;
    int levels = 2;      // per axis
    double scale = 1.0;  // per-axis level spacing / 2
    bool complex_axes = false;
};

inline QamSpec qam_spec(int m) {
    QamSpec s;
    s.m = m;
    if (m == 2) {
        s.bits_per_symbol = 1;
        s.bits_per_axis = 1;
        s.levels = 2;
        s.scale = 1.0;
        s.complex_axes = false;
        return s;
    }
    if (m == 4 || m == 16 || m == 64) {
        s.bits_per_symbol = int(std::lround(std::log2(double(m))));
        s.bits_per_axis = s.bits_per_symbol / 2;
        s.levels = 1 << s.bits_per_axis;
        s.scale = 1.0 / std::sqrt(2.0 * (double(m) - 1.0) / 3.0);
        s.complex_axes = true;
        return s;
    }
    throw DomainError("qam: unsupported constellation order");
}

namespace detail {

inline int gray_encode(int i) { return i ^ (i >> 1); }

inline int gray_decode(int g) {
    int i = g;
    for (int sh = 1; sh < 8; sh <<= 1)
        i ^= i >> sh;
    return i;
}

// bits (MSB first) -> axis level
inline double axis_level(const QamSpec& s, const std::uint8_t* bits) {
    int g = 0;
    for (int b = 0; b < s.bits_per_axis; ++b)
        g = (g << 1) | (bits[b] & 1);
    const int i = gray_decode(g);
    return (2.0 * i - (s.levels - 1)) * s.scale;
}

// axis observation -> nearest level index, ties toward the lower level
inline int axis_index(const QamSpec& s, double x) {
    const double u = (x / s.scale + double(s.levels - 1)) / 2.0;
    int i = int(std::ceil(u - 0.5));
    return std::clamp(i, 0, s.levels - 1);
}

inline void axis_bits(const QamSpec& s, int index, std::uint8_t* bits) {
    const int g = gray_encode(index);
    for (int b = 0; b < s.bits_per_axis; ++b)
        bits[b] = std::uint8_t((g >> (s.bits_per_axis - 1 - b)) & 1);
}

}  // namespace detail

inline std::complex<double> qam_map_symbol(const QamSpec& s, const std::uint8_t* bits) {
    if (!s.complex_axes)
        return {detail::axis_level(s, bits), 0.0};
    return {detail::axis_level(s, bits), detail::axis_level(s, bits + s.bits_per_axis)};
}

// hard decision: nearest constellation point plus its bit label
inline std::complex<double> qam_slice_symbol(const QamSpec& s, std::complex<double> y,
                                             std::uint8_t* bits) {
    const int ii = detail::axis_index(s, y.real());
    detail::axis_bits(s, ii, bits);
    double re = (2.0 * ii - (s.levels - 1)) * s.scale;
    double im = 0.0;
    if (s.complex_axes) {
        const int qi = detail::axis_index(s, y.imag());
        detail::axis_bits(s, qi, bits + s.bits_per_axis);
        im = (2.0 * qi - (s.levels - 1)) * s.scale;
    }
    return {re, im};
}

inline Eigen::VectorXcd qam_modulate(const std::vector<std::uint8_t>& bits, int m) {
    const QamSpec s = qam_spec(m);
    if (bits.empty() || bits.size() % std::size_t(s.bits_per_symbol) != 0)
        throw LengthMismatch("qam_modulate: bit count must be a positive multiple of log2(m)");
    const std::size_t n = bits.size() / std::size_t(s.bits_per_symbol);
    Eigen::VectorXcd out(n);
    for (std::size_t i = 0; i < n; ++i)
        out(i) = qam_map_symbol(s, bits.data() + i * std::size_t(s.bits_per_symbol));
    return out;
}

inline std::vector<std::uint8_t> qam_slice(const Eigen::VectorXcd& y, int m) {
    const QamSpec s = qam_spec(m);
    std::vector<std::uint8_t> bits(std::size_t(y.size()) * std::size_t(s.bits_per_symbol));
    for (Eigen::Index i = 0; i < y.size(); ++i)
        qam_slice_symbol(s, y(i), bits.data() + std::size_t(i) * std::size_t(s.bits_per_symbol));
    return bits;
}

// ---------------------------------------------------------------------------
// Schemes
// ---------------------------------------------------------------------------

enum class SchemeKind {
    PerfectCsiZfDfe,
    GrassmannZfDfe,
    OrderingNormZfDfe,
    OrderingGreedyZfDfe,
    LinZfGrassmann,
    PerfectCsiLinZf,
};

struct Scheme {
    SchemeKind kind = SchemeKind::PerfectCsiZfDfe;
    const Codebook* codebook = nullptr;        // Grassmann schemes only
    ObjectiveKind objective{};                 // selection objective where applicable

    std::string label() const {
        switch (kind) {
        case SchemeKind::PerfectCsiZfDfe: return "perfect-csi-zfdfe";
        case SchemeKind::GrassmannZfDfe:
            return std::string("grassmann-zfdfe:") + objective_name(objective);
        case SchemeKind::OrderingNormZfDfe: return "ordering-norm-zfdfe";
        case SchemeKind::OrderingGreedyZfDfe: return "ordering-greedy-zfdfe";
        case SchemeKind::LinZfGrassmann:
            return std::string("linzf-grassmann:") + objective_name(objective);
        case SchemeKind::PerfectCsiLinZf: return "perfect-csi-linzf";
        }
        return "unknown";
    }

    bool uses_codebook() const {
        return kind == SchemeKind::GrassmannZfDfe || kind == SchemeKind::LinZfGrassmann;
    }
};

struct SchemeDesign {
    Precoder p;
    bool linear = false;
    Eigen::MatrixXcd g;   // k x nr feedforward
    Eigen::MatrixXcd b;   // k x k feedback (zero when linear)
    Eigen::VectorXd snr;  // per-stream post-detection SNR
    std::size_t selected = 0;
};

inline SchemeDesign design_for_scheme(const ChannelMatrix& ch, const Scheme& scheme,
                                      const SystemConfig& cfg) {
    if (scheme.uses_codebook()) {
        if (scheme.codebook == nullptr)
            throw DomainError("scheme: codebook required");
        if (scheme.codebook->nt != cfg.nt || scheme.codebook->k != cfg.k)
            throw ShapeMismatch("scheme: codebook shape does not match config");
    }

    SchemeDesign out;
    auto dfe_from = [&](const Precoder& p, std::size_t idx) {
        const DfeDesign d = design_receiver(ch, p, cfg);
        out.p = p;
        out.g = d.g;
        out.b = d.b;
        out.snr = d.analysis.snr;
        out.selected = idx;
        out.linear = false;
    };
    auto linear_from = [&](const Precoder& p, std::size_t idx) {
        const LinearZfAnalysis an = linear_zf_analysis(ch, p, cfg);
        const Eigen::MatrixXcd hp = ch.h * p.p;
        out.p = p;
        out.g = (an.n / cfg.sigma2_n) * hp.adjoint();  // (H P)^+
        out.b = Eigen::MatrixXcd::Zero(cfg.k, cfg.k);
        out.snr = an.snr;
        out.selected = idx;
        out.linear = true;
    };

    switch (scheme.kind) {
    case SchemeKind::PerfectCsiZfDfe:
        dfe_from(optimal_precoder(ch, cfg), 0);
        break;
    case SchemeKind::GrassmannZfDfe: {
        const SelectionResult sel = select_precoder(ch, *scheme.codebook, scheme.objective, cfg);
        dfe_from(power_scale(scheme.codebook->entries[sel.index], cfg), sel.index);
        break;
    }
    case SchemeKind::OrderingNormZfDfe: {
        const std::vector<int> order = ordering_norm(ch, cfg.k);
        dfe_from(power_scale(permutation_entry(order, cfg.nt), cfg), permutation_rank(order, cfg.nt));
        break;
    }
    case SchemeKind::OrderingGreedyZfDfe: {
        const std::vector<int> order = ordering_greedy(ch, cfg.k);
        dfe_from(power_scale(permutation_entry(order, cfg.nt), cfg), permutation_rank(order, cfg.nt));
        break;
    }
    case SchemeKind::LinZfGrassmann: {
        const SelectionResult sel =
            select_precoder_linear(ch, *scheme.codebook, scheme.objective, cfg);
        linear_from(power_scale(scheme.codebook->entries[sel.index], cfg), sel.index);
        break;
    }
    case SchemeKind::PerfectCsiLinZf: {
        const EigBasis eb = eig_basis(ch, cfg.k);
        linear_from(power_scale(eb.u1, cfg), 0);
        break;
    }
    }
    return out;
}

inline double mutual_info_bits(const SchemeDesign& d) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < d.snr.size(); ++i)
        acc += std::log2(1.0 + d.snr(i));
    return acc;
}

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

struct CampaignPoint {
    double snr_db = 0.0;
    std::uint64_t bits_sent = 0;
    std::uint64_t bit_errors = 0;
    double ber = std::numeric_limits<double>::quiet_NaN();
    double mean_mutual_info_bits = 0.0;
    int n_channels = 0;
    int n_skipped = 0;
};

struct CampaignResult {
    std::string scheme;
    std::uint64_t master_seed = 0;
    bool genie = false;
    int qam_m = 16;
    std::vector<CampaignPoint> points;
};

// SNR definition for sweeps: snr = p_total / (nr * sigma2_n), so the per-point
// noise variance is sigma2_n = p_total / (nr * 10^(db/10)) with p_total fixed.
inline double sigma2_for_snr_db(const SystemConfig& cfg, double snr_db) {
    return cfg.p_total / (double(cfg.nr) * std::pow(10.0, snr_db / 10.0));
}

// One frame: k log2(m) fresh bits, y = H P s + n, detection in stream order
// with sliced (or genie) feedback. Returns the number of bit errors.
inline int simulate_frame(const SchemeDesign& d, const Eigen::MatrixXcd& hp, const QamSpec& qs,
                          const SystemConfig& cfg, bool genie, Rng& rng,
                          std::vector<std::uint8_t>& bits_buf,
                          std::vector<std::uint8_t>& dec_buf) {
    const int k = cfg.k;
    const std::size_t nbits = std::size_t(k) * std::size_t(qs.bits_per_symbol);
    bits_buf.resize(nbits);
    dec_buf.resize(nbits);
    for (std::size_t i = 0; i < nbits; ++i)
        bits_buf[i] = std::uint8_t(rng.bit());

    Eigen::VectorXcd s(k);
    for (int i = 0; i < k; ++i)
        s(i) = qam_map_symbol(qs, bits_buf.data() + std::size_t(i) * std::size_t(qs.bits_per_symbol));

    const double sn = std::sqrt(cfg.sigma2_n);
    Eigen::VectorXcd y = hp * s;
    for (int i = 0; i < cfg.nr; ++i)
        y(i) += sn * rng.cnormal();

    const Eigen::VectorXcd z = d.g * y;
    Eigen::VectorXcd fb(k);
    int errors = 0;
    for (int i = 0; i < k; ++i) {
        std::complex<double> din = z(i);
        for (int j = 0; j < i; ++j)
            din -= d.b(i, j) * fb(j);
        std::complex<double> shat =
            qam_slice_symbol(qs, din, dec_buf.data() + std::size_t(i) * std::size_t(qs.bits_per_symbol));
        fb(i) = genie ? s(i) : shat;
        for (int b = 0; b < qs.bits_per_symbol; ++b)
            errors += dec_buf[std::size_t(i) * std::size_t(qs.bits_per_symbol) + b] !=
                      bits_buf[std::size_t(i) * std::size_t(qs.bits_per_symbol) + b];
    }
    return errors;
}

// One SNR point over an explicit channel list. Channel c uses the frame
// stream derived from (master_seed, point_index, c); rank-deficient or
// infeasible draws are skipped and counted.
inline CampaignPoint run_ber_point(const SystemConfig& cfg_pt, const Scheme& scheme, double snr_db,
                                   const std::vector<ChannelMatrix>& channels,
                                   std::uint64_t master_seed, std::size_t point_index, int n_frames,
                                   bool genie, unsigned workers, int qam_m) {
    const QamSpec qs = qam_spec(qam_m);
    const std::size_t n = channels.size();
    struct Slot {
        std::uint64_t bits = 0, errors = 0;
        double mi = 0.0;
        bool skipped = false;
    };
    std::vector<Slot> slots(n);

    parallel_for(n, workers, [&](std::size_t c) {
        Slot& sl = slots[c];
        SchemeDesign d;
        try {
            d = design_for_scheme(channels[c], scheme, cfg_pt);
        } catch (const RankDeficient&) {
            sl.skipped = true;
            return;
        } catch (const AllInfeasible&) {
            sl.skipped = true;
            return;
        }
        sl.mi = mutual_info_bits(d);
        if (n_frames > 0) {
            const Eigen::MatrixXcd hp = channels[c].h * d.p.p;
            Rng rng(derive_seed(master_seed, 2, point_index, c));
            std::vector<std::uint8_t> bits_buf, dec_buf;
            for (int f = 0; f < n_frames; ++f) {
                sl.errors += std::uint64_t(
                    simulate_frame(d, hp, qs, cfg_pt, genie, rng, bits_buf, dec_buf));
                sl.bits += std::uint64_t(cfg_pt.k) * std::uint64_t(qs.bits_per_symbol);
            }
        }
    });

    CampaignPoint pt;
    pt.snr_db = snr_db;
    pt.n_channels = int(n);
    double mi_acc = 0.0;
    int used = 0;
    for (const Slot& sl : slots) {
        if (sl.skipped) {
            ++pt.n_skipped;
            continue;
        }
        pt.bits_sent += sl.bits;
        pt.bit_errors += sl.errors;
        mi_acc += sl.mi;
        ++used;
    }
    if (used == 0 || double(pt.n_skipped) > 0.001 * double(n))
        throw TooManySkips("campaign: skipped channel draws exceed 0.1% of total");
    pt.mean_mutual_info_bits = mi_acc / double(used);
    if (pt.bits_sent > 0)
        pt.ber = double(pt.bit_errors) / double(pt.bits_sent);
    return pt;
}

inline std::vector<ChannelMatrix> campaign_channels(const SystemConfig& cfg, int n_channels,
                                                    std::uint64_t master_seed) {
    std::vector<ChannelMatrix> out;
    out.reserve(std::size_t(n_channels));
    for (int c = 0; c < n_channels; ++c)
        out.push_back(generate_channel(cfg, derive_seed(master_seed, 1, std::uint64_t(c))));
    return out;
}

// Campaign over a caller-supplied channel list (measured channels, stress
// fixtures). The seed only drives the per-frame noise and bit streams.
inline CampaignResult run_ber_campaign_channels(const SystemConfig& cfg, const Scheme& scheme,
                                                const std::vector<double>& snr_db,
                                                const std::vector<ChannelMatrix>& channels,
                                                int n_frames, std::uint64_t master_seed, bool genie,
                                                unsigned workers, int qam_m = 16) {
    cfg.validate();
    if (snr_db.empty())
        throw TooFewEntries("campaign: need at least one SNR point");
    if (channels.empty())
        throw TooFewEntries("campaign: need at least one channel");
    if (n_frames < 1)
        throw DomainError("campaign: n_frames must be positive");

    CampaignResult out;
    out.scheme = scheme.label();
    out.master_seed = master_seed;
    out.genie = genie;
    out.qam_m = qam_m;
    for (std::size_t ip = 0; ip < snr_db.size(); ++ip) {
        SystemConfig cfg_pt = cfg;
        cfg_pt.sigma2_n = sigma2_for_snr_db(cfg, snr_db[ip]);
        out.points.push_back(run_ber_point(cfg_pt, scheme, snr_db[ip], channels, master_seed, ip,
                                           n_frames, genie, workers, qam_m));
    }
    return out;
}

inline CampaignResult run_ber_campaign(const SystemConfig& cfg, const Scheme& scheme,
                                       const std::vector<double>& snr_db, int n_channels,
                                       int n_frames, std::uint64_t master_seed, bool genie,
                                       unsigned workers, int qam_m = 16) {
    cfg.validate();
    if (n_channels < 1)
        throw DomainError("campaign: n_channels must be positive");
    return run_ber_campaign_channels(cfg, scheme, snr_db,
                                     campaign_channels(cfg, n_channels, master_seed), n_frames,
                                     master_seed, genie, workers, qam_m);
}

inline CampaignResult run_mi_campaign_channels(const SystemConfig& cfg, const Scheme& scheme,
                                               const std::vector<double>& snr_db,
                                               const std::vector<ChannelMatrix>& channels,
                                               std::uint64_t master_seed, unsigned workers) {
    cfg.validate();
    if (snr_db.empty())
        throw TooFewEntries("campaign: need at least one SNR point");
    if (channels.empty())
        throw TooFewEntries("campaign: need at least one channel");

    CampaignResult out;
    out.scheme = scheme.label();
    out.master_seed = master_seed;
    out.qam_m = 0;
    for (std::size_t ip = 0; ip < snr_db.size(); ++ip) {
        SystemConfig cfg_pt = cfg;
        cfg_pt.sigma2_n = sigma2_for_snr_db(cfg, snr_db[ip]);
        out.points.push_back(run_ber_point(cfg_pt, scheme, snr_db[ip], channels, master_seed, ip,
                                           /*n_frames=*/0, /*genie=*/false, workers, /*qam_m=*/4));
    }
    return out;
}

inline CampaignResult run_mi_campaign(const SystemConfig& cfg, const Scheme& scheme,
                                      const std::vector<double>& snr_db, int n_channels,
                                      std::uint64_t master_seed, unsigned workers) {
    cfg.validate();
    if (n_channels < 1)
        throw DomainError("campaign: n_channels must be positive");
    return run_mi_campaign_channels(cfg, scheme, snr_db,
                                    campaign_channels(cfg, n_channels, master_seed), master_seed,
                                    workers);
}

// ---------------------------------------------------------------------------
// Result serialization (CSV columns fixed: snr_db, scheme, ber, bits, errors,
// mi_bits, n_channels)
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::string campaign_csv(const std::vector<CampaignResult>& results) {
    std::string csv = "snr_db,scheme,ber,bits,errors,mi_bits,n_channels\n";
    for (const auto& r : results)
        for (const auto& p : r.points) {
            csv += format_double(p.snr_db);
            csv += ',';
            csv += r.scheme;
            csv += ',';
            csv += format_double(p.ber);
            csv += ',';
            csv += std::to_string(p.bits_sent);
            csv += ',';
            csv += std::to_string(p.bit_errors);
            csv += ',';
            csv += format_double(p.mean_mutual_info_bits);
            csv += ',';
            csv += std::to_string(p.n_channels);
            csv += '\n';
        }
    return csv;
}

inline nlohmann::json campaign_to_json(const CampaignResult& r) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points) {
        nlohmann::json jp;
        jp["snr_db"] = p.snr_db;
        jp["bits_sent"] = p.bits_sent;
        jp["bit_errors"] = p.bit_errors;
        jp["ber"] = std::isnan(p.ber) ? nlohmann::json(nullptr) : nlohmann::json(p.ber);
        jp["mi_bits"] = p.mean_mutual_info_bits;
        jp["n_channels"] = p.n_channels;
        jp["n_skipped"] = p.n_skipped;
        points.push_back(std::move(jp));
    }
    nlohmann::json j;
    j["scheme"] = r.scheme;
    j["master_seed"] = r.master_seed;
    j["genie"] = r.genie;
    j["qam_m"] = r.qam_m;
    j["points"] = std::move(points);
    return j;
}

inline SystemConfig config_from_json(const nlohmann::json& j) {
    SystemConfig cfg;
    try {
        cfg.nt = j.at("nt").get<int>();
        cfg.nr = j.at("nr").get<int>();
        cfg.k = j.at("k").get<int>();
        cfg.p_total = j.at("p_total").get<double>();
        cfg.sigma2_n = j.at("sigma2_n").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw DomainError(std::string("config: malformed JSON: ") + ex.what());
    }
    cfg.validate();
    return cfg;
}

inline nlohmann::json config_to_json(const SystemConfig& cfg) {
    nlohmann::json j;
    j["nt"] = cfg.nt;
    j["nr"] = cfg.nr;
    j["k"] = cfg.k;
    j["p_total"] = cfg.p_total;
    j["sigma2_n"] = cfg.sigma2_n;
    return j;
}

}  // namespace lfmimo
