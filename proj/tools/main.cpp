// SPDX-License-Identifier: Apache-2.0
//
// Batch front-end. Every command is a pure function of its flags: output
// trees are reproducible byte for byte, so reruns can be diffed directly.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <lfmimo/lfmimo.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

int g_exit_code = 0;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw lfmimo::DomainError("cannot open for writing: " + path.string());
    os << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw lfmimo::DomainError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json parse_json_file(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& ex) {
        throw lfmimo::DomainError(path.string() + ": JSON parse failure: " + ex.what());
    }
}

fs::path make_run_dir(const std::string& out_root, const std::string& command_slug,
                      const std::string& name) {
    const fs::path dir = fs::path(out_root) / command_slug / name;
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const json& seeds, std::vector<std::string> outputs) {
    outputs.push_back("manifest.json");
    std::sort(outputs.begin(), outputs.end());
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seeds"] = seeds;
    m["code_version"] = kVersion;
    m["outputs"] = outputs;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::string kv_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::string csv = "key,value\n";
    for (const auto& [k, v] : rows)
        csv += k + "," + v + "\n";
    return csv;
}

// ---------------------------------------------------------------------------
// Shared flag groups
// ---------------------------------------------------------------------------

struct RunFlags {
    std::string out_root = "out";
    std::string name = "run";
};

void add_run_flags(CLI::App* cmd, RunFlags& rf) {
    cmd->add_option("--out", rf.out_root, "output root directory")->capture_default_str();
    cmd->add_option("--name", rf.name, "run name under out/<command>/")->capture_default_str();
}

struct ConfigFlags {
    std::string config_path;
    std::optional<int> nt, nr, k;
    std::optional<double> p_total, sigma2;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& cf) {
    cmd->add_option("--config", cf.config_path, "system config JSON file");
    cmd->add_option("--nt", cf.nt, "transmit antennas (overrides config)");
    cmd->add_option("--nr", cf.nr, "receive antennas (overrides config)");
    cmd->add_option("--k", cf.k, "spatial streams (overrides config)");
    cmd->add_option("--p-total", cf.p_total, "total transmit power (overrides config)");
    cmd->add_option("--sigma2", cf.sigma2, "noise variance (overrides config)");
}

lfmimo::SystemConfig resolve_config(const ConfigFlags& cf) {
    lfmimo::SystemConfig cfg;
    if (!cf.config_path.empty())
        cfg = lfmimo::config_from_json(parse_json_file(cf.config_path));
    if (cf.nt)
        cfg.nt = *cf.nt;
    if (cf.nr)
        cfg.nr = *cf.nr;
    if (cf.k)
        cfg.k = *cf.k;
    if (cf.p_total)
        cfg.p_total = *cf.p_total;
    if (cf.sigma2)
        cfg.sigma2_n = *cf.sigma2;
    cfg.validate();
    return cfg;
}

lfmimo::DistortionKind distortion_kind_from_name(const std::string& s) {
    if (s == "min-snr-loss")
        return lfmimo::DistortionKind::MinSnrLoss;
    if (s == "det-loss")
        return lfmimo::DistortionKind::DetLoss;
    throw lfmimo::DomainError("unknown distortion kind: " + s);
}

// Explicit channel list: {"nr": R, "nt": T, "channels": [H, ...]} where each
// H is nr rows of nt entries and each entry is [re, im].
std::vector<lfmimo::ChannelMatrix> channels_from_file(const std::string& path) {
    const json j = parse_json_file(path);
    std::vector<lfmimo::ChannelMatrix> out;
    try {
        const int nr = j.at("nr").get<int>();
        const int nt = j.at("nt").get<int>();
        if (nr < 1 || nt < 1)
            throw lfmimo::DomainError(path + ": nr and nt must be positive");
        for (const auto& jc : j.at("channels")) {
            if (int(jc.size()) != nr)
                throw lfmimo::ShapeMismatch(path + ": channel row count != nr");
            lfmimo::ChannelMatrix ch;
            ch.h.resize(nr, nt);
            for (int r = 0; r < nr; ++r) {
                const auto& row = jc.at(std::size_t(r));
                if (int(row.size()) != nt)
                    throw lfmimo::ShapeMismatch(path + ": channel column count != nt");
                for (int c = 0; c < nt; ++c) {
                    const auto& e = row.at(std::size_t(c));
                    if (e.size() != 2)
                        throw lfmimo::ShapeMismatch(path + ": entries must be [re, im]");
                    ch.h(r, c) = {e.at(0).get<double>(), e.at(1).get<double>()};
                }
            }
            out.push_back(std::move(ch));
        }
    } catch (const json::exception& ex) {
        throw lfmimo::DomainError(path + ": malformed channel file: " + ex.what());
    }
    if (out.empty())
        throw lfmimo::TooFewEntries(path + ": channel file holds no channels");
    return out;
}

void check_channel_shapes(const std::vector<lfmimo::ChannelMatrix>& channels,
                          const lfmimo::SystemConfig& cfg) {
    for (const auto& ch : channels)
        if (ch.h.rows() != cfg.nr || ch.h.cols() != cfg.nt)
            throw lfmimo::ShapeMismatch("channel file shape does not match config");
}

// Scheme names match Scheme::label(); "grassmann-zfdfe:avg-ber" style suffixes
// override --objective.
lfmimo::Scheme parse_scheme(std::string name, std::string objective, int qam_m,
                            const lfmimo::Codebook* cb) {
    const auto colon = name.find(':');
    if (colon != std::string::npos) {
        objective = name.substr(colon + 1);
        name = name.substr(0, colon);
    }
    lfmimo::Scheme s;
    if (name == "perfect-csi-zfdfe")
        s.kind = lfmimo::SchemeKind::PerfectCsiZfDfe;
    else if (name == "grassmann-zfdfe")
        s.kind = lfmimo::SchemeKind::GrassmannZfDfe;
    else if (name == "ordering-norm-zfdfe")
        s.kind = lfmimo::SchemeKind::OrderingNormZfDfe;
    else if (name == "ordering-greedy-zfdfe")
        s.kind = lfmimo::SchemeKind::OrderingGreedyZfDfe;
    else if (name == "linzf-grassmann")
        s.kind = lfmimo::SchemeKind::LinZfGrassmann;
    else if (name == "perfect-csi-linzf")
        s.kind = lfmimo::SchemeKind::PerfectCsiLinZf;
    else
        throw lfmimo::DomainError("unknown scheme: " + name);
    if (s.uses_codebook()) {
        if (objective.empty())
            throw lfmimo::DomainError("scheme " + name + " needs --objective");
        s.objective = lfmimo::objective_from_name(objective, qam_m);
        s.codebook = cb;
    }
    return s;
}

// ---------------------------------------------------------------------------
// codebook build | stats
// ---------------------------------------------------------------------------

struct CodebookBuildArgs {
    RunFlags run;
    int nt = 4, k = 2;
    std::size_t size = 16;
    std::string metric = "proj2";
    std::string kind = "grassmann";
    std::uint64_t seed = 1;
    std::uint64_t budget = 20000;
};

void cmd_codebook_build(const CodebookBuildArgs& a) {
    lfmimo::Codebook cb;
    if (a.kind == "grassmann") {
        cb = lfmimo::build_grassmann_codebook(a.nt, a.k, a.size, lfmimo::metric_from_name(a.metric),
                                              a.budget, a.seed);
    } else if (a.kind == "permutation") {
        cb = lfmimo::build_permutation_codebook(a.nt, a.k);
    } else {
        throw lfmimo::DomainError("unknown codebook kind: " + a.kind);
    }

    const fs::path dir = make_run_dir(a.run.out_root, "codebook-build", a.run.name);
    lfmimo::save_codebook(cb, (dir / "codebook.json").string());

    json res;
    res["nt"] = cb.nt;
    res["k"] = cb.k;
    res["kind"] = lfmimo::kind_name(cb.kind);
    res["metric"] = lfmimo::metric_name(cb.metric);
    res["size"] = cb.size();
    res["build_seed"] = cb.build_seed;
    res["min_distance"] = std::isinf(cb.min_distance) ? json(nullptr) : json(cb.min_distance);
    write_text(dir / "results.json", res.dump(2) + "\n");
    write_text(dir / "results.csv",
               kv_csv({{"nt", std::to_string(cb.nt)},
                       {"k", std::to_string(cb.k)},
                       {"kind", lfmimo::kind_name(cb.kind)},
                       {"metric", lfmimo::metric_name(cb.metric)},
                       {"size", std::to_string(cb.size())},
                       {"min_distance", lfmimo::format_double(cb.min_distance)}}));

    json cfg;
    cfg["nt"] = a.nt;
    cfg["k"] = a.k;
    cfg["size"] = a.size;
    cfg["metric"] = a.metric;
    cfg["kind"] = a.kind;
    cfg["budget"] = a.budget;
    write_manifest(dir, "codebook build", cfg, json{{"build", a.seed}},
                   {"codebook.json", "results.csv", "results.json"});

    std::cout << "entries " << cb.size() << "\n";
    std::cout << "min_distance " << lfmimo::format_double(cb.min_distance) << "\n";
    std::cout << "wrote " << (dir / "codebook.json").generic_string() << "\n";
}

struct CodebookStatsArgs {
    RunFlags run;
    std::string file;
};

void cmd_codebook_stats(const CodebookStatsArgs& a) {
    const lfmimo::Codebook cb = lfmimo::load_codebook(a.file);
    const double recomputed = lfmimo::min_pairwise_distance(cb);

    const fs::path dir = make_run_dir(a.run.out_root, "codebook-stats", a.run.name);
    json res;
    res["nt"] = cb.nt;
    res["k"] = cb.k;
    res["kind"] = lfmimo::kind_name(cb.kind);
    res["metric"] = lfmimo::metric_name(cb.metric);
    res["size"] = cb.size();
    res["build_seed"] = cb.build_seed;
    res["min_distance"] = std::isinf(cb.min_distance) ? json(nullptr) : json(cb.min_distance);
    res["min_distance_recomputed"] = std::isinf(recomputed) ? json(nullptr) : json(recomputed);
    write_text(dir / "results.json", res.dump(2) + "\n");
    write_text(dir / "results.csv",
               kv_csv({{"nt", std::to_string(cb.nt)},
                       {"k", std::to_string(cb.k)},
                       {"kind", lfmimo::kind_name(cb.kind)},
                       {"metric", lfmimo::metric_name(cb.metric)},
                       {"size", std::to_string(cb.size())},
                       {"min_distance", lfmimo::format_double(cb.min_distance)},
                       {"min_distance_recomputed", lfmimo::format_double(recomputed)}}));
    write_manifest(dir, "codebook stats", json{{"file", a.file}}, json::object(),
                   {"results.csv", "results.json"});

    std::cout << "nt " << cb.nt << "\nk " << cb.k << "\nkind " << lfmimo::kind_name(cb.kind)
              << "\nmetric " << lfmimo::metric_name(cb.metric) << "\nentries " << cb.size()
              << "\nmin_distance " << lfmimo::format_double(cb.min_distance)
              << "\nmin_distance_recomputed " << lfmimo::format_double(recomputed) << "\n";
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

struct SelectArgs {
    RunFlags run;
    ConfigFlags cfg;
    std::string codebook_path;
    std::string channels_file;
    std::string objective = "sum-mse";
    int qam_m = 16;
    bool linear = false;
    int n_channels = 50;
    std::uint64_t seed = 1;
};

void cmd_select(const SelectArgs& a) {
    const lfmimo::SystemConfig cfg = resolve_config(a.cfg);
    const lfmimo::Codebook cb = lfmimo::load_codebook(a.codebook_path);
    const lfmimo::ObjectiveKind obj = lfmimo::objective_from_name(a.objective, a.qam_m);
    if (a.n_channels < 1)
        throw lfmimo::DomainError("select: --channels must be positive");

    std::vector<lfmimo::ChannelMatrix> channels;
    if (!a.channels_file.empty()) {
        channels = channels_from_file(a.channels_file);
        check_channel_shapes(channels, cfg);
    } else {
        for (int c = 0; c < a.n_channels; ++c)
            channels.push_back(
                lfmimo::generate_channel(cfg, lfmimo::derive_seed(a.seed, 1, std::uint64_t(c))));
    }
    const int n_channels = int(channels.size());

    std::string csv = "channel,index,objective_value\n";
    json rows = json::array();
    std::map<std::size_t, int> counts;
    double obj_sum = 0.0;
    for (int c = 0; c < n_channels; ++c) {
        const lfmimo::ChannelMatrix& ch = channels[std::size_t(c)];
        const lfmimo::SelectionResult sel = a.linear
                                                ? lfmimo::select_precoder_linear(ch, cb, obj, cfg)
                                                : lfmimo::select_precoder(ch, cb, obj, cfg);
        csv += std::to_string(c) + "," + std::to_string(sel.index) + "," +
               lfmimo::format_double(sel.objective_value) + "\n";
        json row;
        row["channel"] = c;
        row["index"] = sel.index;
        row["objective_value"] = sel.objective_value;
        std::vector<double> lm(sel.log_mse.data(), sel.log_mse.data() + sel.log_mse.size());
        row["log_mse"] = lm;
        rows.push_back(std::move(row));
        ++counts[sel.index];
        obj_sum += sel.objective_value;
    }

    json index_counts = json::object();
    for (const auto& [idx, n] : counts)
        index_counts[std::to_string(idx)] = n;

    const fs::path dir = make_run_dir(a.run.out_root, "select", a.run.name);
    json res;
    res["objective"] = lfmimo::objective_name(obj);
    res["linear"] = a.linear;
    res["n_channels"] = n_channels;
    res["mean_objective"] = obj_sum / double(n_channels);
    res["index_counts"] = index_counts;
    res["selections"] = rows;
    write_text(dir / "results.json", res.dump(2) + "\n");
    write_text(dir / "results.csv", csv);

    json cfgj = lfmimo::config_to_json(cfg);
    cfgj["codebook"] = a.codebook_path;
    cfgj["objective"] = a.objective;
    cfgj["qam"] = a.qam_m;
    cfgj["linear"] = a.linear;
    cfgj["channels"] = n_channels;
    if (!a.channels_file.empty())
        cfgj["channels_file"] = a.channels_file;
    write_manifest(dir, "select", cfgj, json{{"master", a.seed}}, {"results.csv", "results.json"});

    std::cout << "channels " << n_channels << "\n";
    std::cout << "distinct_entries " << counts.size() << "\n";
    std::cout << "mean_objective " << lfmimo::format_double(obj_sum / double(n_channels)) << "\n";
}

// ---------------------------------------------------------------------------
// simulate ber | mi
// ---------------------------------------------------------------------------

struct SimulateArgs {
    RunFlags run;
    ConfigFlags cfg;
    std::string scheme = "perfect-csi-zfdfe";
    std::string codebook_path;
    std::string channels_file;
    std::string objective;
    int qam_m = 16;
    std::vector<double> snr_db;
    int n_channels = 100;
    int n_frames = 100;
    std::uint64_t seed = 1;
    bool genie = false;
    unsigned workers = 1;
};

void cmd_simulate(const SimulateArgs& a, bool mi_only) {
    lfmimo::SystemConfig cfg = resolve_config(a.cfg);
    lfmimo::Codebook cb;
    const bool have_cb = !a.codebook_path.empty();
    if (have_cb)
        cb = lfmimo::load_codebook(a.codebook_path);
    const lfmimo::Scheme scheme =
        parse_scheme(a.scheme, a.objective, a.qam_m, have_cb ? &cb : nullptr);
    if (scheme.uses_codebook() && !have_cb)
        throw lfmimo::DomainError("scheme " + a.scheme + " needs --codebook");
    if (a.snr_db.empty())
        throw lfmimo::TooFewEntries("simulate: need at least one --snr point");

    lfmimo::CampaignResult result;
    if (!a.channels_file.empty()) {
        const std::vector<lfmimo::ChannelMatrix> channels = channels_from_file(a.channels_file);
        check_channel_shapes(channels, cfg);
        result = mi_only
                     ? lfmimo::run_mi_campaign_channels(cfg, scheme, a.snr_db, channels, a.seed,
                                                        a.workers)
                     : lfmimo::run_ber_campaign_channels(cfg, scheme, a.snr_db, channels,
                                                         a.n_frames, a.seed, a.genie, a.workers,
                                                         a.qam_m);
    } else {
        result = mi_only
                     ? lfmimo::run_mi_campaign(cfg, scheme, a.snr_db, a.n_channels, a.seed,
                                               a.workers)
                     : lfmimo::run_ber_campaign(cfg, scheme, a.snr_db, a.n_channels, a.n_frames,
                                                a.seed, a.genie, a.workers, a.qam_m);
    }

    const std::string slug = mi_only ? "simulate-mi" : "simulate-ber";
    const fs::path dir = make_run_dir(a.run.out_root, slug, a.run.name);
    const std::string csv = lfmimo::campaign_csv({result});
    write_text(dir / "results.csv", csv);
    write_text(dir / "results.json", lfmimo::campaign_to_json(result).dump(2) + "\n");

    json cfgj = lfmimo::config_to_json(cfg);
    cfgj["scheme"] = result.scheme;
    cfgj["snr_db"] = a.snr_db;
    cfgj["channels"] = a.n_channels;
    if (!mi_only) {
        cfgj["frames"] = a.n_frames;
        cfgj["genie"] = a.genie;
        cfgj["qam"] = a.qam_m;
    }
    if (have_cb)
        cfgj["codebook"] = a.codebook_path;
    if (!a.channels_file.empty())
        cfgj["channels_file"] = a.channels_file;
    write_manifest(dir, mi_only ? "simulate mi" : "simulate ber", cfgj,
                   json{{"master", a.seed}}, {"results.csv", "results.json"});

    std::cout << csv;
}

// ---------------------------------------------------------------------------
// distortion
// ---------------------------------------------------------------------------

struct DistortionArgs {
    RunFlags run;
    std::string codebook_path;
    std::string kind = "min-snr-loss";
    std::optional<double> density;
    std::optional<int> nr;
    std::optional<double> p_total, sigma2;
    std::int64_t n_samples = 2000;
    std::uint64_t seed = 1;
    bool bound = false;
};

void cmd_distortion(const DistortionArgs& a) {
    const lfmimo::Codebook cb = lfmimo::load_codebook(a.codebook_path);
    const lfmimo::DistortionKind kind = distortion_kind_from_name(a.kind);

    lfmimo::SystemConfig cfg;
    cfg.nt = cb.nt;
    cfg.k = cb.k;
    cfg.nr = a.nr.value_or(cb.nt);
    cfg.p_total = a.p_total.value_or(double(cb.k));
    cfg.sigma2_n = a.sigma2.value_or(1.0);
    cfg.validate();

    const lfmimo::DistortionEstimate est =
        lfmimo::estimate_distortion(cb, kind, cfg, a.n_samples, a.seed);
    std::optional<lfmimo::DistortionBound> bd;
    if (a.bound)
        bd = lfmimo::evaluate_distortion_bound(cb, kind, cfg, a.density, a.n_samples, a.seed);

    const fs::path dir = make_run_dir(a.run.out_root, "distortion", a.run.name);
    json res;
    res["kind"] = a.kind;
    res["estimate"] = {{"mean_gap", est.mean_gap},
                       {"std_error", est.std_error},
                       {"n_samples", est.n_samples},
                       {"n_skipped", est.n_skipped}};
    res["bound"] = bd ? json{{"value", bd->value},
                             {"std_error", bd->std_error},
                             {"n_samples", bd->n_samples}}
                      : json(nullptr);
    res["min_distance"] =
        std::isinf(cb.min_distance) ? json(nullptr) : json(cb.min_distance);
    write_text(dir / "results.json", res.dump(2) + "\n");

    std::vector<std::pair<std::string, std::string>> rows = {
        {"kind", a.kind},
        {"mean_gap", lfmimo::format_double(est.mean_gap)},
        {"std_error", lfmimo::format_double(est.std_error)},
        {"n_samples", std::to_string(est.n_samples)},
        {"n_skipped", std::to_string(est.n_skipped)},
        {"min_distance", lfmimo::format_double(cb.min_distance)}};
    if (bd) {
        rows.push_back({"bound_value", lfmimo::format_double(bd->value)});
        rows.push_back({"bound_std_error", lfmimo::format_double(bd->std_error)});
    }
    write_text(dir / "results.csv", kv_csv(rows));

    json cfgj = lfmimo::config_to_json(cfg);
    cfgj["codebook"] = a.codebook_path;
    cfgj["kind"] = a.kind;
    cfgj["samples"] = a.n_samples;
    cfgj["bound"] = a.bound;
    cfgj["density"] = a.density ? json(*a.density) : json(nullptr);
    write_manifest(dir, "distortion", cfgj, json{{"master", a.seed}},
                   {"results.csv", "results.json"});

    std::cout << "mean_gap " << lfmimo::format_double(est.mean_gap) << " +- "
              << lfmimo::format_double(est.std_error) << "\n";
    if (bd)
        std::cout << "bound " << lfmimo::format_double(bd->value) << " +- "
                  << lfmimo::format_double(bd->std_error) << "\n";
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

lfmimo::Precoder random_precoder(lfmimo::Rng& rng, const lfmimo::SystemConfig& cfg) {
    Eigen::MatrixXcd x(cfg.nt, cfg.k);
    for (int j = 0; j < cfg.k; ++j)
        for (int i = 0; i < cfg.nt; ++i)
            x(i, j) = rng.cnormal();
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(x);
    const Eigen::MatrixXcd q =
        qr.householderQ() * Eigen::MatrixXcd::Identity(cfg.nt, cfg.k);
    return lfmimo::power_scale(q, cfg);
}

struct VerifyArgs {
    RunFlags run;
    std::string suite;
    int n = 0;  // 0: suite default
    std::uint64_t seed = 1;
    double tol_scale = 1.0;
};

std::vector<PropertyResult> verify_majorization(int n, std::uint64_t seed, double ts) {
    int sandwich_ok = 0, order_ok = 0;
    std::string detail;
    lfmimo::Rng rng(lfmimo::derive_seed(seed, 7));
    for (int i = 0; i < n; ++i) {
        lfmimo::SystemConfig cfg;
        cfg.nt = 4;
        cfg.nr = 4;
        cfg.k = 2 + i % 3;
        cfg.p_total = double(cfg.k);
        cfg.sigma2_n = 0.1;
        const lfmimo::ChannelMatrix ch =
            lfmimo::generate_channel(cfg, lfmimo::derive_seed(seed, 1, std::uint64_t(i)));
        const lfmimo::Precoder p = random_precoder(rng, cfg);
        const lfmimo::MseAnalysis an = lfmimo::mse_analysis(ch, p, cfg);
        const Eigen::VectorXd unif =
            Eigen::VectorXd::Constant(cfg.k, an.log_mse.sum() / double(cfg.k));
        const Eigen::VectorXd log_eigs = an.eigs_n.array().log();
        const bool s = lfmimo::majorizes(unif, an.log_mse) && lfmimo::majorizes(an.log_mse, log_eigs);
        sandwich_ok += s;
        if (!s && detail.empty())
            detail = "sandwich violated at channel " + std::to_string(i);
        order_ok += an.log_mse.sum() <= std::log(an.eigs_n.prod()) + ts * 1e-9;
    }
    return {{"log-mse sandwich (uniform < l < log-eigs)", sandwich_ok == n, detail},
            {"log-det consistency", order_ok == n, ""}};
}

std::vector<PropertyResult> verify_gmd(int n, std::uint64_t seed, double ts) {
    int ok = 0;
    std::string detail;
    lfmimo::Rng rng(lfmimo::derive_seed(seed, 11));
    for (int i = 0; i < n; ++i) {
        const int k = 1 + i % 8;
        Eigen::VectorXd d(k);
        for (int j = 0; j < k; ++j)
            d(j) = std::pow(10.0, 6.0 * rng.uniform() - 3.0);
        const lfmimo::GmdResult g = lfmimo::equal_diag_rotation(d);
        const Eigen::MatrixXd recon = g.q * g.r * g.v.transpose();
        const double dmax = d.maxCoeff();
        const double rec_err = (recon - Eigen::MatrixXd(d.asDiagonal())).cwiseAbs().maxCoeff();
        const double orth_q =
            (g.q.transpose() * g.q - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
        const double orth_v =
            (g.v.transpose() * g.v - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
        const double spread =
            g.r.diagonal().maxCoeff() - g.r.diagonal().minCoeff();
        const bool pass = rec_err <= ts * 1e-9 * std::max(1.0, dmax) &&
                          orth_q <= ts * 1e-9 && orth_v <= ts * 1e-9 &&
                          spread <= ts * 1e-8 * g.r.diagonal().maxCoeff();
        ok += pass;
        if (!pass && detail.empty())
            detail = "case " + std::to_string(i) + ": rec " + lfmimo::format_double(rec_err) +
                     " spread " + lfmimo::format_double(spread);
    }
    return {{"reconstruction, orthogonality, equal diagonal", ok == n, detail}};
}

std::vector<PropertyResult> verify_zero_forcing(int n, std::uint64_t seed, double ts) {
    int ok = 0;
    std::string detail;
    lfmimo::Rng rng(lfmimo::derive_seed(seed, 13));
    for (int i = 0; i < n; ++i) {
        lfmimo::SystemConfig cfg;
        cfg.nt = 2 + i % 4;
        cfg.nr = 2 + (i / 2) % 4;
        cfg.k = 1 + i % std::min(cfg.nt, cfg.nr);
        cfg.p_total = double(cfg.k);
        cfg.sigma2_n = 0.2;
        const lfmimo::ChannelMatrix ch =
            lfmimo::generate_channel(cfg, lfmimo::derive_seed(seed, 1, std::uint64_t(i)));
        const lfmimo::Precoder p = random_precoder(rng, cfg);
        const lfmimo::DfeDesign d = lfmimo::design_receiver(ch, p, cfg);
        const Eigen::MatrixXcd resid =
            d.g * ch.h * p.p - d.b - Eigen::MatrixXcd::Identity(cfg.k, cfg.k);
        const bool pass = resid.cwiseAbs().maxCoeff() <= ts * 1e-9;
        ok += pass;
        if (!pass && detail.empty())
            detail = "GHP - B - I residual " + lfmimo::format_double(resid.cwiseAbs().maxCoeff()) +
                     " at channel " + std::to_string(i);
    }
    return {{"GHP - B = I", ok == n, detail}};
}

std::vector<PropertyResult> verify_isotropy(int n, std::uint64_t seed, double ts) {
    lfmimo::SystemConfig cfg;
    cfg.nt = 4;
    cfg.nr = 4;
    cfg.k = 2;
    cfg.p_total = 2.0;
    cfg.sigma2_n = 1.0;
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(cfg.nt, cfg.nt);
    for (int i = 0; i < n; ++i) {
        const lfmimo::ChannelMatrix ch =
            lfmimo::generate_channel(cfg, lfmimo::derive_seed(seed, 1, std::uint64_t(i)));
        const lfmimo::Precoder p = lfmimo::optimal_precoder(ch, cfg);
        const Eigen::MatrixXcd pbar = p.p / std::sqrt(cfg.p_total / double(cfg.k));
        acc += pbar * pbar.adjoint();
    }
    const Eigen::MatrixXcd mean = acc / double(n);
    const double err =
        (mean - 0.5 * Eigen::MatrixXcd::Identity(cfg.nt, cfg.nt)).cwiseAbs().maxCoeff();
    const double tol = ts * 0.02 * std::sqrt(20000.0 / double(n));
    return {{"mean(Pbar Pbar^H) = (k/nt) I",
             err <= tol,
             "max deviation " + lfmimo::format_double(err) + ", tol " + lfmimo::format_double(tol)}};
}

std::vector<PropertyResult> verify_lemma3(int n, std::uint64_t seed, double ts) {
    int coord_ok = 0, obj_ok = 0;
    std::string detail;
    lfmimo::Rng rng(lfmimo::derive_seed(seed, 17));
    const std::vector<lfmimo::ObjectiveKind> objs = lfmimo::all_objectives(16);
    for (int i = 0; i < n; ++i) {
        lfmimo::SystemConfig cfg;
        cfg.nt = 5;
        cfg.nr = 4;
        cfg.k = 4;
        cfg.p_total = 4.0;
        cfg.sigma2_n = 0.1;
        const lfmimo::ChannelMatrix ch =
            lfmimo::generate_channel(cfg, lfmimo::derive_seed(seed, 1, std::uint64_t(i)));
        const lfmimo::Precoder p = random_precoder(rng, cfg);
        const lfmimo::MseAnalysis dfe = lfmimo::mse_analysis(ch, p, cfg);
        const lfmimo::LinearZfAnalysis lin = lfmimo::linear_zf_analysis(ch, p, cfg);
        const bool coords = ((dfe.log_mse - lin.log_mse).array() <= ts * 1e-12).all();
        coord_ok += coords;
        bool objs_pass = true;
        for (const auto& o : objs)
            objs_pass = objs_pass && lfmimo::eval_objective(o, dfe.log_mse) <=
                                         lfmimo::eval_objective(o, lin.log_mse) + ts * 1e-9;
        obj_ok += objs_pass;
        if (!(coords && objs_pass) && detail.empty())
            detail = "dominance violated at channel " + std::to_string(i);
    }
    return {{"per-stream log-MSE: DFE <= linear", coord_ok == n, detail},
            {"every objective: DFE <= linear", obj_ok == n, ""}};
}

void cmd_verify(const VerifyArgs& a) {
    int n = a.n;
    std::vector<PropertyResult> props;
    if (!(a.tol_scale >= 0.0))
        throw lfmimo::DomainError("verify: --tol-scale must be nonnegative");
    if (a.suite == "majorization") {
        props = verify_majorization(n > 0 ? n : 1000, a.seed, a.tol_scale);
    } else if (a.suite == "gmd") {
        props = verify_gmd(n > 0 ? n : 1000, a.seed, a.tol_scale);
    } else if (a.suite == "zero-forcing") {
        props = verify_zero_forcing(n > 0 ? n : 1000, a.seed, a.tol_scale);
    } else if (a.suite == "isotropy") {
        props = verify_isotropy(n > 0 ? n : 20000, a.seed, a.tol_scale);
    } else if (a.suite == "lemma3") {
        props = verify_lemma3(n > 0 ? n : 500, a.seed, a.tol_scale);
    } else {
        throw lfmimo::DomainError("unknown verify suite: " + a.suite);
    }

    bool all_pass = true;
    std::string csv = "property,status\n";
    json rows = json::array();
    for (const auto& p : props) {
        all_pass = all_pass && p.pass;
        std::cout << (p.pass ? "PASS" : "FAIL") << " " << a.suite << ": " << p.name;
        if (!p.pass && !p.detail.empty())
            std::cout << " (" << p.detail << ")";
        std::cout << "\n";
        csv += "\"" + p.name + "\"," + (p.pass ? "pass" : "fail") + "\n";
        json row;
        row["property"] = p.name;
        row["pass"] = p.pass;
        row["detail"] = p.detail;
        rows.push_back(std::move(row));
    }

    const fs::path dir = make_run_dir(a.run.out_root, "verify", a.run.name);
    json res;
    res["suite"] = a.suite;
    res["pass"] = all_pass;
    res["properties"] = rows;
    write_text(dir / "results.json", res.dump(2) + "\n");
    write_text(dir / "results.csv", csv);
    write_manifest(dir, "verify",
                   json{{"suite", a.suite}, {"n", n}, {"tol_scale", a.tol_scale}},
                   json{{"master", a.seed}}, {"results.csv", "results.json"});

    if (!all_pass)
        g_exit_code = 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MIMO joint precoder / ZF-DFE design and simulation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // codebook build | stats
    auto* codebook = app.add_subcommand("codebook", "build or inspect precoder codebooks");
    codebook->require_subcommand(1);

    CodebookBuildArgs cb_args;
    auto* cb_build = codebook->add_subcommand("build", "pack a codebook and write it as JSON");
    cb_build->add_option("--nt", cb_args.nt, "transmit antennas")->capture_default_str();
    cb_build->add_option("--k", cb_args.k, "spatial streams")->capture_default_str();
    cb_build->add_option("--size", cb_args.size, "number of entries")->capture_default_str();
    cb_build->add_option("--metric", cb_args.metric, "packing metric: proj2 | fs")
        ->capture_default_str();
    cb_build->add_option("--kind", cb_args.kind, "codebook kind: grassmann | permutation")
        ->capture_default_str();
    cb_build->add_option("--seed", cb_args.seed, "packing seed")->capture_default_str();
    cb_build->add_option("--budget", cb_args.budget, "candidate evaluation budget")
        ->capture_default_str();
    add_run_flags(cb_build, cb_args.run);
    cb_build->callback([&cb_args]() { cmd_codebook_build(cb_args); });

    CodebookStatsArgs cs_args;
    auto* cb_stats = codebook->add_subcommand("stats", "report stored and recomputed distances");
    cb_stats->add_option("--file", cs_args.file, "codebook JSON file")->required();
    add_run_flags(cb_stats, cs_args.run);
    cb_stats->callback([&cs_args]() { cmd_codebook_stats(cs_args); });

    // select
    SelectArgs sel_args;
    auto* select = app.add_subcommand("select", "run codebook selection over random channels");
    add_config_flags(select, sel_args.cfg);
    select->add_option("--codebook", sel_args.codebook_path, "codebook JSON file")->required();
    select->add_option("--objective", sel_args.objective,
                       "sum-mse | max-mse | avg-ber | mutual-info | prod-mse")
        ->capture_default_str();
    select->add_option("--qam", sel_args.qam_m, "constellation order for avg-ber")
        ->capture_default_str();
    select->add_flag("--linear", sel_args.linear, "score with the linear ZF receiver");
    select->add_option("--channels", sel_args.n_channels, "number of channel draws")
        ->capture_default_str();
    select->add_option("--channels-file", sel_args.channels_file,
                       "explicit channel list JSON (overrides --channels)");
    select->add_option("--seed", sel_args.seed, "channel seed")->capture_default_str();
    add_run_flags(select, sel_args.run);
    select->callback([&sel_args]() { cmd_select(sel_args); });

    // simulate ber | mi
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo link simulation");
    simulate->require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim_ber = simulate->add_subcommand("ber", "bit error rate sweep");
    add_config_flags(sim_ber, sim_args.cfg);
    sim_ber->add_option("--scheme", sim_args.scheme, "transceiver scheme label")
        ->capture_default_str();
    sim_ber->add_option("--codebook", sim_args.codebook_path, "codebook JSON file");
    sim_ber->add_option("--objective", sim_args.objective, "selection objective");
    sim_ber->add_option("--qam", sim_args.qam_m, "constellation order")->capture_default_str();
    sim_ber->add_option("--snr", sim_args.snr_db, "SNR grid in dB")
        ->required()
        ->delimiter(',');
    sim_ber->add_option("--channels", sim_args.n_channels, "channel draws per point")
        ->capture_default_str();
    sim_ber->add_option("--channels-file", sim_args.channels_file,
                        "explicit channel list JSON (overrides --channels)");
    sim_ber->add_option("--frames", sim_args.n_frames, "frames per channel")
        ->capture_default_str();
    sim_ber->add_option("--seed", sim_args.seed, "master seed")->capture_default_str();
    sim_ber->add_flag("--genie", sim_args.genie, "assume correct past decisions");
    sim_ber->add_option("--workers", sim_args.workers, "worker threads")->capture_default_str();
    add_run_flags(sim_ber, sim_args.run);
    sim_ber->callback([&sim_args]() { cmd_simulate(sim_args, false); });

    SimulateArgs mi_args;
    auto* sim_mi = simulate->add_subcommand("mi", "mutual information sweep");
    add_config_flags(sim_mi, mi_args.cfg);
    sim_mi->add_option("--scheme", mi_args.scheme, "transceiver scheme label")
        ->capture_default_str();
    sim_mi->add_option("--codebook", mi_args.codebook_path, "codebook JSON file");
    sim_mi->add_option("--objective", mi_args.objective, "selection objective");
    sim_mi->add_option("--qam", mi_args.qam_m, "constellation order for avg-ber selection")
        ->capture_default_str();
    sim_mi->add_option("--snr", mi_args.snr_db, "SNR grid in dB")->required()->delimiter(',');
    sim_mi->add_option("--channels", mi_args.n_channels, "channel draws per point")
        ->capture_default_str();
    sim_mi->add_option("--channels-file", mi_args.channels_file,
                       "explicit channel list JSON (overrides --channels)");
    sim_mi->add_option("--seed", mi_args.seed, "master seed")->capture_default_str();
    sim_mi->add_option("--workers", mi_args.workers, "worker threads")->capture_default_str();
    add_run_flags(sim_mi, mi_args.run);
    sim_mi->callback([&mi_args]() { cmd_simulate(mi_args, true); });

    // distortion
    DistortionArgs dist_args;
    auto* distortion = app.add_subcommand("distortion", "codebook quantization loss and bound");
    distortion->add_option("--codebook", dist_args.codebook_path, "codebook JSON file")
        ->required();
    distortion->add_option("--kind", dist_args.kind, "min-snr-loss | det-loss")
        ->capture_default_str();
    distortion->add_option("--density", dist_args.density, "packing density D in (0, 1]");
    distortion->add_flag("--bound", dist_args.bound, "also evaluate the packing bound");
    distortion->add_option("--nr", dist_args.nr, "receive antennas (default nt)");
    distortion->add_option("--p-total", dist_args.p_total, "total power (default k)");
    distortion->add_option("--sigma2", dist_args.sigma2, "noise variance (default 1)");
    distortion->add_option("--samples", dist_args.n_samples, "Monte Carlo samples")
        ->capture_default_str();
    distortion->add_option("--seed", dist_args.seed, "sample seed")->capture_default_str();
    add_run_flags(distortion, dist_args.run);
    distortion->callback([&dist_args]() { cmd_distortion(dist_args); });

    // verify
    VerifyArgs ver_args;
    auto* verify = app.add_subcommand("verify", "run a module invariant suite");
    verify->add_option("--suite", ver_args.suite,
                       "majorization | gmd | zero-forcing | isotropy | lemma3")
        ->required();
    verify->add_option("--n", ver_args.n, "sample count (0: suite default)")
        ->capture_default_str();
    verify->add_option("--seed", ver_args.seed, "suite seed")->capture_default_str();
    verify->add_option("--tol-scale", ver_args.tol_scale,
                       "scale factor on the pass thresholds")
        ->capture_default_str();
    add_run_flags(verify, ver_args.run);
    verify->callback([&ver_args]() { cmd_verify(ver_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::runtime_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 3;
    }
    return g_exit_code;
}
