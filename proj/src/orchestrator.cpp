#include "spde/orchestrator.hpp"

#include "spde/errors.hpp"
#include "spde/path_io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#ifndef SPDE_VERSION
#define SPDE_VERSION "0.0.0"
#endif

namespace spde {

using nlohmann::json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

/// Non-finite doubles have no JSON literal; they are written as strings.
json number(double x) {
    if (std::isfinite(x)) {
        return x;
    }
    return format_double(x);
}

json pairs_json(const std::vector<std::pair<std::string, double>>& v) {
    json o = json::object();
    for (const auto& [k, x] : v) {
        o[k] = number(x);
    }
    return o;
}

json report_json(const EstimateReport& r, const RunConfig& config) {
    json cells = json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"label", c.label},
                         {"level", c.level},
                         {"param", c.param},
                         {"value", number(c.value)},
                         {"estimate", number(c.estimate)},
                         {"stderr", number(c.std_error)},
                         {"samples", c.samples},
                         {"blowups", c.blowups},
                         {"pass", c.pass},
                         {"extra", pairs_json(c.extra)}});
    }
    return {{"study", r.id},
            {"estimate", number(r.estimate)},
            {"stderr", number(r.std_error)},
            {"ensemble", r.ensemble},
            {"blowups", r.blowups},
            {"pass", r.pass},
            {"margin", number(r.margin)},
            {"summary", pairs_json(r.summary)},
            {"notes", r.notes},
            {"cells", cells},
            {"config", render_config(config)}};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + file.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed: " + file.string());
    }
}

/// simulate: one path per configured level, snapshot + norm CSV each.
bool run_simulate(const RunConfig& config, const std::filesystem::path& dir,
                  std::vector<std::string>& files, std::vector<std::string>& errors) {
    const OperatorPair pair = build_pair(config);
    const EnsembleConfig ens = ensemble_config(config);
    ens.validate();
    json levels = json::array();
    bool pass = true;
    for (int level : config.levels) {
        PathConfig pc = ens.member(level, 0);
        pc.state_stride = config.output.state_stride;
        const PathRecord rec = try_simulate_path(pc, pair);
        const std::string stem = "path_n" + std::to_string(level);
        write_snapshot(dir / (stem + ".snap"), rec);
        {
            std::ofstream csv(dir / (stem + ".csv"));
            if (!csv) {
                throw std::runtime_error("cannot open " + (dir / (stem + ".csv")).string());
            }
            write_norm_csv(csv, rec);
        }
        files.push_back(stem + ".snap");
        files.push_back(stem + ".csv");
        if (rec.blown_up) {
            pass = false;
            errors.push_back("level " + std::to_string(level) + ": numerical blowup at t = " +
                             format_double(rec.blowup_time));
        }
        const auto hit = rec.hit_time();
        levels.push_back({{"level", level},
                          {"seed", rec.seed},
                          {"R", number(rec.R)},
                          {"baseline", number(rec.baseline)},
                          {"hit_time", hit ? json(*hit) : json(nullptr)},
                          {"blown_up", rec.blown_up},
                          {"blowup_time", number(rec.blowup_time)},
                          {"uh_T", rec.blown_up ? json(nullptr)
                                                : number(uh_functional_series(rec).back())},
                          {"hv_T", rec.blown_up ? json(nullptr)
                                                : number(hv_functional_series(rec).back())}});
    }
    const json summary = {{"study", "simulate"},
                          {"pass", pass},
                          {"levels", levels},
                          {"config", render_config(config)}};
    write_text(dir / "simulate.json", summary.dump(2) + "\n");
    files.push_back("simulate.json");
    return pass;
}

}  // namespace

std::string artifact_version() {
    return SPDE_VERSION;
}

std::string sha256_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + file.string() + " for hashing");
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 init failed");
    }
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0 &&
            EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1) {
            throw std::runtime_error("sha256 update failed");
        }
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
        throw std::runtime_error("sha256 final failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return hex.str();
}

EstimateReport run_study(const std::string& command, const RunConfig& config) {
    const OperatorPair pair = build_pair(config);
    if (command == "assumptions") {
        return assumption_audit(pair, config.study.audit_sets, audit_settings(config));
    }
    const EnsembleConfig ens = ensemble_config(config);
    if (command == "moments") {
        return moment_bound_study(ens, pair);
    }
    if (command == "hv-bounds") {
        return hv_bound_study(ens, pair);
    }
    if (command == "hitting") {
        return hitting_probability_study(ens, pair);
    }
    if (command == "tightness") {
        return increment_tightness_study(ens, pair);
    }
    if (command == "tightness-functional") {
        return functional_tightness_study(ens, pair);
    }
    if (command == "cauchy") {
        return cauchy_convergence_study(ens, pair);
    }
    if (command == "equicontinuity") {
        return equicontinuity_study(ens, pair);
    }
    if (command == "energy-check") {
        return energy_check_study(ens, pair);
    }
    if (command == "strat-ito-check") {
        return strat_ito_check(ens, pair);
    }
    throw UsageError("unknown study command '" + command + "'");
}

RunManifest run(const std::string& command, const RunConfig& config,
                const std::filesystem::path& out_dir) {
    if (!is_command(command)) {
        throw UsageError("unknown command '" + command + "'");
    }
    validate_config(config);
    RunManifest m;
    m.command = command;
    m.version = artifact_version();
    m.config_text = render_config(config);
    m.seed = config.ensemble.seed;
    m.started = utc_now();

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " +
                                 ec.message());
    }
    std::vector<std::string> files;
    try {
        if (command == "simulate") {
            m.pass = run_simulate(config, out_dir, files, m.errors);
        } else {
            const EstimateReport r = run_study(command, config);
            {
                std::ofstream csv(out_dir / (command + ".csv"));
                if (!csv) {
                    throw std::runtime_error("cannot open " +
                                             (out_dir / (command + ".csv")).string());
                }
                write_report_csv(csv, r);
            }
            write_text(out_dir / (command + ".json"), report_json(r, config).dump(2) + "\n");
            files.push_back(command + ".csv");
            files.push_back(command + ".json");
            m.pass = r.pass;
            if (r.blowups > 0) {
                m.errors.push_back(std::to_string(r.blowups) + " blown-up paths");
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        m.pass = false;
        m.errors.push_back(e.what());
    }
    for (const auto& f : files) {
        const auto path = out_dir / f;
        m.files.push_back({f, sha256_file(path), std::filesystem::file_size(path)});
    }
    m.finished = utc_now();

    json entries = json::array();
    for (const auto& e : m.files) {
        entries.push_back({{"file", e.file}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    }
    const json doc = {{"command", m.command},
                      {"version", m.version},
                      {"seed", m.seed},
                      {"started", m.started},
                      {"finished", m.finished},
                      {"pass", m.pass},
                      {"errors", m.errors},
                      {"files", entries},
                      {"config", m.config_text}};
    write_text(out_dir / "manifest.json", doc.dump(2) + "\n");
    return m;
}

}  // namespace spde
