// Acceptance suite: one line per criterion, PASS or FAIL, with the measured
// values and the pinned tolerances.
//
//   acceptance [--only 1,5] [--expect-fail 2]
//
// Exit status is 0 when the set of failing criteria equals the --expect-fail set
// (empty by default). An expected failure still prints FAIL.

#include "oracles.hpp"
#include "spde/config.hpp"
#include "spde/diagnostics.hpp"
#include "spde/engine.hpp"
#include "spde/orchestrator.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace spde;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Pinned tolerances.
constexpr double kFdAdvectionTol = 1e-8;
constexpr double kFdSaltTol = 1e-8;
constexpr double kSymbolTol = 1e-14;
constexpr double kAnalyticTol = 1e-3;
constexpr double kMcSigmas = 3.0;
constexpr std::size_t kEnergyPaths = 1000;
constexpr std::size_t kStudyPaths = 200;
constexpr std::size_t kAuditSamples = 500;
constexpr double kGammaTol = 0.05;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

/// Accumulates sub-checks of one criterion.
class Checks {
public:
    void add(const std::string& name, bool ok, const std::string& values) {
        pass_ = pass_ && ok;
        if (!text_.empty()) text_ += "; ";
        text_ += name + (ok ? " ok " : " FAILED ") + values;
    }
    Outcome outcome() const { return {pass_, text_}; }

private:
    bool pass_ = true;
    std::string text_;
};

double summary(const EstimateReport& r, const std::string& key) {
    for (const auto& [k, v] : r.summary) {
        if (k == key) return v;
    }
    return std::nan("");
}

RunConfig base_config(const std::string& command) {
    RunConfig c;
    c.command = command;
    c.ensemble.paths = kStudyPaths;
    c.ensemble.workers = 0;
    return c;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
    Checks ck;

    // Advection against an 8th-order finite-difference evaluation on 256^2.
    {
        SpectralField u(3);
        const cplx q(0.0, -0.25);
        u.set({1, 1}, {q, -q});
        u.set({1, -1}, {q, q});
        u += solenoidal_mode(3, {2, 1}, cplx(0.6, 0.3));
        std::mt19937_64 rng(5);
        u += oracle::random_field(rng, 3, 0.5);
        const int out = 2 * u.band();
        const auto U = oracle::synthesize(u, 256);
        const auto fd = oracle::leray(oracle::analyze(oracle::transport(U, U, false), out));
        const double d = oracle::relative_max_diff(advection(u, out), fd);
        ck.add("advection-fd", d < kFdAdvectionTol, fmt(d) + "<" + fmt(kFdAdvectionTol));
    }

    // SALT operator against the same finite-difference oracle.
    {
        const auto xi = SaltCoefficients::default_library(4, 1.0, 0.5, 42);
        std::mt19937_64 rng(6);
        const SpectralField phi = oracle::random_field(rng, 3);
        double worst = 0.0;
        for (int i = 0; i < xi.size(); ++i) {
            const SpectralField b = salt_apply(phi, i, xi);
            const auto P = oracle::synthesize(phi, 256);
            const auto X = oracle::synthesize(xi.field(i), 256);
            const auto fd = oracle::analyze(oracle::transport(X, P, true), b.band());
            worst = std::max(worst, oracle::relative_max_diff(b, fd));
        }
        ck.add("salt-fd", worst < kFdSaltTol, fmt(worst) + "<" + fmt(kFdSaltTol));
    }

    // Drift symbols on band-limited inputs.
    {
        std::mt19937_64 rng(7);
        const SpectralField u = oracle::random_field(rng, 6);
        SpectralField lap(u.band());
        for (std::size_t i = 0; i < u.mode_count(); ++i) {
            const double k2 = u.mode_at(i).norm_sq();
            lap.x()[i] = -0.3 * k2 * u.x()[i];
            lap.y()[i] = -0.3 * k2 * u.y()[i];
        }
        double worst = oracle::relative_max_diff(drift_eval(OperatorPair::heat(0.3), 0.0, u), lap);

        const auto ou = OperatorPair::additive_ou(1.0, {solenoidal_mode(2, {1, 0}, 1.0)});
        worst = std::max(worst, oracle::relative_max_diff(drift_eval(ou, 0.0, u), -1.0 * u));

        const auto xi = SaltCoefficients::constant({{0.5, 1.5}, {-0.3, 0.2}});
        const auto pair = OperatorPair::salt_ns({0.2, 2}, xi);
        const ModeIndex s{2, 1};
        const SpectralField shear = solenoidal_mode(4, s, cplx(0.9, -0.2));
        const SpectralField d = drift_eval(pair, 0.0, shear);
        const double a = 0.5 * 2 + 1.5, b = -0.3 * 2 + 0.2;
        const double sym = -0.2 * 5.0 - 0.5 * (a * a + b * b);
        worst = std::max(worst, oracle::relative_max_diff(
                                    d, solenoidal_mode(d.band(), s, sym * cplx(0.9, -0.2))));
        ck.add("drift-symbols", worst < kSymbolTol, fmt(worst) + "<" + fmt(kSymbolTol));
    }

    // Noise-free heat: stopped moment of a single mode.
    {
        EnsembleConfig e;
        e.paths = 2;
        e.levels = {4, 8, 16};
        e.path.M = kInf;
        e.path.initial.kind = InitialKind::Mode;
        e.path.initial.mode = {2, 1};
        e.path.initial.amplitude = 1.3;
        e.workers = 1;
        const double nu = 0.2, lambda = nu * 5.0, wH = 6.0, a = 1.3, T = e.path.T;
        const auto r = moment_bound_study(e, OperatorPair::heat(nu));
        const double expect =
            a * a * (1.0 + (1.0 - std::exp(-2 * lambda * T)) * wH / (2 * lambda));
        double worst = 0.0;
        for (const auto& c : r.cells) worst = std::max(worst, std::abs(c.estimate / expect - 1));
        ck.add("heat-moment", worst < kAnalyticTol, fmt(worst) + "<" + fmt(kAnalyticTol));
    }

    // Additive OU on one mode: terminal mean and variance within 3 standard errors.
    {
        const double rate = 1.0, s = 0.5, a = 1.0;
        const auto pair = OperatorPair::additive_ou(rate, {solenoidal_mode(2, {1, 0}, s)});
        PathConfig pc;
        pc.level = 2;
        pc.M = kInf;
        pc.initial.kind = InitialKind::Mode;
        pc.initial.mode = {1, 0};
        pc.initial.amplitude = a;
        pc.initial.band = 1;
        pc.record_increments = false;
        const std::size_t paths = 4000;
        const auto finals = parallel_map<double>(paths, 0, [&](std::size_t i) {
            PathConfig p = pc;
            p.seed = path_seed(11, i);
            return simulate_path(p, pair).final_state.at({1, 0}).y.real();
        });
        const SampleStats st = sample_stats(finals);
        std::vector<double> dev2(paths);
        for (std::size_t i = 0; i < paths; ++i) dev2[i] = std::pow(finals[i] - st.mean, 2);
        const SampleStats var = sample_stats(dev2);
        const double T = pc.T;
        const double mean = a * std::exp(-rate * T);
        const double variance = s * s * (1 - std::exp(-2 * rate * T)) / (2 * rate);
        const double zm = std::abs(st.mean - mean) / st.std_error;
        const double zv = std::abs(var.mean - variance) / var.std_error;
        ck.add("ou-moments", zm <= kMcSigmas && zv <= kMcSigmas,
               "z_mean=" + fmt(zm) + " z_var=" + fmt(zv) + "<=" + fmt(kMcSigmas));
    }
    return ck.outcome();
}

Outcome energy_identity() {
    RunConfig c = base_config("energy-check");
    c.ensemble.paths = kEnergyPaths;
    const EstimateReport r = run_study("energy-check", c);
    return {r.pass, "paths=" + std::to_string(kEnergyPaths) +
                        " literal_ratio=" + fmt(summary(r, "residual_ratio")) + " in [" +
                        fmt(summary(r, "ratio_low")) + ", " + fmt(summary(r, "ratio_high")) +
                        "]; bracket_ratio=" + fmt(summary(r, "residual_ratio_bracket")) +
                        " (informational)"};
}

Outcome uniform_bounds() {
    Checks ck;
    for (const std::string cmd : {"moments", "hv-bounds"}) {
        const EstimateReport r = run_study(cmd, base_config(cmd));
        ck.add(cmd, r.pass,
               "max_rel_dev=" + fmt(summary(r, "max_relative_deviation")) + "<=0.1");
    }
    return ck.outcome();
}

Outcome hitting_decay() {
    const EstimateReport r = run_study("hitting", base_config("hitting"));
    return {r.pass, "P(M=16)=" + fmt(summary(r, "sup_frequency_at_max_M")) + "<" +
                        fmt(summary(r, "ceiling")) + ", nonincreasing within 2 SE margin=" +
                        fmt(r.margin)};
}

Outcome cauchy_property() {
    Checks ck;
    RunConfig c = base_config("cauchy");
    const EstimateReport r = run_study("cauchy", c);
    std::string vals;
    for (const auto& cell : r.cells) vals += fmt(cell.estimate) + " ";
    ck.add("salt-ns-decreasing", r.pass, "[" + vals + "] margin=" + fmt(r.margin));

    // Noise-free heat: tail modes m < |k|_inf <= 2m of a broadband initial
    // condition, each decaying by (1 - nu |k|^2 dt) per step.
    EnsembleConfig e = ensemble_config(c);
    e.paths = 2;
    e.path.M = kInf;
    e.path.initial.band = 32;
    e.path.initial.slope = 2.0;
    e.path.initial.per_path = false;
    e.partner_factors = {2};
    const double nu = 0.2, dt = e.path.dt, T = e.path.T;
    const std::size_t K = e.path.steps();
    const auto h = cauchy_convergence_study(e, OperatorPair::heat(nu));
    const SpectralField psi0 =
        make_initial(e.path.initial, *e.member(e.m_levels.front(), 0).initial_seed);
    double worst = 0.0, worst_cont = 0.0;
    for (const auto& cell : h.cells) {
        const int m = cell.level, n = 2 * m;
        double discrete = 0.0, continuous = 0.0;
        for (std::size_t i = 0; i < psi0.mode_count(); ++i) {
            const ModeIndex k = psi0.mode_at(i);
            if (k.inf_norm() <= m || k.inf_norm() > n) continue;
            const double en = 0.5 * (std::norm(psi0.x()[i]) + std::norm(psi0.y()[i]));
            const double l = nu * k.norm_sq(), w = weight(Space::H, k);
            const double q = std::pow(1 - l * dt, 2);
            discrete += en * (1.0 + w * dt * (1 - std::pow(q, double(K))) / (1 - q));
            continuous += en * (1.0 + w * (1 - std::exp(-2 * l * T)) / (2 * l));
        }
        worst = std::max(worst, std::abs(cell.estimate / discrete - 1));
        worst_cont = std::max(worst_cont, std::abs(cell.estimate / continuous - 1));
    }
    ck.add("heat-tail", worst < kAnalyticTol,
           fmt(worst) + "<" + fmt(kAnalyticTol) + " (continuous-time rel. dev " +
               fmt(worst_cont) + ")");
    return ck.outcome();
}

Outcome tightness_premises() {
    Checks ck;
    for (const std::string cmd : {"tightness", "tightness-functional", "equicontinuity"}) {
        const EstimateReport r = run_study(cmd, base_config(cmd));
        ck.add(cmd, r.pass, "margin=" + fmt(r.margin));
    }
    return ck.outcome();
}

Outcome strat_ito() {
    const EstimateReport r = run_study("strat-ito-check", base_config("strat-ito-check"));
    std::string vals;
    for (const auto& cell : r.cells) {
        vals += cell.label + ": " + fmt(cell.estimate) + " (se " + fmt(cell.std_error) + "); ";
    }
    return {r.pass, vals + "gap_ratio=" + fmt(summary(r, "gap_ratio")) +
                        " margin=" + fmt(r.margin)};
}

Outcome assumption_audit_criterion() {
    Checks ck;
    RunConfig c = base_config("assumptions");
    c.study.audit_samples = kAuditSamples;
    const EstimateReport salt = run_study("assumptions", c);
    std::size_t fits = 0;
    for (const auto& cell : salt.cells) fits += cell.label.starts_with("A") ? 1 : 0;
    ck.add("salt-ns", salt.pass,
           std::to_string(fits) + " cells, margin=" + fmt(salt.margin));

    c.op.kind = OperatorKind::Heat;
    c.study.audit_sets = {1};
    const EstimateReport heat = run_study("assumptions", c);
    double gamma = std::nan("");
    for (const auto& cell : heat.cells) {
        if (cell.label != "A1.2a") continue;
        for (const auto& [k, v] : cell.extra) {
            if (k == "gamma") gamma = v;
        }
    }
    // 2 nu min_k |k|^2 / (1 + |k|^2) over the audited band, by enumeration.
    double min_ratio = kInf;
    for (int kx = -c.study.audit_band; kx <= c.study.audit_band; ++kx) {
        for (int ky = -c.study.audit_band; ky <= c.study.audit_band; ++ky) {
            const double k2 = kx * kx + ky * ky;
            if (k2 > 0) min_ratio = std::min(min_ratio, k2 / (1 + k2));
        }
    }
    const double expect = 2.0 * c.op.nu * min_ratio;
    const double rel = std::abs(gamma / expect - 1);
    ck.add("heat-gamma", heat.pass && rel <= kGammaTol,
           "gamma=" + fmt(gamma) + " expected=" + fmt(expect) + " rel=" + fmt(rel) +
               "<=" + fmt(kGammaTol));
    return ck.outcome();
}

std::vector<std::pair<std::string, std::string>> digests(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    const auto j = nlohmann::json::parse(in);
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : j.at("files")) {
        out.emplace_back(f.at("file").get<std::string>(), f.at("sha256").get<std::string>());
    }
    return out;
}

Outcome reproducibility() {
    Checks ck;
    const fs::path root = fs::temp_directory_path() / "spde_acceptance_repro";
    fs::remove_all(root);
    std::vector<std::pair<std::string, RunConfig>> runs;
    {
        RunConfig c = base_config("simulate");
        c.output.state_stride = 25;
        runs.emplace_back("simulate", c);
    }
    for (const std::string cmd : {"moments", "cauchy", "strat-ito-check", "assumptions"}) {
        RunConfig c = base_config(cmd);
        c.ensemble.paths = 24;
        c.study.audit_samples = 100;
        runs.emplace_back(cmd, c);
    }
    for (auto& [cmd, c] : runs) {
        // Same config and seed twice; then a different worker count, which changes
        // only the config text echoed into the JSON outputs.
        std::vector<std::vector<std::pair<std::string, std::string>>> seen;
        for (const unsigned workers : {0u, 0u, 1u}) {
            c.ensemble.workers = workers;
            const fs::path dir = root / (cmd + "_" + std::to_string(seen.size()));
            run(cmd, c, dir);
            seen.push_back(digests(dir));
        }
        const bool same = seen[0] == seen[1] && !seen[0].empty();
        bool workers_same = seen[0].size() == seen[2].size();
        for (std::size_t k = 0; workers_same && k < seen[0].size(); ++k) {
            if (!seen[0][k].first.ends_with(".json")) {
                workers_same = seen[0][k] == seen[2][k];
            }
        }
        ck.add(cmd, same && workers_same,
               std::to_string(seen[0].size()) + " files" +
                   (workers_same ? "" : ", differs across worker counts"));
    }
    fs::remove_all(root);
    return ck.outcome();
}

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
};

std::set<int> parse_ids(const std::string& s) {
    std::set<int> ids;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) ids.insert(std::stoi(tok));
    }
    return ids;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, expect_fail;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if ((a == "--only" || a == "--expect-fail") && i + 1 < argc) {
            (a == "--only" ? only : expect_fail) = parse_ids(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--only ids] [--expect-fail ids]\n", argv[0]);
            return 2;
        }
    }

    const std::vector<Criterion> criteria{
        {1, "oracle-equivalence", oracle_equivalence},
        {2, "energy-identity", energy_identity},
        {3, "uniform-moment-bounds", uniform_bounds},
        {4, "hitting-probability-decay", hitting_decay},
        {5, "galerkin-cauchy", cauchy_property},
        {6, "tightness-premises", tightness_premises},
        {7, "ito-stratonovich-consistency", strat_ito},
        {8, "assumption-audit", assumption_audit_criterion},
        {9, "reproducibility", reproducibility},
    };

    std::set<int> failed;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) failed.insert(c.id);
        std::printf("%s criterion %d %s: %s (%.0fs)\n", o.pass ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }

    std::set<int> expected;
    for (int id : expect_fail) {
        if (only.empty() || only.contains(id)) expected.insert(id);
    }
    if (failed != expected) {
        std::printf("unexpected outcome: %zu failing, %zu expected to fail\n", failed.size(),
                    expected.size());
        return 1;
    }
    return 0;
}
