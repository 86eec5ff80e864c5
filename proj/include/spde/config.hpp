#pragma once

#include "spde/assumptions.hpp"
#include "spde/diagnostics.hpp"
#include "spde/engine.hpp"
#include "spde/operators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spde {

struct OperatorSection {
    OperatorKind kind = OperatorKind::SaltNS;
    double nu = 0.2;
    int noise_modes = 4;
    double xi_amplitude = 0.4;
    double xi_ratio = 0.5;
    std::optional<std::uint64_t> xi_phase_seed;
    /// Spectrum file; replaces the default library when set.
    std::string xi_file;
    /// Spatially constant profiles (cx, cy); replaces the library when nonempty.
    std::vector<std::pair<double, double>> xi_constant;
    /// heat / additive-ou: relaxation rate and additive solenoidal noise modes.
    double rate = 1.0;
    std::vector<ModeIndex> additive_modes;
    double additive_amplitude = 0.1;

    friend bool operator==(const OperatorSection&, const OperatorSection&) = default;
};

struct InitialSection {
    InitialKind kind = InitialKind::Random;
    int band = 3;
    double slope = 1.0;
    double amplitude = 1.0;
    double clip = 2.0;
    bool per_path = true;
    ModeIndex mode{1, 0};

    friend bool operator==(const InitialSection&, const InitialSection&) = default;
};

struct IntegratorSection {
    double dt = 1e-3;
    double T = 0.5;
    Scheme scheme = Scheme::EulerIto;
    int dt_ratio = 2;

    friend bool operator==(const IntegratorSection&, const IntegratorSection&) = default;
};

struct ThresholdSection {
    std::vector<double> M{2.0, 4.0, 8.0, 16.0};
    /// Empty: R chosen from M (auto policy).
    std::optional<double> R;
    double hit_ceiling = 0.05;

    friend bool operator==(const ThresholdSection&, const ThresholdSection&) = default;
};

struct EnsembleSection {
    std::size_t paths = 200;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    double blowup_fraction = 0.01;

    friend bool operator==(const EnsembleSection&, const EnsembleSection&) = default;
};

struct StudySection {
    std::vector<double> deltas{0.08, 0.04, 0.02, 0.01};
    std::vector<int> m_levels{4, 8, 16};
    std::vector<int> partners{2};
    StoppingFamily stopping = StoppingFamily::Both;
    double theta = 0.1;
    ModeIndex probe{1, 0};
    double uniform_tolerance = 0.1;
    std::size_t audit_samples = 500;
    std::vector<int> audit_sets{1, 2, 3};
    int audit_band = 8;
    double audit_p = 2.0;
    double audit_epsilon = 0.1;
    double audit_slope_threshold = 0.25;

    friend bool operator==(const StudySection&, const StudySection&) = default;
};

struct OutputSection {
    std::string dir = "out";
    /// simulate: keep every stride-th state in the snapshot (0: initial and final only).
    std::size_t state_stride = 0;

    friend bool operator==(const OutputSection&, const OutputSection&) = default;
};

struct RunConfig {
    std::string command;
    OperatorSection op;
    std::vector<int> levels{4, 8, 16};
    InitialSection initial;
    IntegratorSection integrator;
    ThresholdSection thresholds;
    EnsembleSection ensemble;
    StudySection study;
    OutputSection output;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline constexpr std::string_view kCommands[] = {
    "simulate",  "moments",        "hitting",    "tightness",     "tightness-functional",
    "cauchy",    "equicontinuity", "hv-bounds",  "assumptions",   "energy-check",
    "strat-ito-check"};

bool is_command(std::string_view name) noexcept;

/// Parses the `[section]` / `key = value` grammar of FORMATS.md and validates
/// the result. Throws ConfigError naming the key and line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
/// Canonical text form; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);
/// Checks the invariants (dt divides T, deltas are multiples of dt below T,
/// every M > 1, ...); errors carry line 0.
void validate_config(const RunConfig& config);

OperatorPair build_pair(const RunConfig& config);
/// Ensemble settings; the path threshold is the largest M.
EnsembleConfig ensemble_config(const RunConfig& config);
AuditSettings audit_settings(const RunConfig& config);

}  // namespace spde
