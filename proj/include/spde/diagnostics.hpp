#pragma once

#include "spde/assumptions.hpp"
#include "spde/engine.hpp"
#include "spde/operators.hpp"

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spde {

/// Sum by recursive halving; the result depends only on the order of `v`.
double pairwise_sum(std::span<const double> v);

struct SampleStats {
    double mean = 0.0;
    /// Sample standard deviation / sqrt(n); 0 for n < 2.
    double std_error = 0.0;
    std::size_t n = 0;
};
SampleStats sample_stats(std::span<const double> v);

/// Runs fn(0..count) on `workers` threads (0: hardware concurrency) and returns
/// the results in index order. The first exception, by index, is rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t count, unsigned workers,
                            const std::function<T(std::size_t)>& fn);

/// Which stopping times the increment studies start from.
enum class StoppingFamily { Hit, Fixed, Both };

struct EnsembleConfig {
    /// Template path; level and seed are set per path.
    PathConfig path;
    std::size_t paths = 200;
    std::uint64_t master_seed = 1;
    std::vector<int> levels{4, 8, 16};
    std::vector<double> M_list{2.0, 4.0, 8.0, 16.0};
    /// Upper bound on the hitting frequency at the largest M.
    double hit_ceiling = 0.05;
    std::vector<double> deltas{0.08, 0.04, 0.02, 0.01};
    std::vector<int> m_levels{4, 8, 16};
    /// Cauchy partners n = factor * m.
    std::vector<int> partner_factors{2};
    StoppingFamily stopping = StoppingFamily::Both;
    /// Deterministic stopping time of the Fixed family.
    double theta = 0.1;
    /// Probe f of the functional tightness study: solenoidal unit mode.
    ModeIndex probe{1, 0};
    /// Relative spread around the median allowed by the uniform-in-n contracts.
    double uniform_tolerance = 0.1;
    /// Studies fail when more than this fraction of paths blows up.
    double blowup_fraction = 0.01;
    /// Second time step of the energy and Ito-Stratonovich checks is dt / dt_ratio.
    int dt_ratio = 2;
    unsigned workers = 0;

    /// Path config of ensemble member `index` at `level`.
    PathConfig member(int level, std::size_t index) const;
    /// Grid steps of delta; UsageError unless delta is a positive multiple of dt below T.
    std::size_t delta_steps(double delta) const;
    void validate() const;
};

struct ReportCell {
    std::string label;
    int level = -1;
    std::string param;
    double value = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::size_t blowups = 0;
    bool pass = true;
    std::vector<std::pair<std::string, double>> extra;
};

struct EstimateReport {
    std::string id;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t ensemble = 0;
    std::size_t blowups = 0;
    std::vector<ReportCell> cells;
    bool pass = true;
    /// Signed slack of the pass criterion; negative when failing.
    double margin = 0.0;
    std::vector<std::pair<std::string, double>> summary;
    std::vector<std::string> notes;
};

/// One row per cell: label,level,param,value,estimate,stderr,samples,blowups,pass
/// followed by the extra columns of the first cell.
void write_report_csv(std::ostream& out, const EstimateReport& report);

/// E ||Psi^n||^2_{UH,T} of the stopped process for every level.
EstimateReport moment_bound_study(const EnsembleConfig& config, const OperatorPair& pair);
/// E ||Psi^n||^2_{HV,T} of the stopped process for every level.
EstimateReport hv_bound_study(const EnsembleConfig& config, const OperatorPair& pair);
/// P(tau^M_n <= T) for every level and M in config.M_list.
EstimateReport hitting_probability_study(const EnsembleConfig& config, const OperatorPair& pair);
/// E int_0^{T-delta} ||Psi_{s+delta} - Psi_s||_U^2 ds.
EstimateReport increment_tightness_study(const EnsembleConfig& config, const OperatorPair& pair);
/// E |<Psi_{(gamma+delta) ^ T} - Psi_gamma, f>_U| for the configured stopping families.
EstimateReport functional_tightness_study(const EnsembleConfig& config, const OperatorPair& pair);
/// Common-noise E ||Psi^n - Psi^m||^2_{UH, tau_m ^ tau_n} for n = factor * m.
EstimateReport cauchy_convergence_study(const EnsembleConfig& config, const OperatorPair& pair);
/// E (||Psi||^2_{UH,(theta+delta) ^ tau} - ||Psi||^2_{UH,theta ^ tau}).
EstimateReport equicontinuity_study(const EnsembleConfig& config, const OperatorPair& pair);
/// RMS of the discrete Ito energy identity residual at T for dt and dt / dt_ratio,
/// at the first configured level.
EstimateReport energy_check_study(const EnsembleConfig& config, const OperatorPair& pair);
/// Paired Heun-Stratonovich and Euler-Ito ensembles at dt and dt / dt_ratio.
EstimateReport strat_ito_check(const EnsembleConfig& config, const OperatorPair& pair);
/// Assumption audit of sets 1-3 plus the structural identities.
EstimateReport assumption_audit(const OperatorPair& pair, const std::vector<int>& sets,
                                const AuditSettings& settings);

}  // namespace spde

#include "spde/detail/parallel_map.hpp"
