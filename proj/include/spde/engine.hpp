#pragma once

#include "spde/operators.hpp"
#include "spde/spectral_field.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace spde {

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
/// Seed of path `index` in an ensemble with the given master seed.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Gaussian increments dW^i ~ N(0, dt), one mt19937_64 stream per noise index.
class BrownianDriver {
public:
    BrownianDriver(std::uint64_t seed, int m, double dt);

    std::uint64_t seed() const noexcept { return seed_; }
    int m() const noexcept { return static_cast<int>(streams_.size()); }
    double dt() const noexcept { return dt_; }
    /// Number of steps drawn so far.
    std::uint64_t position() const noexcept { return position_; }

    /// Fills dW[0..m) with the next step's increments.
    void next(std::span<double> dW);
    std::vector<double> next();

private:
    std::uint64_t seed_;
    double dt_;
    double sqrt_dt_;
    std::uint64_t position_ = 0;
    std::vector<std::mt19937_64> streams_;
    std::vector<std::normal_distribution<double>> gauss_;
};

enum class InitialKind { Zero, Mode, Random };

/// Initial condition Psi_0 before projection onto V_n.
struct InitialSpec {
    InitialKind kind = InitialKind::Random;
    /// Random: largest active |k|_inf and spectrum (1 + |k|^2)^(-slope).
    int band = 3;
    double slope = 1.0;
    /// Random: rms U-norm; Mode: coefficient magnitude.
    double amplitude = 1.0;
    /// Random fields with U-norm above this are rescaled onto it (L-infinity bound).
    double clip = 2.0;
    /// Random: false draws one field shared by every path of an ensemble.
    bool per_path = true;
    /// Mode: coeff(mode) = amplitude * mode_perp / |mode|.
    ModeIndex mode{1, 0};
};

/// Builds Psi_0 on band max(spec.band, mode band). `seed` feeds the random kind.
SpectralField make_initial(const InitialSpec& spec, std::uint64_t seed);

enum class Scheme { EulerIto, HeunStratonovich };

struct PathConfig {
    int level = 8;
    double dt = 1e-3;
    double T = 0.5;
    Scheme scheme = Scheme::EulerIto;
    /// Stopping threshold; +inf disables stopping.
    double M = 16.0;
    /// Cutoff threshold; empty selects auto_cutoff_R.
    std::optional<double> R;
    InitialSpec initial;
    /// Seed of the driver, and of the initial condition unless initial_seed is set.
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> initial_seed;
    /// Keep every stride-th state (0 keeps none).
    std::size_t state_stride = 0;
    bool record_increments = true;

    std::size_t steps() const;
    void validate() const;
};

/// R = (1 + 2 n^2)(M + baseline): since ||u||_H^2 <= (1 + 2n^2) ||u||_U^2 on V_n,
/// the cutoff stays inactive up to the hitting time.
double auto_cutoff_R(int level, double M, double baseline);

/// First grid index where the UH functional reaches M + baseline.
class StoppingTracker {
public:
    StoppingTracker(double M, double baseline) : M_(M), baseline_(baseline) {}

    double threshold() const noexcept { return M_ + baseline_; }
    double baseline() const noexcept { return baseline_; }
    std::optional<std::size_t> hit_index() const noexcept { return hit_; }
    bool stopped() const noexcept { return hit_.has_value(); }

    /// Feeds the functional value at grid index j (indices must increase).
    void observe(std::size_t j, double uh);

private:
    double M_;
    double baseline_;
    std::optional<std::size_t> hit_;
    std::optional<std::size_t> last_;
};

struct PathRecord {
    int level = 0;
    double dt = 0.0;
    double T = 0.0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::EulerIto;
    double M = 0.0;
    double R = 0.0;
    double baseline = 0.0;
    int noise_count = 0;
    std::optional<std::size_t> hit_index;
    bool blown_up = false;
    double blowup_time = 0.0;

    /// ||Psi_j||^2 in U, H, V at every grid index j = 0..steps (constant after the hit).
    std::vector<double> norm_u2, norm_h2, norm_v2;
    /// dW[step * noise_count + i] for every step taken.
    std::vector<double> increments;
    std::size_t state_stride = 0;
    /// states[j / state_stride] for grid indices j divisible by the stride.
    std::vector<SpectralField> states;
    SpectralField initial;
    SpectralField final_state;

    double time(std::size_t j) const noexcept { return static_cast<double>(j) * dt; }
    std::optional<double> hit_time() const;
    /// Grid index up to which the stopped path moves: hit index or steps.
    std::size_t stop_index() const noexcept { return hit_index.value_or(steps); }
    const SpectralField& state(std::size_t j) const;
};

/// UH functional of the stopped path at time t: functional at min(t, hit time).
double uh_functional(const PathRecord& path, double t);
/// HV functional of the stopped path at time t.
double hv_functional(const PathRecord& path, double t);
double uh_functional_at(const PathRecord& path, std::size_t j);
double hv_functional_at(const PathRecord& path, std::size_t j);
/// Stopped functionals at every grid index 0..steps.
std::vector<double> uh_functional_series(const PathRecord& path);
std::vector<double> hv_functional_series(const PathRecord& path);

/// Evaluation data of one step, handed to observers before the state update.
struct StepView {
    std::size_t step;
    double t;
    const SpectralField& state;
    /// Drift (Ito form for EM, Stratonovich for Heun) and noise columns at `state`.
    const SpectralField& drift;
    const std::vector<SpectralField>& columns;
    std::span<const double> dW;
    double dt;
    /// f_R(||state||_H^2) applied to the EM increment (1 for Heun).
    double cutoff;
};
using StepObserver = std::function<void(const StepView&)>;
/// Called at every grid index j = 0..stop_index with the current state.
using StateObserver = std::function<void(std::size_t j, const SpectralField& state)>;

/// Reusable evaluation buffers for the step functions.
struct StepWorkspace {
    SpectralField drift;
    std::vector<SpectralField> columns;
    SpectralField drift2;
    std::vector<SpectralField> columns2;
};

/// state + f_R(||state||_H^2) [P_n A dt + sum_i P_n G_i dW^i]. Throws NumericalBlowup
/// (carrying t + dt) on non-finite output. state.band() must equal level.
SpectralField em_step(const SpectralField& state, double t, const OperatorPair& pair,
                      std::span<const double> dW, double dt, int level,
                      const std::optional<CutoffSpec>& cutoff, StepWorkspace* ws = nullptr);
SpectralField em_step(const SpectralField& state, double t, const OperatorPair& pair,
                      BrownianDriver& driver, int level, const std::optional<CutoffSpec>& cutoff);

/// Heun predictor-corrector for the Stratonovich form: drift without the
/// corrector, noise columns averaged between state and predictor.
SpectralField heun_step(const SpectralField& state, double t, const OperatorPair& pair,
                        std::span<const double> dW, double dt, int level,
                        StepWorkspace* ws = nullptr);
SpectralField heun_step(const SpectralField& state, double t, const OperatorPair& pair,
                        BrownianDriver& driver, int level);

struct PathObservers {
    StepObserver on_step;
    StateObserver on_state;
};

/// Runs the truncated Galerkin system at config.level until T, freezing the
/// state at the first hitting time. Propagates NumericalBlowup.
PathRecord simulate_path(const PathConfig& config, const OperatorPair& pair,
                         const PathObservers& observers = {});
/// As simulate_path, but a blowup returns a record flagged blown_up.
PathRecord try_simulate_path(const PathConfig& config, const OperatorPair& pair,
                             const PathObservers& observers = {});

/// Called with the grid index and both states while either level still moves.
using PairObserver =
    std::function<void(std::size_t j, const SpectralField& coarse, const SpectralField& fine)>;

/// Levels m <= n driven by the same initial condition and increments.
/// config.level is ignored. Each record is frozen at its own hit;
/// joint_stop_index gives the min of the two.
std::pair<PathRecord, PathRecord> coupled_pair(const PathConfig& config, const OperatorPair& pair,
                                               int m, int n, const PairObserver& observer = {});
std::size_t joint_stop_index(const PathRecord& a, const PathRecord& b) noexcept;

enum class ResidualForm {
    /// Quadratic variation term sum_i ||G_i||^2 dt.
    Literal,
    /// Realized quadratic variation ||sum_i G_i dW^i||^2.
    Bracket,
};

/// Accumulates the discrete Ito energy identity residual step by step:
///   r_j = ||Psi_j||^2 - ||Psi_0||^2 - sum_{l<j} [2<A,Psi> dt + QV + 2 sum_i <G_i,Psi> dW^i]
/// in the U norm, with A and G_i evaluated at Psi_l.
class EnergyResidual {
public:
    explicit EnergyResidual(ResidualForm form) : form_(form) {}

    /// Observer for simulate_path.
    void on_step(const StepView& v);
    void on_state(std::size_t j, const SpectralField& state);

    /// r_j for j = 0..last observed index.
    const std::vector<double>& series() const noexcept { return residual_; }

private:
    ResidualForm form_;
    double initial_ = 0.0;
    double accumulated_ = 0.0;
    std::vector<double> residual_;
};

/// Residual series of a recorded EM path (needs state_stride == 1 and increments).
std::vector<double> energy_identity_residual(const PathRecord& path, const OperatorPair& pair,
                                             ResidualForm form = ResidualForm::Literal);

}  // namespace spde
