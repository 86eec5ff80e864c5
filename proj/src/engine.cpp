#include "spde/engine.hpp"

#include "spde/errors.hpp"
#include "spde/path_functional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spde {

namespace {

constexpr std::uint64_t kInitialSalt = 0x5eed'1c00'0000'0001ULL;

struct Norms {
    double u2 = 0.0;
    double h2 = 0.0;
    double v2 = 0.0;
};

Norms triple_norms(const SpectralField& f) {
    Norms n;
    const auto x = f.x();
    const auto y = f.y();
    for (std::size_t i = 0; i < f.mode_count(); ++i) {
        const ModeIndex k = f.mode_at(i);
        const double e = std::norm(x[i]) + std::norm(y[i]);
        const double w = k.is_zero() ? e : 0.5 * e;
        const double wh = 1.0 + k.norm_sq();
        n.u2 += w;
        n.h2 += wh * w;
        n.v2 += wh * wh * w;
    }
    return n;
}

void require_finite(const SpectralField& f, double t) {
    if (!f.all_finite()) {
        throw NumericalBlowup(t, "non-finite coefficients at t = " + std::to_string(t));
    }
}

void require_level(const SpectralField& state, int level) {
    if (level < 1 || state.band() != level) {
        throw UsageError("state band " + std::to_string(state.band()) +
                         " does not match Galerkin level " + std::to_string(level));
    }
}

void require_increments(std::span<const double> dW, const OperatorPair& pair) {
    if (static_cast<int>(dW.size()) != pair.noise_count()) {
        throw UsageError("expected " + std::to_string(pair.noise_count()) +
                         " increments, got " + std::to_string(dW.size()));
    }
}

double cutoff_factor(const SpectralField& state, const std::optional<CutoffSpec>& cutoff) {
    return cutoff ? cutoff_eval(norm_sq(state, Space::H), *cutoff) : 1.0;
}

SpectralField em_apply(const SpectralField& state, double f, double dt,
                       std::span<const double> dW, const StepWorkspace& ws) {
    SpectralField out = state;
    if (f > 0.0) {
        out.axpy(f * dt, ws.drift);
        for (std::size_t i = 0; i < dW.size(); ++i) {
            out.axpy(f * dW[i], ws.columns[i]);
        }
    }
    return out;
}

SpectralField heun_finish(const SpectralField& state, double t, const OperatorPair& pair,
                          std::span<const double> dW, double dt, int level, StepWorkspace& ws) {
    SpectralField pred = state;
    pred.axpy(dt, ws.drift);
    for (std::size_t i = 0; i < dW.size(); ++i) {
        pred.axpy(dW[i], ws.columns[i]);
    }
    require_finite(pred, t + dt);
    pair.evaluate(t + dt, pred, level, DriftForm::Stratonovich, ws.drift2, ws.columns2);
    SpectralField out = state;
    out.axpy(0.5 * dt, ws.drift);
    out.axpy(0.5 * dt, ws.drift2);
    for (std::size_t i = 0; i < dW.size(); ++i) {
        out.axpy(0.5 * dW[i], ws.columns[i]);
        out.axpy(0.5 * dW[i], ws.columns2[i]);
    }
    return out;
}

std::optional<CutoffSpec> make_cutoff(double R) {
    if (!std::isfinite(R)) {
        return std::nullopt;
    }
    return CutoffSpec(R);
}

/// One Galerkin level of a (possibly coupled) run.
class LevelRunner {
public:
    LevelRunner(const PathConfig& config, const OperatorPair& pair, int level,
                const SpectralField& initial)
        : config_(config), pair_(pair), level_(level),
          state_(project_n(initial.resized(level), level)),
          tracker_(config.M, norm_sq(state_, Space::U)) {
        record_.level = level;
        record_.dt = config.dt;
        record_.T = config.T;
        record_.steps = config.steps();
        record_.seed = config.seed;
        record_.scheme = config.scheme;
        record_.M = config.M;
        record_.baseline = tracker_.baseline();
        record_.R = config.R.value_or(auto_cutoff_R(level, config.M, record_.baseline));
        record_.noise_count = pair.noise_count();
        record_.state_stride = config.state_stride;
        record_.initial = state_;
        cutoff_ = make_cutoff(record_.R);
        const std::size_t n = record_.steps + 1;
        record_.norm_u2.reserve(n);
        record_.norm_h2.reserve(n);
        record_.norm_v2.reserve(n);
        if (config.record_increments) {
            record_.increments.reserve(record_.steps * static_cast<std::size_t>(pair.noise_count()));
        }
    }

    bool stopped() const noexcept { return tracker_.stopped(); }
    const SpectralField& state() const noexcept { return state_; }

    /// Records grid index j: norms, stopping decision, stored state.
    void visit(std::size_t j, const StateObserver& on_state) {
        const Norms n = triple_norms(state_);
        if (!std::isfinite(n.v2)) {
            // Finite coefficients whose squared norms overflow.
            throw NumericalBlowup(record_.time(j), "norm overflow at t = " +
                                                       std::to_string(record_.time(j)));
        }
        record_.norm_u2.push_back(n.u2);
        record_.norm_h2.push_back(n.h2);
        record_.norm_v2.push_back(n.v2);
        sup_u2_ = std::max(sup_u2_, n.u2);
        tracker_.observe(j, sup_u2_ + integral_h2_);
        integral_h2_ += n.h2 * config_.dt;
        if (config_.state_stride > 0 && j % config_.state_stride == 0) {
            record_.states.push_back(state_);
        }
        if (on_state) {
            on_state(j, state_);
        }
    }

    void step(std::size_t j, std::span<const double> dW, const StepObserver& on_step) {
        const double t = record_.time(j);
        double f = 1.0;
        if (config_.scheme == Scheme::EulerIto) {
            pair_.evaluate(t, state_, level_, DriftForm::Ito, ws_.drift, ws_.columns);
            f = cutoff_factor(state_, cutoff_);
        } else {
            pair_.evaluate(t, state_, level_, DriftForm::Stratonovich, ws_.drift, ws_.columns);
        }
        if (on_step) {
            on_step(StepView{j, t, state_, ws_.drift, ws_.columns, dW, config_.dt, f});
        }
        SpectralField next = config_.scheme == Scheme::EulerIto
                                 ? em_apply(state_, f, config_.dt, dW, ws_)
                                 : heun_finish(state_, t, pair_, dW, config_.dt, level_, ws_);
        require_finite(next, t + config_.dt);
        state_ = std::move(next);
        if (config_.record_increments) {
            record_.increments.insert(record_.increments.end(), dW.begin(), dW.end());
        }
    }

    PathRecord finish() {
        record_.hit_index = tracker_.hit_index();
        // Frozen state: norms stay at their stopping values.
        while (record_.norm_u2.size() < record_.steps + 1) {
            record_.norm_u2.push_back(record_.norm_u2.back());
            record_.norm_h2.push_back(record_.norm_h2.back());
            record_.norm_v2.push_back(record_.norm_v2.back());
        }
        record_.final_state = state_;
        return std::move(record_);
    }

private:
    const PathConfig& config_;
    const OperatorPair& pair_;
    int level_;
    SpectralField state_;
    StoppingTracker tracker_;
    std::optional<CutoffSpec> cutoff_;
    StepWorkspace ws_;
    PathRecord record_;
    double sup_u2_ = 0.0;
    double integral_h2_ = 0.0;
};

std::uint64_t initial_seed_of(const PathConfig& config) {
    return config.initial_seed.value_or(mix_seed(config.seed ^ kInitialSalt));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(master) + index);
}

BrownianDriver::BrownianDriver(std::uint64_t seed, int m, double dt)
    : seed_(seed), dt_(dt), sqrt_dt_(std::sqrt(dt)) {
    if (m < 0) {
        throw UsageError("noise dimension must be nonnegative");
    }
    if (!(dt > 0.0)) {
        throw UsageError("driver step must be positive");
    }
    for (int i = 0; i < m; ++i) {
        streams_.emplace_back(mix_seed(seed + 0x632be59bd9b4e019ULL * static_cast<std::uint64_t>(i + 1)));
        gauss_.emplace_back(0.0, 1.0);
    }
}

void BrownianDriver::next(std::span<double> dW) {
    if (dW.size() != streams_.size()) {
        throw UsageError("increment buffer has wrong length");
    }
    for (std::size_t i = 0; i < streams_.size(); ++i) {
        dW[i] = sqrt_dt_ * gauss_[i](streams_[i]);
    }
    ++position_;
}

std::vector<double> BrownianDriver::next() {
    std::vector<double> dW(streams_.size());
    next(dW);
    return dW;
}

SpectralField make_initial(const InitialSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
    case InitialKind::Zero:
        return SpectralField(std::max(spec.band, 1));
    case InitialKind::Mode: {
        const int band = std::max(spec.band, spec.mode.inf_norm());
        return solenoidal_mode(band, spec.mode, cplx(spec.amplitude, 0.0));
    }
    case InitialKind::Random: {
        if (spec.band < 1) {
            throw UsageError("random initial condition needs band >= 1");
        }
        std::mt19937_64 rng(seed);
        SpectralField f = random_solenoidal_field(spec.band, spec.band, spec.slope, spec.amplitude, rng);
        const double u = norm(f, Space::U);
        if (spec.clip > 0.0 && u > spec.clip) {
            f *= spec.clip / u;
        }
        return f;
    }
    }
    return SpectralField(1);
}

std::size_t PathConfig::steps() const {
    return static_cast<std::size_t>(std::llround(T / dt));
}

void PathConfig::validate() const {
    if (level < 1) {
        throw UsageError("Galerkin level must be >= 1");
    }
    if (!(dt > 0.0) || !(T > 0.0) || !std::isfinite(T)) {
        throw UsageError("dt and T must be positive");
    }
    const double ratio = T / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        throw UsageError("dt must divide T");
    }
    if (!(M > 0.0)) {
        throw UsageError("stopping threshold M must be positive");
    }
    if (R && !(*R > 0.0)) {
        throw UsageError("cutoff threshold R must be positive");
    }
}

double auto_cutoff_R(int level, double M, double baseline) {
    return (1.0 + 2.0 * level * level) * (M + baseline);
}

void StoppingTracker::observe(std::size_t j, double uh) {
    if (last_ && j <= *last_) {
        throw UsageError("stopping tracker fed out of order");
    }
    last_ = j;
    if (!hit_ && uh >= threshold()) {
        hit_ = j;
    }
}

std::optional<double> PathRecord::hit_time() const {
    if (!hit_index) {
        return std::nullopt;
    }
    return time(*hit_index);
}

const SpectralField& PathRecord::state(std::size_t j) const {
    if (state_stride == 0 || j % state_stride != 0 || j / state_stride >= states.size()) {
        throw UsageError("state at grid index " + std::to_string(j) + " was not recorded");
    }
    return states[j / state_stride];
}

namespace {

double stopped_time(const PathRecord& path, double t) {
    if (!(t >= 0.0) || t > path.T * (1.0 + 1e-12)) {
        throw UsageError("time " + std::to_string(t) + " outside path grid [0, " +
                         std::to_string(path.T) + "]");
    }
    const double end = static_cast<double>(path.steps) * path.dt;
    t = std::min(t, end);
    if (const auto h = path.hit_time()) {
        t = std::min(t, *h);
    }
    return t;
}

}  // namespace

double uh_functional(const PathRecord& path, double t) {
    return running_functional(path.norm_u2, path.norm_h2, path.dt, stopped_time(path, t));
}

double hv_functional(const PathRecord& path, double t) {
    return running_functional(path.norm_h2, path.norm_v2, path.dt, stopped_time(path, t));
}

double uh_functional_at(const PathRecord& path, std::size_t j) {
    return running_functional_at(path.norm_u2, path.norm_h2, path.dt,
                                 std::min(j, path.stop_index()));
}

double hv_functional_at(const PathRecord& path, std::size_t j) {
    return running_functional_at(path.norm_h2, path.norm_v2, path.dt,
                                 std::min(j, path.stop_index()));
}

namespace {

std::vector<double> stopped_series(const PathRecord& path, const std::vector<double>& sup_sq,
                                   const std::vector<double>& int_sq) {
    auto s = running_functional_series(sup_sq, int_sq, path.dt);
    const std::size_t stop = path.stop_index();
    for (std::size_t j = stop + 1; j < s.size(); ++j) {
        s[j] = s[stop];
    }
    return s;
}

}  // namespace

std::vector<double> uh_functional_series(const PathRecord& path) {
    return stopped_series(path, path.norm_u2, path.norm_h2);
}

std::vector<double> hv_functional_series(const PathRecord& path) {
    return stopped_series(path, path.norm_h2, path.norm_v2);
}

SpectralField em_step(const SpectralField& state, double t, const OperatorPair& pair,
                      std::span<const double> dW, double dt, int level,
                      const std::optional<CutoffSpec>& cutoff, StepWorkspace* ws) {
    require_level(state, level);
    require_increments(dW, pair);
    StepWorkspace local;
    StepWorkspace& w = ws ? *ws : local;
    const double f = cutoff_factor(state, cutoff);
    if (f == 0.0) {
        return state;
    }
    pair.evaluate(t, state, level, DriftForm::Ito, w.drift, w.columns);
    SpectralField out = em_apply(state, f, dt, dW, w);
    require_finite(out, t + dt);
    return out;
}

SpectralField em_step(const SpectralField& state, double t, const OperatorPair& pair,
                      BrownianDriver& driver, int level, const std::optional<CutoffSpec>& cutoff) {
    const std::vector<double> dW = driver.next();
    return em_step(state, t, pair, dW, driver.dt(), level, cutoff);
}

SpectralField heun_step(const SpectralField& state, double t, const OperatorPair& pair,
                        std::span<const double> dW, double dt, int level, StepWorkspace* ws) {
    require_level(state, level);
    require_increments(dW, pair);
    StepWorkspace local;
    StepWorkspace& w = ws ? *ws : local;
    pair.evaluate(t, state, level, DriftForm::Stratonovich, w.drift, w.columns);
    SpectralField out = heun_finish(state, t, pair, dW, dt, level, w);
    require_finite(out, t + dt);
    return out;
}

SpectralField heun_step(const SpectralField& state, double t, const OperatorPair& pair,
                        BrownianDriver& driver, int level) {
    const std::vector<double> dW = driver.next();
    return heun_step(state, t, pair, dW, driver.dt(), level);
}

PathRecord simulate_path(const PathConfig& config, const OperatorPair& pair,
                         const PathObservers& observers) {
    config.validate();
    const SpectralField initial = make_initial(config.initial, initial_seed_of(config));
    LevelRunner runner(config, pair, config.level, initial);
    BrownianDriver driver(config.seed, pair.noise_count(), config.dt);
    std::vector<double> dW(static_cast<std::size_t>(pair.noise_count()));
    const std::size_t steps = config.steps();
    for (std::size_t j = 0;; ++j) {
        runner.visit(j, observers.on_state);
        if (runner.stopped() || j == steps) {
            break;
        }
        driver.next(dW);
        runner.step(j, dW, observers.on_step);
    }
    return runner.finish();
}

PathRecord try_simulate_path(const PathConfig& config, const OperatorPair& pair,
                             const PathObservers& observers) {
    try {
        return simulate_path(config, pair, observers);
    } catch (const NumericalBlowup& e) {
        PathRecord r;
        r.level = config.level;
        r.dt = config.dt;
        r.T = config.T;
        r.steps = config.steps();
        r.seed = config.seed;
        r.scheme = config.scheme;
        r.M = config.M;
        r.noise_count = pair.noise_count();
        r.blown_up = true;
        r.blowup_time = e.time();
        return r;
    }
}

std::pair<PathRecord, PathRecord> coupled_pair(const PathConfig& config, const OperatorPair& pair,
                                               int m, int n, const PairObserver& observer) {
    config.validate();
    if (m < 1 || m > n) {
        throw UsageError("coupled levels need 1 <= m <= n");
    }
    const SpectralField initial = make_initial(config.initial, initial_seed_of(config));
    LevelRunner coarse(config, pair, m, initial);
    LevelRunner fine(config, pair, n, initial);
    BrownianDriver driver(config.seed, pair.noise_count(), config.dt);
    std::vector<double> dW(static_cast<std::size_t>(pair.noise_count()));
    const std::size_t steps = config.steps();
    for (std::size_t j = 0;; ++j) {
        if (!coarse.stopped()) {
            coarse.visit(j, {});
        }
        if (!fine.stopped()) {
            fine.visit(j, {});
        }
        if (observer) {
            observer(j, coarse.state(), fine.state());
        }
        if ((coarse.stopped() && fine.stopped()) || j == steps) {
            break;
        }
        driver.next(dW);
        if (!coarse.stopped()) {
            coarse.step(j, dW, {});
        }
        if (!fine.stopped()) {
            fine.step(j, dW, {});
        }
    }
    return {coarse.finish(), fine.finish()};
}

std::size_t joint_stop_index(const PathRecord& a, const PathRecord& b) noexcept {
    return std::min(a.stop_index(), b.stop_index());
}

void EnergyResidual::on_state(std::size_t j, const SpectralField& state) {
    const double e = norm_sq(state, Space::U);
    if (j == 0) {
        initial_ = e;
        accumulated_ = 0.0;
        residual_.clear();
    }
    residual_.resize(j + 1, 0.0);
    residual_[j] = e - initial_ - accumulated_;
}

void EnergyResidual::on_step(const StepView& v) {
    const double f = v.cutoff;
    double increment = 2.0 * f * inner(v.drift, v.state, Space::U) * v.dt;
    SpectralField noise(v.state.band());
    for (std::size_t i = 0; i < v.columns.size(); ++i) {
        increment += 2.0 * f * inner(v.columns[i], v.state, Space::U) * v.dW[i];
        if (form_ == ResidualForm::Literal) {
            increment += f * f * norm_sq(v.columns[i], Space::U) * v.dt;
        } else {
            noise.axpy(f * v.dW[i], v.columns[i]);
        }
    }
    if (form_ == ResidualForm::Bracket) {
        increment += norm_sq(noise, Space::U);
    }
    accumulated_ += increment;
}

std::vector<double> energy_identity_residual(const PathRecord& path, const OperatorPair& pair,
                                             ResidualForm form) {
    if (path.scheme != Scheme::EulerIto) {
        throw UsageError("energy identity residual is defined for Euler-Ito records");
    }
    const std::size_t stop = path.stop_index();
    const auto m = static_cast<std::size_t>(path.noise_count);
    if (path.state_stride != 1 || path.states.size() < stop + 1 ||
        path.increments.size() < stop * m) {
        throw UsageError("energy identity residual needs every state and increment recorded");
    }
    const std::optional<CutoffSpec> cutoff = make_cutoff(path.R);
    EnergyResidual acc(form);
    StepWorkspace ws;
    for (std::size_t j = 0;; ++j) {
        acc.on_state(j, path.states[j]);
        if (j == stop) {
            break;
        }
        const SpectralField& u = path.states[j];
        pair.evaluate(path.time(j), u, path.level, DriftForm::Ito, ws.drift, ws.columns);
        const std::span<const double> dW(path.increments.data() + j * m, m);
        acc.on_step(StepView{j, path.time(j), u, ws.drift, ws.columns, dW, path.dt,
                             cutoff_factor(u, cutoff)});
    }
    std::vector<double> out = acc.series();
    out.resize(path.steps + 1, out.back());
    return out;
}

}  // namespace spde
