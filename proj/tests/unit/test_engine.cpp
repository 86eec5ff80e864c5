#include "oracles.hpp"
#include "spde/engine.hpp"
#include "spde/errors.hpp"
#include "spde/path_functional.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace spde;

namespace {

OperatorPair salt_pair(int m = 4) {
    return OperatorPair::salt_ns({0.2, m}, SaltCoefficients::default_library(m, 0.4));
}

PathConfig mode_config(int level, ModeIndex k, double a, double T = 0.5, double dt = 1e-3) {
    PathConfig c;
    c.level = level;
    c.dt = dt;
    c.T = T;
    c.M = std::numeric_limits<double>::infinity();
    c.initial.kind = InitialKind::Mode;
    c.initial.mode = k;
    c.initial.amplitude = a;
    c.initial.band = 1;
    return c;
}

/// Gauss-Hermite rule with 3 nodes: exact expectation of polynomials of degree <= 5 in dW.
template <class F>
SpectralField gaussian_expectation(double dt, F&& step) {
    const double s = std::sqrt(3.0 * dt);
    SpectralField e = (2.0 / 3.0) * step(0.0);
    e.axpy(1.0 / 6.0, step(s));
    e.axpy(1.0 / 6.0, step(-s));
    return e;
}

}  // namespace

TEST(Driver, ReproducibleAndIndependentStreams) {
    BrownianDriver a(77, 3, 1e-2), b(77, 3, 1e-2), c(78, 3, 1e-2);
    double s0 = 0.0, s01 = 0.0, s00 = 0.0;
    const int steps = 20000;
    bool differs = false;
    for (int j = 0; j < steps; ++j) {
        const auto x = a.next();
        const auto y = b.next();
        const auto z = c.next();
        ASSERT_EQ(x, y);
        differs = differs || x != z;
        s0 += x[0];
        s00 += x[0] * x[0];
        s01 += x[0] * x[1];
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(a.position(), static_cast<std::uint64_t>(steps));
    // mean 0, variance dt, no cross-correlation; 5 sigma bands.
    EXPECT_NEAR(s0 / steps, 0.0, 5 * 0.1 / std::sqrt(steps));
    EXPECT_NEAR(s00 / steps, 1e-2, 5 * 1e-2 * std::sqrt(2.0 / steps));
    EXPECT_NEAR(s01 / steps, 0.0, 5 * 1e-2 / std::sqrt(steps));
}

TEST(EmStep, ZeroPairLeavesStateUnchanged) {
    std::mt19937_64 rng(1);
    const SpectralField u = oracle::random_field(rng, 4);
    const double dW[1] = {0.3};
    EXPECT_EQ(em_step(u, 0.0, OperatorPair::zero(), std::span<const double>(dW, 0), 1e-3, 4,
                      std::nullopt),
              u);
}

TEST(EmStep, HeatSymbol) {
    const ModeIndex k{2, 1};
    const SpectralField u = solenoidal_mode(3, k, cplx(0.7, 0.2));
    const double nu = 0.3, dt = 1e-2;
    const SpectralField v =
        em_step(u, 0.0, OperatorPair::heat(nu), std::span<const double>(), dt, 3, std::nullopt);
    const double f = 1.0 - nu * 5.0 * dt;
    EXPECT_LT(oracle::relative_max_diff(v, f * u), 1e-15);
}

TEST(EmStep, CutoffFreezesLargeStates) {
    const SpectralField u = solenoidal_mode(3, {1, 1}, 3.0);  // ||u||_H^2 = 27
    const auto pair = salt_pair();
    const double dW[4] = {0.1, -0.2, 0.05, 0.3};
    EXPECT_EQ(em_step(u, 0.0, pair, dW, 1e-3, 3, CutoffSpec(13.5)), u);
    EXPECT_EQ(em_step(u, 0.0, pair, dW, 1e-3, 3, CutoffSpec(10.0)), u);
    EXPECT_NE(em_step(u, 0.0, pair, dW, 1e-3, 3, CutoffSpec(27.0)), u);
}

TEST(EmStep, BlowupCarriesTime) {
    const SpectralField u = solenoidal_mode(3, {1, 1}, 1e300);
    try {
        em_step(u, 0.25, OperatorPair::heat(1e10), std::span<const double>(), 1e-3, 3,
                std::nullopt);
        FAIL() << "expected NumericalBlowup";
    } catch (const NumericalBlowup& e) {
        EXPECT_DOUBLE_EQ(e.time(), 0.251);
    }
}

TEST(HeunStep, DeterministicHeunWithoutNoise) {
    const ModeIndex k{1, 2};
    const SpectralField u = solenoidal_mode(3, k, cplx(0.4, -0.9));
    const double nu = 0.5, dt = 0.01, l = nu * 5.0 * dt;
    const SpectralField v =
        heun_step(u, 0.0, OperatorPair::heat(nu), std::span<const double>(), dt, 3);
    EXPECT_LT(oracle::relative_max_diff(v, (1.0 - l + 0.5 * l * l) * u), 1e-15);
}

TEST(HeunStep, OneStepMeanMatchesItoWithCorrector) {
    // Constant xi: the linear Stratonovich step and the Ito step with corrector
    // have the same mean up to O(dt^2).
    const auto xi = SaltCoefficients::constant({{0.6, 0.8}, {-0.5, 0.2}});
    const auto pair = OperatorPair::salt_ns({0.2, 2}, xi);
    const SpectralField u = solenoidal_mode(3, {2, 1}, cplx(1.0, 0.0));
    double prev = 0.0;
    for (double dt : {0.02, 0.01, 0.005}) {
        auto heun = [&](double w) {
            const double dW[2] = {w, 0.0};
            return heun_step(u, 0.0, pair, dW, dt, 3);
        };
        auto ito = [&](double w) {
            const double dW[2] = {w, 0.0};
            return em_step(u, 0.0, pair, dW, dt, 3, std::nullopt);
        };
        auto heun2 = [&](double w) {
            const double dW[2] = {0.0, w};
            return heun_step(u, 0.0, pair, dW, dt, 3);
        };
        const SpectralField eh1 = gaussian_expectation(dt, heun);
        const SpectralField eh2 = gaussian_expectation(dt, heun2);
        const SpectralField ei = gaussian_expectation(dt, ito);
        // The linear Heun step is quadratic in (dW1, dW2) and the cross term has mean 0.
        const SpectralField det = heun(0.0);
        const SpectralField eh = eh1 + eh2 - det;
        const double gap = norm(eh - ei, Space::U);
        if (prev > 0.0) {
            EXPECT_NEAR(prev / gap, 4.0, 0.4) << "dt=" << dt;
        }
        EXPECT_LT(gap, 2.0 * dt * dt);
        prev = gap;
    }
}

TEST(Simulate, ZeroPathIsConstant) {
    PathConfig c;
    c.level = 4;
    c.T = 0.1;
    c.initial.kind = InitialKind::Zero;
    const PathRecord r = simulate_path(c, OperatorPair::zero());
    EXPECT_FALSE(r.hit_index.has_value());
    for (std::size_t j = 0; j <= r.steps; ++j) {
        EXPECT_EQ(r.norm_u2[j], 0.0);
        EXPECT_EQ(uh_functional_at(r, j), 0.0);
    }
    EXPECT_TRUE(r.final_state.is_zero());
}

TEST(Simulate, HeatDecayFirstOrderInDt) {
    const ModeIndex k{2, 1};
    const double nu = 0.5, a = 1.5, lambda = nu * 5.0;
    double prev = 0.0;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
        const PathRecord r = simulate_path(mode_config(4, k, a, 0.5, dt), OperatorPair::heat(nu));
        double err = 0.0;
        for (std::size_t j = 0; j <= r.steps; ++j) {
            const double exact = a * a * std::exp(-2.0 * lambda * r.time(j));
            err = std::max(err, std::abs(r.norm_u2[j] - exact));
        }
        EXPECT_LT(err, 2.0 * a * a * lambda * dt);
        if (prev > 0.0) {
            EXPECT_NEAR(prev / err, 2.0, 0.1);
        }
        prev = err;
    }
}

TEST(Simulate, Reproducible) {
    PathConfig c;
    c.level = 8;
    c.T = 0.1;
    c.seed = 12345;
    c.state_stride = 10;
    const auto pair = salt_pair();
    const PathRecord a = simulate_path(c, pair);
    const PathRecord b = simulate_path(c, pair);
    EXPECT_EQ(a.norm_u2, b.norm_u2);
    EXPECT_EQ(a.norm_h2, b.norm_h2);
    EXPECT_EQ(a.increments, b.increments);
    EXPECT_EQ(a.final_state, b.final_state);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        EXPECT_EQ(a.states[i], b.states[i]);
    }
    c.seed = 12346;
    EXPECT_NE(simulate_path(c, pair).norm_u2, a.norm_u2);
}

TEST(Simulate, InitialStateIsProjected) {
    PathConfig c;
    c.level = 2;
    c.T = 0.01;
    c.initial.band = 5;
    c.state_stride = 1;
    c.initial_seed = 9;
    const PathRecord r = simulate_path(c, salt_pair());
    const SpectralField psi0 = make_initial(c.initial, 9);
    EXPECT_EQ(r.states.front(), project_n(psi0, 2).resized(2));
    EXPECT_DOUBLE_EQ(r.baseline, norm_sq(project_n(psi0, 2), Space::U));
}

TEST(Simulate, TinyThresholdHitsAtFirstGridPoint) {
    PathConfig c;
    c.level = 8;
    c.T = 0.1;
    c.M = 1e-9;
    const PathRecord r = simulate_path(c, salt_pair());
    ASSERT_TRUE(r.hit_index.has_value());
    EXPECT_EQ(*r.hit_index, 1u);
    EXPECT_DOUBLE_EQ(*r.hit_time(), c.dt);
}

TEST(Simulate, FrozenAfterHitAndCausal) {
    PathConfig c;
    c.level = 6;
    c.T = 0.5;
    c.M = 0.9;
    c.seed = 5;
    c.initial.amplitude = 1.0;
    const auto pair = salt_pair();
    const PathRecord r = simulate_path(c, pair);
    ASSERT_TRUE(r.hit_index.has_value());
    const std::size_t h = *r.hit_index;
    ASSERT_LT(h, r.steps);
    const double uh = uh_functional_at(r, h);
    EXPECT_GE(uh, c.M + r.baseline);
    EXPECT_LT(uh_functional_at(r, h - 1), c.M + r.baseline);
    for (std::size_t j = h; j <= r.steps; ++j) {
        EXPECT_EQ(r.norm_u2[j], r.norm_u2[h]);
        EXPECT_EQ(uh_functional_at(r, j), uh);
    }
    EXPECT_NEAR(uh_functional(r, c.T), uh, 1e-12 * uh);
    // The decision at the hit does not depend on anything later: a shorter horizon
    // that still contains the hit gives the same index and the same prefix.
    PathConfig shorter = c;
    shorter.T = r.time(h + 1);
    const PathRecord s = simulate_path(shorter, pair);
    ASSERT_TRUE(s.hit_index.has_value());
    EXPECT_EQ(*s.hit_index, h);
    for (std::size_t j = 0; j <= h; ++j) {
        EXPECT_EQ(s.norm_u2[j], r.norm_u2[j]);
    }
}

TEST(Simulate, IncrementsComeFromTheDriverInOrder) {
    PathConfig c;
    c.level = 4;
    c.T = 0.05;
    c.seed = 31;
    const auto pair = salt_pair(3);
    std::vector<std::uint64_t> seen_steps;
    BrownianDriver reference(c.seed, 3, c.dt);
    PathObservers obs;
    obs.on_step = [&](const StepView& v) {
        seen_steps.push_back(v.step);
        const auto expect = reference.next();
        for (int i = 0; i < 3; ++i) {
            EXPECT_EQ(v.dW[static_cast<std::size_t>(i)], expect[static_cast<std::size_t>(i)]);
        }
    };
    const PathRecord r = simulate_path(c, pair, obs);
    ASSERT_EQ(seen_steps.size(), r.steps);
    for (std::size_t j = 0; j < seen_steps.size(); ++j) {
        EXPECT_EQ(seen_steps[j], j);
    }
    // Replaying the recorded increments reproduces the path.
    const std::vector<double>& inc = r.increments;
    SpectralField state = project_n(r.initial, 4).resized(4);
    for (std::size_t j = 0; j + 1 < r.steps; ++j) {
        state = em_step(state, r.time(j), pair, std::span<const double>(&inc[3 * j], 3), c.dt, 4,
                        CutoffSpec(r.R));
    }
    EXPECT_DOUBLE_EQ(norm_sq(state, Space::U), r.norm_u2[r.steps - 1]);
}

TEST(Simulate, StrongOrderOneForAdditiveNoise) {
    const auto pair = OperatorPair::heat(1.0, {solenoidal_mode(1, {1, 0}, 0.5)});
    const double T = 0.5, dt0 = 0.02;
    const int fine_per_coarse = 16;
    const double dt_ref = dt0 / fine_per_coarse;
    const std::size_t ref_steps = static_cast<std::size_t>(std::llround(T / dt_ref));
    const int paths = 200;
    double err[2] = {0.0, 0.0};
    const SpectralField u0 = solenoidal_mode(2, {1, 0}, 1.0);
    for (int p = 0; p < paths; ++p) {
        BrownianDriver drv(path_seed(3, static_cast<std::uint64_t>(p)), 1, dt_ref);
        std::vector<double> w(ref_steps);
        for (auto& x : w) x = drv.next()[0];
        SpectralField ref = u0;
        for (std::size_t j = 0; j < ref_steps; ++j) {
            ref = em_step(ref, j * dt_ref, pair, std::span<const double>(&w[j], 1), dt_ref, 2,
                          std::nullopt);
        }
        for (int level = 0; level < 2; ++level) {
            const int group = fine_per_coarse >> level;
            const double dt = dt_ref * group;
            SpectralField u = u0;
            for (std::size_t j = 0; j < ref_steps; j += group) {
                double dW = 0.0;
                for (int g = 0; g < group; ++g) dW += w[j + g];
                u = em_step(u, j * dt_ref, pair, std::span<const double>(&dW, 1), dt, 2,
                            std::nullopt);
            }
            err[level] += distance_sq(u, ref, Space::U);
        }
    }
    const double factor = std::sqrt(err[0] / err[1]);
    EXPECT_GE(factor, 1.7);
    EXPECT_LE(factor, 2.3);
}

TEST(Coupled, EqualLevelsGiveIdenticalRecords) {
    PathConfig c;
    c.T = 0.05;
    c.seed = 8;
    const auto [a, b] = coupled_pair(c, salt_pair(), 6, 6);
    EXPECT_EQ(a.norm_u2, b.norm_u2);
    EXPECT_EQ(a.final_state, b.final_state);
}

TEST(Coupled, HeatTailDecayIsAnalytic) {
    PathConfig c;
    c.T = 0.2;
    c.dt = 1e-3;
    c.M = std::numeric_limits<double>::infinity();
    c.initial.band = 6;
    c.initial_seed = 4;
    const double nu = 0.3;
    const auto pair = OperatorPair::heat(nu);
    std::vector<double> du, dh;
    auto obs = [&](std::size_t j, const SpectralField& coarse, const SpectralField& fine) {
        if (du.size() <= j) {
            du.resize(j + 1);
            dh.resize(j + 1);
        }
        du[j] = distance_sq(fine, coarse, Space::U);
        dh[j] = distance_sq(fine, coarse, Space::H);
    };
    const auto [a, b] = coupled_pair(c, pair, 2, 5, obs);
    const std::size_t J = joint_stop_index(a, b);
    EXPECT_EQ(J, a.steps);
    const double measured = running_functional_at(du, dh, c.dt, J);

    // Tail modes 2 < |k|_inf <= 5 of Psi_0 decay by (1 - nu |k|^2 dt) per step.
    const SpectralField psi0 = make_initial(c.initial, 4);
    double sup = 0.0, integral = 0.0;
    for (std::size_t i = 0; i < psi0.mode_count(); ++i) {
        const ModeIndex k = psi0.mode_at(i);
        if (k.inf_norm() <= 2 || k.inf_norm() > 5) continue;
        const double e = 0.5 * (std::norm(psi0.x()[i]) + std::norm(psi0.y()[i]));
        const double q = std::pow(1.0 - nu * k.norm_sq() * c.dt, 2);
        sup += e;
        integral += e * weight(Space::H, k) * c.dt * (1.0 - std::pow(q, double(J))) / (1.0 - q);
    }
    EXPECT_NEAR(measured, sup + integral, 1e-12 * (sup + integral));
}

TEST(Energy, ZeroPairResidualVanishes) {
    PathConfig c;
    c.level = 4;
    c.T = 0.05;
    c.state_stride = 1;
    const PathRecord r = simulate_path(c, OperatorPair::zero());
    for (double x : energy_identity_residual(r, OperatorPair::zero())) {
        EXPECT_EQ(x, 0.0);
    }
}

TEST(Energy, HeatResidualIsFirstOrder) {
    const auto pair = OperatorPair::heat(0.5);
    double prev = 0.0;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
        PathConfig c = mode_config(4, {2, 1}, 1.0, 0.5, dt);
        c.state_stride = 1;
        const PathRecord r = simulate_path(c, pair);
        const double res = std::abs(energy_identity_residual(r, pair).back());
        EXPECT_GT(res, 0.0);
        if (prev > 0.0) {
            EXPECT_NEAR(prev / res, 2.0, 0.4);
        }
        prev = res;
    }
}

TEST(Energy, ObserverMatchesRecordedResidual) {
    PathConfig c;
    c.level = 4;
    c.T = 0.05;
    c.state_stride = 1;
    c.seed = 19;
    const auto pair = salt_pair();
    EnergyResidual live(ResidualForm::Literal);
    PathObservers obs;
    obs.on_step = [&](const StepView& v) { live.on_step(v); };
    obs.on_state = [&](std::size_t j, const SpectralField& s) { live.on_state(j, s); };
    const PathRecord r = simulate_path(c, pair, obs);
    const auto post = energy_identity_residual(r, pair);
    ASSERT_EQ(post.size(), live.series().size());
    for (std::size_t j = 0; j < post.size(); ++j) {
        EXPECT_NEAR(post[j], live.series()[j], 1e-13);
    }
}

TEST(Energy, AdditiveOuResidualScaling) {
    // Bracket form: O(dt) in RMS. Literal form: the quadratic-variation mismatch
    // sum (dW^2 - dt) leaves an O(sqrt(dt)) martingale.
    const auto pair = OperatorPair::additive_ou(1.0, {solenoidal_mode(1, {1, 0}, 0.8)});
    double rms[2][2] = {};
    const int paths = 1000;
    for (int d = 0; d < 2; ++d) {
        const double dt = d == 0 ? 1e-2 : 5e-3;
        for (int p = 0; p < paths; ++p) {
            PathConfig c = mode_config(2, {1, 0}, 1.0, 0.5, dt);
            c.seed = path_seed(7, static_cast<std::uint64_t>(p));
            EnergyResidual lit(ResidualForm::Literal), br(ResidualForm::Bracket);
            PathObservers obs;
            obs.on_step = [&](const StepView& v) {
                lit.on_step(v);
                br.on_step(v);
            };
            obs.on_state = [&](std::size_t j, const SpectralField& s) {
                lit.on_state(j, s);
                br.on_state(j, s);
            };
            simulate_path(c, pair, obs);
            rms[d][0] += std::pow(lit.series().back(), 2);
            rms[d][1] += std::pow(br.series().back(), 2);
        }
    }
    const double lit_ratio = std::sqrt(rms[0][0] / rms[1][0]);
    const double br_ratio = std::sqrt(rms[0][1] / rms[1][1]);
    EXPECT_GE(br_ratio, 1.7);
    EXPECT_LE(br_ratio, 2.3);
    EXPECT_NEAR(lit_ratio, std::sqrt(2.0), 0.15);
}

TEST(Functional, ClosedForms) {
    const std::vector<double> a(11, 2.0), b(11, 3.0);
    EXPECT_NEAR(running_functional(a, b, 0.1, 0.7), 2.0 + 3.0 * 0.7, 1e-14);
    EXPECT_EQ(running_functional(std::vector<double>(5, 0.0), std::vector<double>(5, 0.0), 0.1,
                                 0.4),
              0.0);
    const std::vector<double> s{1.0, 4.0}, h{2.0, 5.0};
    EXPECT_DOUBLE_EQ(running_functional(s, h, 0.5, 0.5), 4.0 + 2.0 * 0.5);
    EXPECT_THROW(running_functional(s, h, 0.5, 0.6), UsageError);
    EXPECT_THROW(running_functional(s, h, 0.5, -0.1), UsageError);
    const auto series = running_functional_series(a, b, 0.1);
    for (std::size_t j = 0; j < a.size(); ++j) {
        EXPECT_EQ(series[j], running_functional_at(a, b, 0.1, j));
    }
}

TEST(Functional, HeatDecayedModeHv) {
    const ModeIndex k{1, 1};
    const double nu = 0.4, a = 0.9, dt = 1e-3;
    const PathRecord r = simulate_path(mode_config(3, k, a, 0.3, dt), OperatorPair::heat(nu));
    const double q = std::pow(1.0 - nu * 2.0 * dt, 2);
    const double wH = 3.0, wV = 9.0;
    const std::size_t K = r.steps;
    const double expect = a * a * wH + a * a * wV * dt * (1.0 - std::pow(q, double(K))) / (1.0 - q);
    EXPECT_NEAR(hv_functional(r, 0.3), expect, 1e-12 * expect);
    const double lambda = nu * 2.0;
    const double continuous =
        a * a * wH + a * a * wV * (1.0 - std::exp(-2.0 * lambda * 0.3)) / (2.0 * lambda);
    EXPECT_NEAR(hv_functional(r, 0.3), continuous, 1e-3 * continuous);
}
