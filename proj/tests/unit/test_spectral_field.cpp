#include "oracles.hpp"
#include "spde/errors.hpp"
#include "spde/spectral_field.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace spde;

namespace {

const Space kSpaces[] = {Space::U, Space::H, Space::V, Space::Hstar, Space::Hbar};

SpectralField unit_shear() {
    return single_mode(4, {1, 0}, {0.0, 1.0});
}

}  // namespace

TEST(Norms, ZeroFieldIsZeroEverywhere) {
    const SpectralField z(5);
    for (Space s : kSpaces) {
        EXPECT_EQ(norm(z, s), 0.0);
    }
}

TEST(Norms, SingleModeValues) {
    const SpectralField f = unit_shear();
    EXPECT_DOUBLE_EQ(norm(f, Space::U), 1.0);
    EXPECT_DOUBLE_EQ(norm(f, Space::H), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(norm(f, Space::V), 2.0);
    EXPECT_DOUBLE_EQ(norm(f, Space::Hstar), 1.0 / std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(norm(f, Space::Hbar), std::sqrt(2.0));
}

TEST(Norms, SpaceTags) {
    EXPECT_EQ(parse_space("U"), Space::U);
    EXPECT_EQ(parse_space("H*"), Space::Hstar);
    EXPECT_EQ(parse_space("Hbar"), Space::Hbar);
    EXPECT_THROW(parse_space("W"), UsageError);
}

TEST(Norms, EmbeddingOrderOnRandomFields) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const SpectralField f = oracle::random_field(rng, 1 + trial % 7);
        EXPECT_LE(norm(f, Space::U), norm(f, Space::H));
        EXPECT_LE(norm(f, Space::H), norm(f, Space::V));
        EXPECT_NEAR(norm_sq(f, Space::U), oracle::inner_u(f, f),
                    1e-12 * norm_sq(f, Space::U));
    }
}

TEST(Norms, DistanceAcrossBands) {
    std::mt19937_64 rng(12);
    const SpectralField f = oracle::random_field(rng, 3);
    const SpectralField g = oracle::random_field(rng, 6);
    for (Space s : {Space::U, Space::H, Space::V}) {
        const double d = distance_sq(f, g, s);
        EXPECT_NEAR(d, norm_sq(f.resized(6) - g, s), 1e-12 * d);
        EXPECT_NEAR(d, distance_sq(g, f, s), 1e-12 * d);
    }
}

TEST(Projection, FixesItsRange) {
    std::mt19937_64 rng(1);
    const SpectralField f = oracle::random_field(rng, 3).resized(6);
    EXPECT_EQ(project_n(f, 3), f);
}

TEST(Projection, KillsComplement) {
    const SpectralField f = solenoidal_mode(6, {4, -2}, 1.3);
    EXPECT_TRUE(project_n(f, 3).is_zero());
}

TEST(Projection, MixedTwoModeField) {
    SpectralField f = solenoidal_mode(6, {1, 2}, 0.7);
    f += solenoidal_mode(6, {5, 0}, 2.0);
    const SpectralField p = project_n(f, 3);
    EXPECT_NEAR(norm(p, Space::U), 0.7, 1e-15);
    EXPECT_EQ(p.at({5, 0}), Vec2c{});
}

TEST(Projection, RejectsLevelZero) {
    EXPECT_THROW(project_n(SpectralField(3), 0), UsageError);
}

TEST(Projection, PropertiesOnRandomPairs) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const int band = 2 + trial % 9;
        const int n = 1 + static_cast<int>(rng() % band);
        const SpectralField f = oracle::random_vector_field(rng, band);
        const SpectralField g = oracle::random_vector_field(rng, band);
        const SpectralField pf = project_n(f, n);
        const SpectralField pg = project_n(g, n);
        EXPECT_EQ(project_n(pf, n), pf);
        const double a = inner(pf, g), b = inner(f, pg);
        EXPECT_NEAR(a, b, 1e-12 * (norm(f, Space::U) * norm(g, Space::U)));
        EXPECT_LE(norm(pf, Space::H), norm(f, Space::H));
        EXPECT_LE(norm(pf, Space::V), norm(f, Space::V));
    }
}

TEST(TailBound, Examples) {
    EXPECT_EQ(tail_bound_check(SpectralField(4), 2), 0.0);
    EXPECT_EQ(tail_bound_check(solenoidal_mode(6, {2, 1}, 1.0), 2), 0.0);
    EXPECT_NEAR(tail_bound_check(solenoidal_mode(6, {3, 0}, 1.0), 2), 1.0, 1e-15);
    EXPECT_LT(tail_bound_check(solenoidal_mode(6, {3, 3}, 1.0), 2), 1.0);
    EXPECT_DOUBLE_EQ(mu(2), std::sqrt(10.0));
}

TEST(TailBound, BroadbandFieldsAtEveryLevel) {
    std::mt19937_64 rng(3);
    for (int n : {2, 4, 8}) {
        for (int trial = 0; trial < 1000; ++trial) {
            const SpectralField f = oracle::random_field(rng, 12, 1.0, 0.1);
            const double r = tail_bound_check(f, n);
            EXPECT_GT(r, 0.0);
            EXPECT_LE(r, 1.0);
        }
    }
}

TEST(TailBound, MuIsBruteForceMinimum) {
    for (int n = 1; n <= 10; ++n) {
        double best = INFINITY;
        for (int kx = -20; kx <= 20; ++kx) {
            for (int ky = -20; ky <= 20; ++ky) {
                const ModeIndex k{kx, ky};
                if (k.inf_norm() > n) {
                    best = std::min(best, std::sqrt(weight(Space::H, k) / weight(Space::U, k)));
                }
            }
        }
        EXPECT_DOUBLE_EQ(mu(n), best);
        if (n > 1) {
            EXPECT_GT(mu(n), mu(n - 1));
        }
    }
}

TEST(Growth, Examples) {
    const SpectralField z(3);
    EXPECT_EQ(growth_K(z, Space::U, GrowthProfile(3.0)), 1.0);
    EXPECT_EQ(growth_K(unit_shear(), Space::U, GrowthProfile(0.0)), 2.0);
    const SpectralField two = solenoidal_mode(3, {1, 1}, 2.0);
    EXPECT_DOUBLE_EQ(growth_K(two, Space::U, GrowthProfile(2.0)), 5.0);
    EXPECT_DOUBLE_EQ(growth_K(two, two, Space::U, GrowthProfile(2.0)), 9.0);
    EXPECT_THROW(GrowthProfile(-1.0), UsageError);
}

TEST(Cutoff, SupportConditions) {
    const CutoffSpec c(3.0);
    EXPECT_EQ(cutoff_eval(1.5, c), 1.0);
    EXPECT_EQ(cutoff_eval(3.0, c), 1.0);
    EXPECT_EQ(cutoff_eval(6.0, c), 0.0);
    EXPECT_EQ(cutoff_eval(9.0, c), 0.0);
    EXPECT_THROW(CutoffSpec(0.0), UsageError);
}

TEST(Cutoff, MidpointEqualsBumpFormula) {
    // At x = 1.5 R both arguments are 1/2, so the bump is exactly 1/2.
    const CutoffSpec c(2.0);
    const double q = std::exp(-1.0 / 0.5);
    EXPECT_DOUBLE_EQ(cutoff_eval(3.0, c), q / (q + q));
    const double x = 2.6, a = (4.0 - x) / 2.0, b = (x - 2.0) / 2.0;
    EXPECT_NEAR(cutoff_eval(x, c), std::exp(-1 / a) / (std::exp(-1 / a) + std::exp(-1 / b)),
                1e-15);
}

TEST(Cutoff, MonotoneAndFlatAtJoins) {
    const CutoffSpec c(1.0);
    double prev = 1.0;
    for (int i = 0; i <= 3000; ++i) {
        const double v = cutoff_eval(3.0 * i / 3000.0, c);
        EXPECT_LE(v, prev);
        EXPECT_GE(v, 0.0);
        prev = v;
    }
    for (double x : {1.2, 1.5, 1.8}) {
        EXPECT_GT(cutoff_eval(x, c), 0.0);
        EXPECT_LT(cutoff_eval(x, c), 1.0);
    }
    double last1 = INFINITY, last2 = INFINITY;
    for (double h : {0.1, 0.05, 0.025, 0.0125}) {
        const double d1 = std::abs(cutoff_eval(1.0 + h, c) - cutoff_eval(1.0 - h, c)) / (2 * h);
        const double d2 = std::abs(cutoff_eval(2.0 + h, c) - cutoff_eval(2.0 - h, c)) / (2 * h);
        EXPECT_LE(d1, last1);
        EXPECT_LE(d2, last2);
        last1 = d1;
        last2 = d2;
    }
    EXPECT_LT(last1, 1e-10);
    EXPECT_LT(last2, 1e-10);
}

TEST(Duality, MatchesUInnerProduct) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const SpectralField f = oracle::random_field(rng, 5);
        const SpectralField g = oracle::random_field(rng, 5);
        const double a = duality_pairing(f, g);
        EXPECT_NEAR(a, inner(f, g), 1e-12 * norm(f, Space::U) * norm(g, Space::U));
        EXPECT_NEAR(a, oracle::inner_u(f, g), 1e-12 * norm(f, Space::U) * norm(g, Space::U));
    }
}

TEST(Field, RealityAndSolenoidality) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const SpectralField f = oracle::random_field(rng, 6);
        EXPECT_EQ(reality_defect(f), 0.0);
        EXPECT_LT(divergence_defect(f), 1e-12);
        EXPECT_TRUE(is_state_field(f));
    }
    SpectralField g(2);
    g.set({1, 0}, {1.0, 0.0});
    EXPECT_FALSE(is_state_field(g));
}

TEST(Field, RandomSolenoidalSpectrum) {
    std::mt19937_64 rng(6);
    double total = 0.0;
    const int draws = 4000;
    for (int i = 0; i < draws; ++i) {
        const SpectralField f = random_solenoidal_field(8, 4, 1.0, 1.5, rng);
        ASSERT_TRUE(is_state_field(f));
        EXPECT_TRUE(tail_n(f, 4).is_zero());
        total += norm_sq(f, Space::U);
    }
    EXPECT_NEAR(total / draws, 2.25, 0.1);
}
