#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace spde {

using cplx = std::complex<double>;

/// Integer wavenumber on the 2-torus.
struct ModeIndex {
    int kx = 0;
    int ky = 0;

    int norm_sq() const noexcept { return kx * kx + ky * ky; }
    int inf_norm() const noexcept;
    bool is_zero() const noexcept { return kx == 0 && ky == 0; }
    friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

/// Complex 2-vector: the Fourier coefficient of a planar vector field at one mode.
struct Vec2c {
    cplx x{};
    cplx y{};

    friend bool operator==(const Vec2c&, const Vec2c&) = default;
};

/// Fourier coefficients of a real planar vector field on [0, 2pi)^2,
///   f(x) = sum_k coeff(k) exp(i k.x),
/// stored for every |k|_inf <= band. Components are kept in separate arrays so
/// they can be handed to the transforms directly.
///
/// The container itself accepts a mean (k = 0) coefficient because forcing
/// profiles such as a spatially constant xi need one; state fields are
/// mean-zero, see is_state_field().
class SpectralField {
public:
    SpectralField() : SpectralField(0) {}
    explicit SpectralField(int band);

    int band() const noexcept { return band_; }
    int side() const noexcept { return 2 * band_ + 1; }
    std::size_t mode_count() const noexcept { return cx_.size(); }

    bool contains(ModeIndex k) const noexcept {
        return k.kx >= -band_ && k.kx <= band_ && k.ky >= -band_ && k.ky <= band_;
    }
    std::size_t index(ModeIndex k) const noexcept {
        return static_cast<std::size_t>((k.kx + band_) * side() + (k.ky + band_));
    }
    ModeIndex mode_at(std::size_t idx) const noexcept {
        const int s = side();
        return {static_cast<int>(idx) / s - band_, static_cast<int>(idx) % s - band_};
    }

    /// Coefficient at k; zero outside the band.
    Vec2c at(ModeIndex k) const noexcept;
    /// Sets coeff(k) and coeff(-k) = conj(coeff(k)) so the field stays real.
    void set(ModeIndex k, Vec2c value);
    /// Adds to coeff(k) and its conjugate partner.
    void add(ModeIndex k, Vec2c value);

    std::span<cplx> x() noexcept { return cx_; }
    std::span<cplx> y() noexcept { return cy_; }
    std::span<const cplx> x() const noexcept { return cx_; }
    std::span<const cplx> y() const noexcept { return cy_; }

    /// Copy on a different band: truncates modes outside, zero-pads new ones.
    SpectralField resized(int band) const;

    /// this += a * other, with other.band() <= band().
    SpectralField& axpy(double a, const SpectralField& other);
    SpectralField& operator+=(const SpectralField& other) { return axpy(1.0, other); }
    SpectralField& operator-=(const SpectralField& other) { return axpy(-1.0, other); }
    SpectralField& operator*=(double s);
    void set_zero();

    bool all_finite() const noexcept;
    bool is_zero() const noexcept;

    friend bool operator==(const SpectralField&, const SpectralField&) = default;

private:
    int band_;
    std::vector<cplx> cx_;
    std::vector<cplx> cy_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

/// max_k |coeff(-k) - conj(coeff(k))|.
double reality_defect(const SpectralField& f);
/// max_k |k . coeff(k)| / (|k| max|coeff|); 0 for the zero field.
double divergence_defect(const SpectralField& f);
/// Real, solenoidal (to 1e-12), mean-zero.
bool is_state_field(const SpectralField& f, double tol = 1e-12);

/// Field whose only active pair is (k, -k) with coeff(k) = value.
SpectralField single_mode(int band, ModeIndex k, Vec2c value);
/// Solenoidal single mode: coeff(k) = amplitude * k_perp / |k| with k_perp = (-ky, kx).
SpectralField solenoidal_mode(int band, ModeIndex k, cplx amplitude);
/// Unit solenoidal direction k_perp / |k|.
Vec2c solenoidal_direction(ModeIndex k);

/// Gaussian random solenoidal mean-zero field supported on |k|_inf <= active_band,
/// with E|coeff(k)|^2 proportional to (1 + |k|^2)^(-slope), rescaled so that
/// E ||f||_U^2 = rms_amplitude^2.
SpectralField random_solenoidal_field(int band, int active_band, double slope,
                                      double rms_amplitude, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Gelfand triple V -> H -> U realized by per-mode weights.

enum class Space { U, H, V, Hstar, Hbar };

/// Parses "U", "H", "V", "Hstar" (or "H*"), "Hbar"; throws UsageError otherwise.
Space parse_space(std::string_view tag);
std::string_view space_name(Space s) noexcept;

/// Squared-norm weight of mode k: w_U = 1, w_H = 1 + |k|^2, w_V = (1 + |k|^2)^2,
/// w_Hstar = 1 / w_H, w_Hbar = w_H.
double weight(Space s, ModeIndex k) noexcept;

/// Inner product in the given space. Each conjugate pair (k, -k) is counted
/// once, so a single active pair with |coeff| = 1 has U-norm 1.
double inner(const SpectralField& f, const SpectralField& g, Space s = Space::U);
double norm_sq(const SpectralField& f, Space s);
double norm(const SpectralField& f, Space s);
/// ||f - g||^2 in the given space; bands may differ (missing modes are zero).
double distance_sq(const SpectralField& f, const SpectralField& g, Space s);
/// H* x H pairing of f against g; coincides with the U inner product.
double duality_pairing(const SpectralField& f, const SpectralField& g);

/// Orthogonal projection P_n onto span{a_k : 0 < |k|_inf <= n}. Requires n >= 1.
SpectralField project_n(const SpectralField& f, int n);
/// (I - P_n) f.
SpectralField tail_n(const SpectralField& f, int n);

/// mu_n = min_{|k|_inf > n} sqrt(w_H / w_U) = sqrt(1 + (n+1)^2).
double mu(int n);
/// ||(I - P_n) f||_U * mu_n / ||f||_Hbar; zero field gives 0. Contract: <= 1.
double tail_bound_check(const SpectralField& f, int n);

/// Exponent p of the growth functions K_U, K_H, K_V.
class GrowthProfile {
public:
    explicit GrowthProfile(double p = 2.0);
    double p() const noexcept { return p_; }

private:
    double p_;
};

/// K(phi) = 1 + ||phi||^p.
double growth_K(const SpectralField& phi, Space s, const GrowthProfile& profile);
/// K(phi, psi) = 1 + ||phi||^p + ||psi||^p.
double growth_K(const SpectralField& phi, const SpectralField& psi, Space s,
                const GrowthProfile& profile);

/// Truncation threshold R > 0 of the smooth cutoff f_R.
class CutoffSpec {
public:
    explicit CutoffSpec(double R);
    double R() const noexcept { return R_; }

private:
    double R_;
};

/// C-infinity cutoff: 1 on [0, R], 0 on [2R, inf), strictly decreasing between.
///   f_R(x) = q((2R - x)/R) / (q((2R - x)/R) + q((x - R)/R)),  q(s) = exp(-1/s) for s > 0.
double cutoff_eval(double x, const CutoffSpec& spec) noexcept;

}  // namespace spde
