#pragma once

#include "spde/spectral_field.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spde {

/// Per mode k != 0: v -> v - k (k.v) / |k|^2. The mean mode is dropped.
SpectralField leray_project(const SpectralField& v);

/// P[(u.grad) u] on |k|_inf <= out_band (default: u.band()), evaluated as
/// P[d_j(u_j u)] on a grid large enough that every retained mode is exact.
/// Requires u solenoidal for the divergence form to agree with (u.grad) u.
SpectralField advection(const SpectralField& u, int out_band = -1);

/// One sparse Fourier term c exp(i q.x) of a xi profile (q and -q both stored).
struct XiTerm {
    ModeIndex q;
    Vec2c c;
};

/// The transport profiles xi_i of the SALT noise, each scaled by its weight.
class SaltCoefficients {
public:
    SaltCoefficients() = default;
    /// Profiles are given unscaled; xi_i = weights[i] * shapes[i].
    SaltCoefficients(std::vector<SpectralField> shapes, std::vector<double> weights);

    /// Low-wavenumber solenoidal library: xi_i = a0 r^i q_perp/|q| cos(q_i.x + phase_i)
    /// with q_i the i-th upper-half mode ordered by (|q|^2, qx, qy). Phases are 0
    /// unless phase_seed is given.
    static SaltCoefficients default_library(int m, double a0, double ratio = 0.5,
                                            std::optional<std::uint64_t> phase_seed = {});
    /// Spatially constant xi_i = c_i (for closed-form checks).
    static SaltCoefficients constant(const std::vector<std::pair<double, double>>& c);

    int size() const noexcept { return static_cast<int>(shapes_.size()); }
    /// Largest |k|_inf carried by any xi_i.
    int band() const noexcept { return band_; }
    const SpectralField& shape(int i) const { return shapes_.at(static_cast<std::size_t>(i)); }
    double weight(int i) const { return weights_.at(static_cast<std::size_t>(i)); }
    /// weight(i) * shape(i).
    SpectralField field(int i) const;
    /// Nonzero coefficients of the scaled xi_i.
    const std::vector<XiTerm>& terms(int i) const;

    /// sum_i (sum_k (1 + |k|)^2 |xi_i(k)|)^2, a W^{2,inf} summability proxy.
    double summability_proxy() const;

    /// Plain-text spectrum: one line per stored coefficient,
    /// `i kx ky re_x im_x re_y im_y amplitude`, '#' comments.
    static SaltCoefficients read_spectrum(std::istream& in);
    static SaltCoefficients load_spectrum(const std::string& path);
    void write_spectrum(std::ostream& out) const;

private:
    void check_index(int i) const;

    std::vector<SpectralField> shapes_;
    std::vector<double> weights_;
    std::vector<std::vector<XiTerm>> terms_;
    int band_ = 0;
};

/// B_i phi = (xi_i.grad) phi + sum_j phi^j grad xi_i^j, unprojected, on
/// |k|_inf <= out_band (default: phi.band() + xi.band(), which is exact).
SpectralField salt_apply(const SpectralField& phi, int i, const SaltCoefficients& xi,
                         int out_band = -1);
/// Transport part (xi_i.grad) phi alone; skew-adjoint in U since xi_i is solenoidal.
SpectralField transport_apply(const SpectralField& phi, int i, const SaltCoefficients& xi,
                              int out_band = -1);
/// Same operator through the physical grid; used to cross-check salt_apply.
SpectralField salt_apply_pseudospectral(const SpectralField& phi, int i,
                                        const SaltCoefficients& xi, int out_band = -1);
/// G_i(u) = P B_i u.
SpectralField salt_noise_column(const SpectralField& u, int i, const SaltCoefficients& xi,
                                int out_band = -1);

enum class CorrectorForm {
    /// 1/2 sum_i P B_i B_i u.
    Literal,
    /// 1/2 sum_i P B_i P B_i u: the Ito correction of the noise columns P B_i.
    Projected,
};

/// Ito-Stratonovich corrector. Output band defaults to the exact band
/// u.band() + 2 xi.band().
SpectralField salt_corrector(const SpectralField& u, const SaltCoefficients& xi,
                             CorrectorForm form = CorrectorForm::Literal, int out_band = -1);

struct NSParams {
    double nu = 0.2;
    int noise_modes = 4;

    void validate() const;
};

enum class OperatorKind { SaltNS, Heat, Zero, AdditiveOU };

std::string_view kind_name(OperatorKind k) noexcept;
/// "salt-ns", "heat", "zero", "additive-ou"; throws UsageError otherwise.
OperatorKind parse_kind(std::string_view tag);

/// Whether the drift carries the Ito-Stratonovich corrector.
enum class DriftForm { Ito, Stratonovich };

/// Drift A(t, .) and noise columns G_i(t, .) of one model.
///
/// `level` selects the Galerkin space: level >= 1 returns P_level of each
/// output on band `level`, and for salt-ns uses the corrector of the Galerkin
/// noise, 1/2 sum_i P_n P B_i P_n P B_i u. level < 0 evaluates without
/// truncation on the band exact_band(u).
class OperatorPair {
public:
    static OperatorPair salt_ns(NSParams params, SaltCoefficients xi);
    /// nu Laplacian, optionally with additive noise columns sigma_i.
    static OperatorPair heat(double nu, std::vector<SpectralField> additive = {});
    static OperatorPair zero();
    /// -rate u with additive noise columns sigma_i.
    static OperatorPair additive_ou(double rate, std::vector<SpectralField> additive);

    OperatorKind kind() const noexcept { return kind_; }
    int noise_count() const noexcept;
    double nu() const noexcept { return nu_; }
    double rate() const noexcept { return rate_; }
    const SaltCoefficients& xi() const noexcept { return xi_; }
    /// True when the noise columns do not depend on the state.
    bool additive_noise() const noexcept { return kind_ != OperatorKind::SaltNS; }

    /// Band on which an untruncated evaluation at u is exact.
    int exact_band(const SpectralField& u) const noexcept;

    SpectralField drift(double t, const SpectralField& u, int level = -1,
                        DriftForm form = DriftForm::Ito) const;
    SpectralField noise_column(double t, const SpectralField& u, int i, int level = -1) const;
    /// Drift and all columns in one pass; shares B_i u between the salt-ns
    /// noise column and its corrector term.
    void evaluate(double t, const SpectralField& u, int level, DriftForm form,
                  SpectralField& drift, std::vector<SpectralField>& columns) const;

private:
    OperatorPair() = default;
    void check_noise_index(int i) const;
    SpectralField linear_part(const SpectralField& u, int band) const;

    OperatorKind kind_ = OperatorKind::Zero;
    double nu_ = 0.0;
    double rate_ = 0.0;
    int noise_modes_ = 0;
    SaltCoefficients xi_;
    std::vector<SpectralField> additive_;
};

/// Free form of pair.drift(t, u) at full (untruncated) resolution.
SpectralField drift_eval(const OperatorPair& pair, double t, const SpectralField& u);

}  // namespace spde
