#include "spde/spectral_field.hpp"

#include "spde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spde {

namespace {

bool in_upper_half(ModeIndex k) noexcept {
    return k.kx > 0 || (k.kx == 0 && k.ky > 0);
}

void require_band(int band) {
    if (band < 0) {
        throw UsageError("spectral band must be nonnegative, got " + std::to_string(band));
    }
}

}  // namespace

int ModeIndex::inf_norm() const noexcept {
    return std::max(std::abs(kx), std::abs(ky));
}

SpectralField::SpectralField(int band) : band_(band) {
    require_band(band);
    const auto n = static_cast<std::size_t>(side()) * static_cast<std::size_t>(side());
    cx_.assign(n, cplx{});
    cy_.assign(n, cplx{});
}

Vec2c SpectralField::at(ModeIndex k) const noexcept {
    if (!contains(k)) {
        return {};
    }
    const auto i = index(k);
    return {cx_[i], cy_[i]};
}

void SpectralField::set(ModeIndex k, Vec2c value) {
    if (!contains(k)) {
        throw UsageError("mode (" + std::to_string(k.kx) + "," + std::to_string(k.ky) +
                         ") outside band " + std::to_string(band_));
    }
    if (k.is_zero()) {
        cx_[index(k)] = {value.x.real(), 0.0};
        cy_[index(k)] = {value.y.real(), 0.0};
        return;
    }
    const auto i = index(k);
    const auto j = index({-k.kx, -k.ky});
    cx_[i] = value.x;
    cy_[i] = value.y;
    cx_[j] = std::conj(value.x);
    cy_[j] = std::conj(value.y);
}

void SpectralField::add(ModeIndex k, Vec2c value) {
    const Vec2c cur = at(k);
    set(k, {cur.x + value.x, cur.y + value.y});
}

SpectralField SpectralField::resized(int band) const {
    SpectralField out(band);
    const int b = std::min(band, band_);
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const auto src = index({kx, ky});
            const auto dst = out.index({kx, ky});
            out.cx_[dst] = cx_[src];
            out.cy_[dst] = cy_[src];
        }
    }
    return out;
}

SpectralField& SpectralField::axpy(double a, const SpectralField& other) {
    if (other.band_ == band_) {
        for (std::size_t i = 0; i < cx_.size(); ++i) {
            cx_[i] += a * other.cx_[i];
            cy_[i] += a * other.cy_[i];
        }
        return *this;
    }
    if (other.band_ > band_) {
        throw UsageError("axpy: operand band " + std::to_string(other.band_) +
                         " exceeds target band " + std::to_string(band_));
    }
    const int b = other.band_;
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const auto src = other.index({kx, ky});
            const auto dst = index({kx, ky});
            cx_[dst] += a * other.cx_[src];
            cy_[dst] += a * other.cy_[src];
        }
    }
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (std::size_t i = 0; i < cx_.size(); ++i) {
        cx_[i] *= s;
        cy_[i] *= s;
    }
    return *this;
}

void SpectralField::set_zero() {
    std::fill(cx_.begin(), cx_.end(), cplx{});
    std::fill(cy_.begin(), cy_.end(), cplx{});
}

bool SpectralField::all_finite() const noexcept {
    for (std::size_t i = 0; i < cx_.size(); ++i) {
        if (!std::isfinite(cx_[i].real()) || !std::isfinite(cx_[i].imag()) ||
            !std::isfinite(cy_[i].real()) || !std::isfinite(cy_[i].imag())) {
            return false;
        }
    }
    return true;
}

bool SpectralField::is_zero() const noexcept {
    for (std::size_t i = 0; i < cx_.size(); ++i) {
        if (cx_[i] != cplx{} || cy_[i] != cplx{}) {
            return false;
        }
    }
    return true;
}

SpectralField operator+(SpectralField a, const SpectralField& b) {
    a += b;
    return a;
}

SpectralField operator-(SpectralField a, const SpectralField& b) {
    a -= b;
    return a;
}

SpectralField operator*(double s, SpectralField a) {
    a *= s;
    return a;
}

double reality_defect(const SpectralField& f) {
    double worst = 0.0;
    const auto x = f.x();
    const auto y = f.y();
    for (std::size_t i = 0; i < f.mode_count(); ++i) {
        const ModeIndex k = f.mode_at(i);
        const auto j = f.index({-k.kx, -k.ky});
        worst = std::max(worst, std::abs(x[j] - std::conj(x[i])));
        worst = std::max(worst, std::abs(y[j] - std::conj(y[i])));
    }
    return worst;
}

double divergence_defect(const SpectralField& f) {
    double scale = 0.0;
    double worst = 0.0;
    const auto x = f.x();
    const auto y = f.y();
    for (std::size_t i = 0; i < f.mode_count(); ++i) {
        const ModeIndex k = f.mode_at(i);
        scale = std::max({scale, std::abs(x[i]), std::abs(y[i])});
        if (k.is_zero()) {
            continue;
        }
        const double kn = std::sqrt(static_cast<double>(k.norm_sq()));
        worst = std::max(worst, std::abs(double(k.kx) * x[i] + double(k.ky) * y[i]) / kn);
    }
    return scale > 0.0 ? worst / scale : 0.0;
}

bool is_state_field(const SpectralField& f, double tol) {
    const Vec2c mean = f.at({0, 0});
    double scale = 0.0;
    for (std::size_t i = 0; i < f.mode_count(); ++i) {
        scale = std::max({scale, std::abs(f.x()[i]), std::abs(f.y()[i])});
    }
    if (scale == 0.0) {
        return true;
    }
    return std::abs(mean.x) <= tol * scale && std::abs(mean.y) <= tol * scale &&
           reality_defect(f) <= tol * scale && divergence_defect(f) <= tol;
}

SpectralField single_mode(int band, ModeIndex k, Vec2c value) {
    SpectralField f(band);
    f.set(k, value);
    return f;
}

Vec2c solenoidal_direction(ModeIndex k) {
    if (k.is_zero()) {
        throw UsageError("solenoidal direction undefined at k = 0");
    }
    const double kn = std::sqrt(static_cast<double>(k.norm_sq()));
    return {cplx(-k.ky / kn, 0.0), cplx(k.kx / kn, 0.0)};
}

SpectralField solenoidal_mode(int band, ModeIndex k, cplx amplitude) {
    const Vec2c d = solenoidal_direction(k);
    return single_mode(band, k, {amplitude * d.x, amplitude * d.y});
}

SpectralField random_solenoidal_field(int band, int active_band, double slope,
                                      double rms_amplitude, std::mt19937_64& rng) {
    SpectralField f(band);
    const int b = std::min(band, active_band);
    if (b < 1 || rms_amplitude == 0.0) {
        return f;
    }
    double total = 0.0;
    for (int kx = 0; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const ModeIndex k{kx, ky};
            if (in_upper_half(k)) {
                total += std::pow(1.0 + k.norm_sq(), -slope);
            }
        }
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int kx = 0; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const ModeIndex k{kx, ky};
            if (!in_upper_half(k)) {
                continue;
            }
            const double sigma =
                rms_amplitude * std::sqrt(std::pow(1.0 + k.norm_sq(), -slope) / total / 2.0);
            const double re = gauss(rng);
            const double im = gauss(rng);
            const Vec2c d = solenoidal_direction(k);
            const cplx a(sigma * re, sigma * im);
            f.set(k, {a * d.x, a * d.y});
        }
    }
    return f;
}

Space parse_space(std::string_view tag) {
    if (tag == "U") return Space::U;
    if (tag == "H") return Space::H;
    if (tag == "V") return Space::V;
    if (tag == "Hstar" || tag == "H*") return Space::Hstar;
    if (tag == "Hbar") return Space::Hbar;
    throw UsageError("unknown space tag '" + std::string(tag) + "'");
}

std::string_view space_name(Space s) noexcept {
    switch (s) {
    case Space::U: return "U";
    case Space::H: return "H";
    case Space::V: return "V";
    case Space::Hstar: return "Hstar";
    case Space::Hbar: return "Hbar";
    }
    return "?";
}

double weight(Space s, ModeIndex k) noexcept {
    const double wh = 1.0 + k.norm_sq();
    switch (s) {
    case Space::U: return 1.0;
    case Space::H:
    case Space::Hbar: return wh;
    case Space::V: return wh * wh;
    case Space::Hstar: return 1.0 / wh;
    }
    return 1.0;
}

double inner(const SpectralField& f, const SpectralField& g, Space s) {
    const int b = std::min(f.band(), g.band());
    const auto fx = f.x();
    const auto fy = f.y();
    const auto gx = g.x();
    const auto gy = g.y();
    double acc = 0.0;
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const ModeIndex k{kx, ky};
            const auto i = f.index(k);
            const auto j = g.index(k);
            const double term =
                (fx[i] * std::conj(gx[j])).real() + (fy[i] * std::conj(gy[j])).real();
            // Pairs (k, -k) are visited twice; the mean once.
            acc += weight(s, k) * (k.is_zero() ? term : 0.5 * term);
        }
    }
    return acc;
}

double norm_sq(const SpectralField& f, Space s) {
    return inner(f, f, s);
}

double norm(const SpectralField& f, Space s) {
    return std::sqrt(norm_sq(f, s));
}

double distance_sq(const SpectralField& f, const SpectralField& g, Space s) {
    const int b = std::max(f.band(), g.band());
    double acc = 0.0;
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const ModeIndex k{kx, ky};
            cplx dx{}, dy{};
            if (f.contains(k)) {
                dx = f.x()[f.index(k)];
                dy = f.y()[f.index(k)];
            }
            if (g.contains(k)) {
                dx -= g.x()[g.index(k)];
                dy -= g.y()[g.index(k)];
            }
            const double term = std::norm(dx) + std::norm(dy);
            acc += weight(s, k) * (k.is_zero() ? term : 0.5 * term);
        }
    }
    return acc;
}

double duality_pairing(const SpectralField& f, const SpectralField& g) {
    // <f, g>_{H* x H} = sum_k (w_Hstar f_k) (w_H g_k)^*: the weights cancel.
    const int b = std::min(f.band(), g.band());
    double acc = 0.0;
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const ModeIndex k{kx, ky};
            const Vec2c a = f.at(k);
            const Vec2c c = g.at(k);
            const double ws = weight(Space::Hstar, k);
            const double wh = weight(Space::H, k);
            const double term = ((ws * a.x) * std::conj(wh * c.x)).real() +
                                ((ws * a.y) * std::conj(wh * c.y)).real();
            acc += k.is_zero() ? term : 0.5 * term;
        }
    }
    return acc;
}

SpectralField project_n(const SpectralField& f, int n) {
    if (n < 1) {
        throw UsageError("project_n requires n >= 1, got " + std::to_string(n));
    }
    SpectralField out(f.band());
    const int b = std::min(n, f.band());
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            if (kx == 0 && ky == 0) {
                continue;
            }
            const auto i = f.index({kx, ky});
            out.x()[i] = f.x()[i];
            out.y()[i] = f.y()[i];
        }
    }
    return out;
}

SpectralField tail_n(const SpectralField& f, int n) {
    SpectralField out = f;
    const int b = std::min(n, f.band());
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const auto i = f.index({kx, ky});
            out.x()[i] = {};
            out.y()[i] = {};
        }
    }
    return out;
}

double mu(int n) {
    return std::sqrt(1.0 + static_cast<double>(n + 1) * (n + 1));
}

double tail_bound_check(const SpectralField& f, int n) {
    const double denom = norm(f, Space::Hbar);
    if (denom == 0.0) {
        return 0.0;
    }
    return norm(tail_n(f, n), Space::U) * mu(n) / denom;
}

GrowthProfile::GrowthProfile(double p) : p_(p) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
        throw UsageError("growth exponent p must be a finite nonnegative number");
    }
}

double growth_K(const SpectralField& phi, Space s, const GrowthProfile& profile) {
    return 1.0 + std::pow(norm(phi, s), profile.p());
}

double growth_K(const SpectralField& phi, const SpectralField& psi, Space s,
                const GrowthProfile& profile) {
    return 1.0 + std::pow(norm(phi, s), profile.p()) + std::pow(norm(psi, s), profile.p());
}

CutoffSpec::CutoffSpec(double R) : R_(R) {
    if (!(R > 0.0) || !std::isfinite(R)) {
        throw UsageError("cutoff threshold R must be positive and finite");
    }
}

double cutoff_eval(double x, const CutoffSpec& spec) noexcept {
    const double R = spec.R();
    if (x <= R) {
        return 1.0;
    }
    if (x >= 2.0 * R) {
        return 0.0;
    }
    const auto q = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
    const double a = q((2.0 * R - x) / R);
    const double b = q((x - R) / R);
    return a / (a + b);
}

}  // namespace spde
