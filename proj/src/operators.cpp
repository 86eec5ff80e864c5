#include "spde/operators.hpp"

#include "spde/errors.hpp"
#include "spde/transform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace spde {

namespace {

constexpr cplx I{0.0, 1.0};

int resolve_band(int requested, int fallback) {
    return requested < 0 ? fallback : requested;
}

struct Scratch {
    std::vector<double> a, b, c, d, e, f;
    std::vector<cplx> s0, s1, s2;

    void reserve(std::size_t points, std::size_t modes) {
        for (auto* v : {&a, &b, &c, &d, &e, &f}) {
            v->resize(points);
        }
        for (auto* v : {&s0, &s1, &s2}) {
            v->resize(modes);
        }
    }
};

Scratch& scratch() {
    thread_local Scratch s;
    return s;
}

}  // namespace

SpectralField leray_project(const SpectralField& v) {
    SpectralField out(v.band());
    const auto vx = v.x();
    const auto vy = v.y();
    auto ox = out.x();
    auto oy = out.y();
    for (std::size_t i = 0; i < v.mode_count(); ++i) {
        const ModeIndex k = v.mode_at(i);
        if (k.is_zero()) {
            continue;
        }
        const double kx = k.kx;
        const double ky = k.ky;
        const cplx kv = (kx * vx[i] + ky * vy[i]) / static_cast<double>(k.norm_sq());
        ox[i] = vx[i] - kx * kv;
        oy[i] = vy[i] - ky * kv;
    }
    return out;
}

SpectralField advection(const SpectralField& u, int out_band) {
    const int n = u.band();
    const int c = resolve_band(out_band, n);
    SpectralField out(c);
    if (u.is_zero() || c == 0) {
        return out;
    }
    PhysicalGrid& grid = grid_for_size(dealiased_grid_size(n, n, c));
    Scratch& s = scratch();
    s.reserve(grid.point_count(), out.mode_count());
    grid.synthesize(u.x(), n, s.a);
    grid.synthesize(u.y(), n, s.b);
    for (std::size_t p = 0; p < grid.point_count(); ++p) {
        const double ux = s.a[p];
        const double uy = s.b[p];
        s.c[p] = ux * ux;
        s.d[p] = ux * uy;
        s.e[p] = uy * uy;
    }
    grid.analyze(s.c, c, s.s0);
    grid.analyze(s.d, c, s.s1);
    grid.analyze(s.e, c, s.s2);
    auto ox = out.x();
    auto oy = out.y();
    for (std::size_t i = 0; i < out.mode_count(); ++i) {
        const ModeIndex k = out.mode_at(i);
        const double kx = k.kx;
        const double ky = k.ky;
        ox[i] = I * (kx * s.s0[i] + ky * s.s1[i]);
        oy[i] = I * (kx * s.s1[i] + ky * s.s2[i]);
    }
    return leray_project(out);
}

// ---------------------------------------------------------------------------

SaltCoefficients::SaltCoefficients(std::vector<SpectralField> shapes, std::vector<double> weights)
    : shapes_(std::move(shapes)), weights_(std::move(weights)) {
    if (shapes_.size() != weights_.size()) {
        throw UsageError("xi shapes and weights differ in length");
    }
    for (std::size_t i = 0; i < shapes_.size(); ++i) {
        const SpectralField& f = shapes_[i];
        if (!std::isfinite(weights_[i])) {
            throw UsageError("xi weight " + std::to_string(i) + " is not finite");
        }
        if (reality_defect(f) > 1e-12 || divergence_defect(f) > 1e-12) {
            throw UsageError("xi_" + std::to_string(i) + " must be real and divergence-free");
        }
        std::vector<XiTerm> terms;
        for (std::size_t j = 0; j < f.mode_count(); ++j) {
            const cplx cx = weights_[i] * f.x()[j];
            const cplx cy = weights_[i] * f.y()[j];
            if (cx != cplx{} || cy != cplx{}) {
                const ModeIndex q = f.mode_at(j);
                terms.push_back({q, {cx, cy}});
                band_ = std::max(band_, q.inf_norm());
            }
        }
        terms_.push_back(std::move(terms));
    }
}

SaltCoefficients SaltCoefficients::default_library(int m, double a0, double ratio,
                                                   std::optional<std::uint64_t> phase_seed) {
    if (m < 0) {
        throw UsageError("noise mode count must be nonnegative");
    }
    std::vector<ModeIndex> modes;
    for (int r = 1; static_cast<int>(modes.size()) < m; ++r) {
        modes.clear();
        for (int kx = 0; kx <= r; ++kx) {
            for (int ky = -r; ky <= r; ++ky) {
                if (kx > 0 || ky > 0) {
                    modes.push_back({kx, ky});
                }
            }
        }
    }
    std::sort(modes.begin(), modes.end(), [](ModeIndex a, ModeIndex b) {
        if (a.norm_sq() != b.norm_sq()) return a.norm_sq() < b.norm_sq();
        if (a.kx != b.kx) return a.kx < b.kx;
        return a.ky < b.ky;
    });
    std::mt19937_64 rng(phase_seed.value_or(0));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<SpectralField> shapes;
    std::vector<double> weights;
    for (int i = 0; i < m; ++i) {
        const ModeIndex q = modes[static_cast<std::size_t>(i)];
        const double ph = phase_seed ? phase(rng) : 0.0;
        shapes.push_back(solenoidal_mode(q.inf_norm(), q, 0.5 * std::polar(1.0, ph)));
        weights.push_back(a0 * std::pow(ratio, i));
    }
    return SaltCoefficients(std::move(shapes), std::move(weights));
}

SaltCoefficients SaltCoefficients::constant(const std::vector<std::pair<double, double>>& c) {
    std::vector<SpectralField> shapes;
    std::vector<double> weights;
    for (const auto& [cx, cy] : c) {
        shapes.push_back(single_mode(0, {0, 0}, {cplx(cx), cplx(cy)}));
        weights.push_back(1.0);
    }
    return SaltCoefficients(std::move(shapes), std::move(weights));
}

void SaltCoefficients::check_index(int i) const {
    if (i < 0 || i >= size()) {
        throw UsageError("noise index " + std::to_string(i) + " out of range [0, " +
                         std::to_string(size()) + ")");
    }
}

SpectralField SaltCoefficients::field(int i) const {
    check_index(i);
    SpectralField f = shapes_[static_cast<std::size_t>(i)];
    f *= weights_[static_cast<std::size_t>(i)];
    return f;
}

const std::vector<XiTerm>& SaltCoefficients::terms(int i) const {
    check_index(i);
    return terms_[static_cast<std::size_t>(i)];
}

double SaltCoefficients::summability_proxy() const {
    double total = 0.0;
    for (const auto& terms : terms_) {
        double s = 0.0;
        for (const XiTerm& t : terms) {
            const double kn = std::sqrt(static_cast<double>(t.q.norm_sq()));
            s += (1.0 + kn) * (1.0 + kn) * std::sqrt(std::norm(t.c.x) + std::norm(t.c.y));
        }
        total += s * s;
    }
    return total;
}

SaltCoefficients SaltCoefficients::read_spectrum(std::istream& in) {
    struct Entry {
        std::vector<std::pair<ModeIndex, Vec2c>> coeffs;
        std::optional<double> amplitude;
        int band = 0;
    };
    std::map<int, Entry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream ls(line);
        int i = 0;
        ModeIndex k;
        double rx = 0, ix = 0, ry = 0, iy = 0, amp = 0;
        if (!(ls >> i)) {
            continue;
        }
        if (!(ls >> k.kx >> k.ky >> rx >> ix >> ry >> iy >> amp)) {
            throw UsageError("spectrum line " + std::to_string(lineno) +
                             ": expected `i kx ky re_x im_x re_y im_y amplitude`");
        }
        std::string rest;
        if (ls >> rest) {
            throw UsageError("spectrum line " + std::to_string(lineno) + ": trailing text");
        }
        if (i < 0) {
            throw UsageError("spectrum line " + std::to_string(lineno) + ": negative index");
        }
        Entry& e = entries[i];
        if (e.amplitude && *e.amplitude != amp) {
            throw UsageError("spectrum line " + std::to_string(lineno) +
                             ": amplitude differs from earlier lines of xi_" + std::to_string(i));
        }
        e.amplitude = amp;
        e.coeffs.push_back({k, {cplx(rx, ix), cplx(ry, iy)}});
        e.band = std::max(e.band, k.inf_norm());
    }
    std::vector<SpectralField> shapes;
    std::vector<double> weights;
    int expect = 0;
    for (auto& [i, e] : entries) {
        if (i != expect++) {
            throw UsageError("spectrum indices must be contiguous from 0; missing xi_" +
                             std::to_string(expect - 1));
        }
        SpectralField f(e.band);
        for (const auto& [k, v] : e.coeffs) {
            f.set(k, v);
        }
        shapes.push_back(std::move(f));
        weights.push_back(*e.amplitude);
    }
    return SaltCoefficients(std::move(shapes), std::move(weights));
}

SaltCoefficients SaltCoefficients::load_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open spectrum file '" + path + "'");
    }
    try {
        return read_spectrum(in);
    } catch (const UsageError& e) {
        throw UsageError(path + ": " + e.what());
    }
}

void SaltCoefficients::write_spectrum(std::ostream& out) const {
    out << "# i kx ky re_x im_x re_y im_y amplitude\n";
    out << std::setprecision(17);
    for (int i = 0; i < size(); ++i) {
        const SpectralField& f = shapes_[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < f.mode_count(); ++j) {
            const ModeIndex k = f.mode_at(j);
            // One line per conjugate pair: the upper half plane plus the mean.
            const bool upper = k.kx > 0 || (k.kx == 0 && k.ky >= 0);
            const cplx x = f.x()[j];
            const cplx y = f.y()[j];
            if (!upper || (x == cplx{} && y == cplx{})) {
                continue;
            }
            out << i << ' ' << k.kx << ' ' << k.ky << ' ' << x.real() << ' ' << x.imag() << ' '
                << y.real() << ' ' << y.imag() << ' ' << weights_[static_cast<std::size_t>(i)]
                << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

SpectralField salt_apply(const SpectralField& phi, int i, const SaltCoefficients& xi,
                         int out_band) {
    const auto& terms = xi.terms(i);
    const int c = resolve_band(out_band, phi.band() + xi.band());
    SpectralField out(c);
    const int b = phi.band();
    const auto px = phi.x();
    const auto py = phi.y();
    auto ox = out.x();
    auto oy = out.y();
    for (const XiTerm& t : terms) {
        // Output mode k = p + q for every stored p with |k|_inf <= c.
        const int x_lo = std::max(-b, -c - t.q.kx);
        const int x_hi = std::min(b, c - t.q.kx);
        const int y_lo = std::max(-b, -c - t.q.ky);
        const int y_hi = std::min(b, c - t.q.ky);
        const double qx = t.q.kx;
        const double qy = t.q.ky;
        const cplx icx = I * t.c.x;
        const cplx icy = I * t.c.y;
        for (int pkx = x_lo; pkx <= x_hi; ++pkx) {
            const std::size_t src = phi.index({pkx, y_lo});
            const std::size_t dst = out.index({pkx + t.q.kx, y_lo + t.q.ky});
            const int count = y_hi - y_lo + 1;
            for (int j = 0; j < count; ++j) {
                const int pky = y_lo + j;
                const cplx fx = px[src + j];
                const cplx fy = py[src + j];
                // (c.grad) phi gives i (c.p) phi(p); phi^j grad xi^j gives i q (c.phi(p)).
                const cplx transport = icx * double(pkx) + icy * double(pky);
                const cplx zeroth = icx * fx + icy * fy;
                ox[dst + j] += transport * fx + zeroth * qx;
                oy[dst + j] += transport * fy + zeroth * qy;
            }
        }
    }
    return out;
}

SpectralField transport_apply(const SpectralField& phi, int i, const SaltCoefficients& xi,
                              int out_band) {
    const int c = resolve_band(out_band, phi.band() + xi.band());
    SpectralField out(c);
    const auto px = phi.x();
    const auto py = phi.y();
    auto ox = out.x();
    auto oy = out.y();
    const cplx I(0.0, 1.0);
    for (const XiTerm& t : xi.terms(i)) {
        for (std::size_t idx = 0; idx < phi.mode_count(); ++idx) {
            const ModeIndex p = phi.mode_at(idx);
            const ModeIndex k{p.kx + t.q.kx, p.ky + t.q.ky};
            if (!out.contains(k)) {
                continue;
            }
            const cplx f = I * (t.c.x * static_cast<double>(p.kx) + t.c.y * static_cast<double>(p.ky));
            const std::size_t o = out.index(k);
            ox[o] += f * px[idx];
            oy[o] += f * py[idx];
        }
    }
    return out;
}

SpectralField salt_apply_pseudospectral(const SpectralField& phi, int i,
                                        const SaltCoefficients& xi, int out_band) {
    const SpectralField xf = xi.field(i);
    const int a = phi.band();
    const int q = xf.band();
    const int c = resolve_band(out_band, a + xi.band());
    PhysicalGrid& grid = grid_for_size(dealiased_grid_size(a, q, c));
    const std::size_t n = grid.point_count();
    std::vector<double> xx(n), xy(n), dxx(n), dyx(n), dxy(n), dyy(n);
    std::vector<double> px(n), py(n), dpxx(n), dpyx(n), dpxy(n), dpyy(n);
    grid.synthesize(xf.x(), q, xx);
    grid.synthesize(xf.y(), q, xy);
    grid.synthesize_derivative(xf.x(), q, 0, dxx);
    grid.synthesize_derivative(xf.x(), q, 1, dyx);
    grid.synthesize_derivative(xf.y(), q, 0, dxy);
    grid.synthesize_derivative(xf.y(), q, 1, dyy);
    grid.synthesize(phi.x(), a, px);
    grid.synthesize(phi.y(), a, py);
    grid.synthesize_derivative(phi.x(), a, 0, dpxx);
    grid.synthesize_derivative(phi.x(), a, 1, dpyx);
    grid.synthesize_derivative(phi.y(), a, 0, dpxy);
    grid.synthesize_derivative(phi.y(), a, 1, dpyy);
    std::vector<double> bx(n), by(n);
    for (std::size_t p = 0; p < n; ++p) {
        bx[p] = xx[p] * dpxx[p] + xy[p] * dpyx[p] + px[p] * dxx[p] + py[p] * dxy[p];
        by[p] = xx[p] * dpxy[p] + xy[p] * dpyy[p] + px[p] * dyx[p] + py[p] * dyy[p];
    }
    SpectralField out(c);
    grid.analyze(bx, c, out.x());
    grid.analyze(by, c, out.y());
    return out;
}

SpectralField salt_noise_column(const SpectralField& u, int i, const SaltCoefficients& xi,
                                int out_band) {
    return leray_project(salt_apply(u, i, xi, out_band));
}

SpectralField salt_corrector(const SpectralField& u, const SaltCoefficients& xi,
                             CorrectorForm form, int out_band) {
    const int c = resolve_band(out_band, u.band() + 2 * xi.band());
    SpectralField out(c);
    for (int i = 0; i < xi.size(); ++i) {
        SpectralField w = salt_apply(u, i, xi);
        if (form == CorrectorForm::Projected) {
            w = leray_project(w);
        }
        out.axpy(0.5, salt_apply(w, i, xi, c));
    }
    return leray_project(out);
}

void NSParams::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw UsageError("viscosity nu must be positive");
    }
    if (noise_modes < 0) {
        throw UsageError("noise mode count m must be nonnegative");
    }
}

std::string_view kind_name(OperatorKind k) noexcept {
    switch (k) {
    case OperatorKind::SaltNS: return "salt-ns";
    case OperatorKind::Heat: return "heat";
    case OperatorKind::Zero: return "zero";
    case OperatorKind::AdditiveOU: return "additive-ou";
    }
    return "?";
}

OperatorKind parse_kind(std::string_view tag) {
    if (tag == "salt-ns") return OperatorKind::SaltNS;
    if (tag == "heat") return OperatorKind::Heat;
    if (tag == "zero") return OperatorKind::Zero;
    if (tag == "additive-ou") return OperatorKind::AdditiveOU;
    throw UsageError("unknown operator kind '" + std::string(tag) + "'");
}

// ---------------------------------------------------------------------------

OperatorPair OperatorPair::salt_ns(NSParams params, SaltCoefficients xi) {
    params.validate();
    if (xi.size() < params.noise_modes) {
        throw UsageError("xi library has " + std::to_string(xi.size()) + " profiles, need " +
                         std::to_string(params.noise_modes));
    }
    OperatorPair p;
    p.kind_ = OperatorKind::SaltNS;
    p.nu_ = params.nu;
    p.noise_modes_ = params.noise_modes;
    p.xi_ = std::move(xi);
    return p;
}

OperatorPair OperatorPair::heat(double nu, std::vector<SpectralField> additive) {
    if (!(nu >= 0.0) || !std::isfinite(nu)) {
        throw UsageError("heat viscosity must be nonnegative");
    }
    OperatorPair p;
    p.kind_ = OperatorKind::Heat;
    p.nu_ = nu;
    p.noise_modes_ = static_cast<int>(additive.size());
    p.additive_ = std::move(additive);
    return p;
}

OperatorPair OperatorPair::zero() {
    return OperatorPair();
}

OperatorPair OperatorPair::additive_ou(double rate, std::vector<SpectralField> additive) {
    if (!std::isfinite(rate)) {
        throw UsageError("OU rate must be finite");
    }
    OperatorPair p;
    p.kind_ = OperatorKind::AdditiveOU;
    p.rate_ = rate;
    p.noise_modes_ = static_cast<int>(additive.size());
    p.additive_ = std::move(additive);
    return p;
}

int OperatorPair::noise_count() const noexcept {
    return noise_modes_;
}

int OperatorPair::exact_band(const SpectralField& u) const noexcept {
    const int n = u.band();
    if (kind_ != OperatorKind::SaltNS) {
        int b = n;
        for (const auto& s : additive_) {
            b = std::max(b, s.band());
        }
        return b;
    }
    return noise_modes_ > 0 ? std::max(2 * n, n + 2 * xi_.band()) : 2 * n;
}

void OperatorPair::check_noise_index(int i) const {
    if (i < 0 || i >= noise_modes_) {
        throw UsageError("noise index " + std::to_string(i) + " out of range [0, " +
                         std::to_string(noise_modes_) + ")");
    }
}

SpectralField OperatorPair::linear_part(const SpectralField& u, int band) const {
    SpectralField out(band);
    if (kind_ == OperatorKind::Zero) {
        return out;
    }
    const int b = std::min(band, u.band());
    for (int kx = -b; kx <= b; ++kx) {
        for (int ky = -b; ky <= b; ++ky) {
            const ModeIndex k{kx, ky};
            const double symbol =
                kind_ == OperatorKind::AdditiveOU ? -rate_ : -nu_ * static_cast<double>(k.norm_sq());
            const auto src = u.index(k);
            const auto dst = out.index(k);
            out.x()[dst] = symbol * u.x()[src];
            out.y()[dst] = symbol * u.y()[src];
        }
    }
    return out;
}

SpectralField OperatorPair::drift(double t, const SpectralField& u, int level,
                                  DriftForm form) const {
    SpectralField d;
    std::vector<SpectralField> cols;
    if (kind_ == OperatorKind::SaltNS && form == DriftForm::Ito && noise_modes_ > 0) {
        evaluate(t, u, level, form, d, cols);
        return d;
    }
    const int band = level >= 1 ? level : exact_band(u);
    d = linear_part(u, band);
    if (kind_ == OperatorKind::SaltNS) {
        d -= advection(u, band);
    }
    return level >= 1 ? project_n(d, level) : d;
}

SpectralField OperatorPair::noise_column(double /*t*/, const SpectralField& u, int i,
                                         int level) const {
    check_noise_index(i);
    if (kind_ == OperatorKind::SaltNS) {
        return salt_noise_column(u, i, xi_, level >= 1 ? level : u.band() + xi_.band());
    }
    const SpectralField& s = additive_[static_cast<std::size_t>(i)];
    return level >= 1 ? project_n(s.resized(level), level) : s;
}

void OperatorPair::evaluate(double t, const SpectralField& u, int level, DriftForm form,
                            SpectralField& drift_out, std::vector<SpectralField>& columns) const {
    columns.resize(static_cast<std::size_t>(noise_modes_));
    if (kind_ != OperatorKind::SaltNS) {
        drift_out = drift(t, u, level, form);
        for (int i = 0; i < noise_modes_; ++i) {
            columns[static_cast<std::size_t>(i)] = noise_column(t, u, i, level);
        }
        return;
    }
    const bool truncated = level >= 1;
    const int band = truncated ? level : exact_band(u);
    drift_out = linear_part(u, band);
    drift_out -= advection(u, band);
    for (int i = 0; i < noise_modes_; ++i) {
        auto& w = columns[static_cast<std::size_t>(i)];
        w = salt_noise_column(u, i, xi_, truncated ? level : u.band() + xi_.band());
        if (form == DriftForm::Ito) {
            drift_out.axpy(0.5, salt_noise_column(w, i, xi_, band));
        }
    }
    if (truncated) {
        drift_out = project_n(drift_out, level);
    }
}

SpectralField drift_eval(const OperatorPair& pair, double t, const SpectralField& u) {
    return pair.drift(t, u);
}

}  // namespace spde
