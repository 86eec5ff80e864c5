#include "spde/assumptions.hpp"

#include "spde/engine.hpp"
#include "spde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace spde {

namespace {

struct Eval {
    SpectralField drift;
    std::vector<SpectralField> columns;
};

Eval evaluate_at(const OperatorPair& pair, const SpectralField& f, int level) {
    Eval e;
    pair.evaluate(0.0, f, level, DriftForm::Ito, e.drift, e.columns);
    return e;
}

double pw(double x, double p) {
    return std::pow(x, p);
}

double KU(const SpectralField& f, double p) {
    return growth_K(f, Space::U, GrowthProfile(p));
}

double KH(const SpectralField& f, double p) {
    return growth_K(f, Space::H, GrowthProfile(p));
}

double KV(const SpectralField& f, double p) {
    return growth_K(f, Space::V, GrowthProfile(p));
}

double KU2(const SpectralField& f, const SpectralField& g, double p) {
    return growth_K(f, g, Space::U, GrowthProfile(p));
}

double KV2(const SpectralField& f, const SpectralField& g, double p) {
    return growth_K(f, g, Space::V, GrowthProfile(p));
}

/// Difference of two fields that may live on different bands.
SpectralField diff(const SpectralField& a, const SpectralField& b) {
    const int band = std::max(a.band(), b.band());
    SpectralField out = a.resized(band);
    out.axpy(-1.0, b);
    return out;
}

double sum_sq_norms(const std::vector<SpectralField>& cols, Space s) {
    double acc = 0.0;
    for (const auto& c : cols) {
        acc += norm_sq(c, s);
    }
    return acc;
}

double sum_sq_diff_norms(const std::vector<SpectralField>& a, const std::vector<SpectralField>& b,
                         Space s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += norm_sq(diff(a[i], b[i]), s);
    }
    return acc;
}

double sum_sq_pairings(const std::vector<SpectralField>& cols, const SpectralField& f, Space s) {
    double acc = 0.0;
    for (const auto& c : cols) {
        const double v = inner(c, f, s);
        acc += v * v;
    }
    return acc;
}

double sum_sq_diff_pairings(const std::vector<SpectralField>& a,
                            const std::vector<SpectralField>& b, const SpectralField& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double v = inner(diff(a[i], b[i]), f, Space::U);
        acc += v * v;
    }
    return acc;
}

void require_arity(const InequalityInfo& info, std::span<const SpectralField> fields) {
    if (static_cast<int>(fields.size()) != info.arity) {
        throw UsageError(info.id + " needs " + std::to_string(info.arity) + " sample fields, got " +
                         std::to_string(fields.size()));
    }
}

}  // namespace

const std::vector<InequalityInfo>& inequality_registry() {
    static const std::vector<InequalityInfo> registry = {
        {"A1.1a", 1, 1, false, false, false, "|A(f)|_H* + sum |G_i(f)|_U^2 <= c K_U(f)[1 + |f|_H^2]"},
        {"A1.1b", 1, 2, false, false, false, "|A(phi) - A(psi)|_U^2 <= c K_V(phi,psi) |phi - psi|_V^2"},
        {"A1.1c", 1, 2, false, false, false,
         "sum |G_i(phi) - G_i(psi)|_U^2 <= c K_V(phi,psi) |phi - psi|_H^2"},
        {"A1.2a", 1, 1, true, false, false,
         "2<A(phi),phi>_U + sum |G_i(phi)|_U^2 <= c [1 + |phi|_U^2] - gamma |phi|_H^2"},
        {"A1.2b", 1, 1, false, false, false, "sum <G_i(phi),phi>_U^2 <= c [1 + |phi|_U^4]"},
        {"A1.3a", 1, 2, false, false, false,
         "<A(phi),f>_U <= c [K_U(phi) + |phi|_H^1.5][K_U(f) + |f|_H^1.5]"},
        {"A1.3b", 1, 2, false, false, false, "sum <G_i(phi),f>_U^2 <= c K_U(phi) K_H(f)"},
        {"A1.4a", 1, 3, false, false, false,
         "<A(phi) - A(f),psi> <= c K_V(psi)[1 + |phi|_H + |f|_H] |phi - f|_U"},
        {"A1.4b", 1, 3, false, false, false,
         "sum <G_i(phi) - G_i(f),psi>_U^2 <= c K_V(psi) |phi - f|_U^2"},
        {"A2.1", 2, 1, false, false, false, "|A(f)|_H*^2 <= c K_U(f)[1 + |f|_H^2]"},
        {"A2.2a", 2, 2, true, false, false,
         "2<A(f) - A(g),f - g> + sum |G_i(f) - G_i(g)|_U^2 <= c K_U(f,g)[1 + |f|_H^2 + |g|_H^2] "
         "|f - g|_U^2 - gamma |f - g|_H^2"},
        {"A2.2b", 2, 2, false, false, false,
         "sum <G_i(f) - G_i(g),f - g>_U^2 <= c K_U(f,g)[1 + |f|_H^2 + |g|_H^2] |f - g|_U^4"},
        {"A3.1", 3, 1, false, false, false,
         "|A(phi)|_U^2 + sum |G_i(phi)|_Hbar^2 <= c K_U(phi)[1 + |phi|_H^4 + |phi|_V^2]"},
        {"A3.2a", 3, 1, true, false, false,
         "2<P_n A(phi),phi>_H + sum |P_n G_i(phi)|_H^2 <= c K_U(phi)[1 + |phi|_H^4] - gamma "
         "|phi|_V^2, phi in V_n"},
        {"A3.2b", 3, 1, false, true, false,
         "sum <P_n G_i(phi),phi>_H^2 <= c K_U(phi)[1 + |phi|_H^6] + eps |phi|_V^2, phi in V_n"},
        {"A3.mu", 3, 1, false, false, true, "|(I - P_n) f|_U <= |f|_Hbar / mu_n"},
    };
    return registry;
}

const InequalityInfo& inequality_info(const std::string& id) {
    for (const auto& info : inequality_registry()) {
        if (info.id == id) {
            return info;
        }
    }
    throw UsageError("unknown assumption id '" + id + "'");
}

std::vector<std::string> resolve_assumption_ids(const std::string& id_or_group) {
    std::vector<std::string> out;
    for (const auto& info : inequality_registry()) {
        if (info.id == id_or_group) {
            return {info.id};
        }
        const bool prefixed = info.id.rfind(id_or_group, 0) == 0 &&
                              info.id.size() == id_or_group.size() + 1 &&
                              std::isalpha(static_cast<unsigned char>(info.id.back()));
        if (prefixed) {
            out.push_back(info.id);
        }
    }
    if (out.empty()) {
        throw UsageError("unknown assumption id '" + id_or_group + "'");
    }
    return out;
}

WitnessTerms witness_terms(const OperatorPair& pair, const std::string& id,
                           std::span<const SpectralField> fields, double p, int level) {
    const InequalityInfo& info = inequality_info(id);
    require_arity(info, fields);
    WitnessTerms w;
    const auto& f0 = fields[0];
    if (id == "A1.1a" || id == "A2.1") {
        const Eval e = evaluate_at(pair, f0, -1);
        const double a = norm(e.drift, Space::Hstar);
        w.lhs = id == "A1.1a" ? a + sum_sq_norms(e.columns, Space::U) : a * a;
        w.majorant = KU(f0, p) * (1.0 + norm_sq(f0, Space::H));
    } else if (id == "A1.1b" || id == "A1.1c") {
        const Eval a = evaluate_at(pair, f0, -1);
        const Eval b = evaluate_at(pair, fields[1], -1);
        const SpectralField d = diff(f0, fields[1]);
        if (id == "A1.1b") {
            w.lhs = norm_sq(diff(a.drift, b.drift), Space::U);
            w.majorant = KV2(f0, fields[1], p) * norm_sq(d, Space::V);
        } else {
            w.lhs = sum_sq_diff_norms(a.columns, b.columns, Space::U);
            w.majorant = KV2(f0, fields[1], p) * norm_sq(d, Space::H);
        }
    } else if (id == "A1.2a") {
        const Eval e = evaluate_at(pair, f0, -1);
        w.lhs = 2.0 * inner(e.drift, f0, Space::U) + sum_sq_norms(e.columns, Space::U);
        w.majorant = 1.0 + norm_sq(f0, Space::U);
        w.coercive = norm_sq(f0, Space::H);
    } else if (id == "A1.2b") {
        const Eval e = evaluate_at(pair, f0, -1);
        w.lhs = sum_sq_pairings(e.columns, f0, Space::U);
        w.majorant = 1.0 + pw(norm(f0, Space::U), 4.0);
    } else if (id == "A1.3a" || id == "A1.3b") {
        const Eval e = evaluate_at(pair, f0, -1);
        const SpectralField& f = fields[1];
        if (id == "A1.3a") {
            w.lhs = inner(e.drift, f, Space::U);
            w.majorant = (KU(f0, p) + pw(norm(f0, Space::H), 1.5)) *
                         (KU(f, p) + pw(norm(f, Space::H), 1.5));
        } else {
            w.lhs = sum_sq_pairings(e.columns, f, Space::U);
            w.majorant = KU(f0, p) * KH(f, p);
        }
    } else if (id == "A1.4a" || id == "A1.4b") {
        const SpectralField& f = fields[1];
        const SpectralField& psi = fields[2];
        const Eval a = evaluate_at(pair, f0, -1);
        const Eval b = evaluate_at(pair, f, -1);
        const double du = norm(diff(f0, f), Space::U);
        if (id == "A1.4a") {
            w.lhs = duality_pairing(diff(a.drift, b.drift), psi);
            w.majorant = KV(psi, p) * (1.0 + norm(f0, Space::H) + norm(f, Space::H)) * du;
        } else {
            w.lhs = sum_sq_diff_pairings(a.columns, b.columns, psi);
            w.majorant = KV(psi, p) * du * du;
        }
    } else if (id == "A2.2a" || id == "A2.2b") {
        const SpectralField& g = fields[1];
        const Eval a = evaluate_at(pair, f0, -1);
        const Eval b = evaluate_at(pair, g, -1);
        const SpectralField d = diff(f0, g);
        const double du2 = norm_sq(d, Space::U);
        const double scale =
            KU2(f0, g, p) * (1.0 + norm_sq(f0, Space::H) + norm_sq(g, Space::H));
        if (id == "A2.2a") {
            w.lhs = 2.0 * duality_pairing(diff(a.drift, b.drift), d) +
                    sum_sq_diff_norms(a.columns, b.columns, Space::U);
            w.majorant = scale * du2;
            w.coercive = norm_sq(d, Space::H);
        } else {
            double acc = 0.0;
            for (std::size_t i = 0; i < a.columns.size(); ++i) {
                const double v = inner(diff(a.columns[i], b.columns[i]), d, Space::U);
                acc += v * v;
            }
            w.lhs = acc;
            w.majorant = scale * du2 * du2;
        }
    } else if (id == "A3.1") {
        const Eval e = evaluate_at(pair, f0, -1);
        w.lhs = norm_sq(e.drift, Space::U) + sum_sq_norms(e.columns, Space::Hbar);
        w.majorant = KU(f0, p) * (1.0 + pw(norm(f0, Space::H), 4.0) + norm_sq(f0, Space::V));
    } else if (id == "A3.2a" || id == "A3.2b") {
        const SpectralField phi = project_n(f0.resized(level), level);
        const Eval e = evaluate_at(pair, phi, level);
        if (id == "A3.2a") {
            w.lhs = 2.0 * inner(e.drift, phi, Space::H) + sum_sq_norms(e.columns, Space::H);
            w.majorant = KU(phi, p) * (1.0 + pw(norm(phi, Space::H), 4.0));
            w.coercive = norm_sq(phi, Space::V);
        } else {
            w.lhs = sum_sq_pairings(e.columns, phi, Space::H);
            w.majorant = KU(phi, p) * (1.0 + pw(norm(phi, Space::H), 6.0));
            w.slack = norm_sq(phi, Space::V);
        }
    } else if (id == "A3.mu") {
        w.lhs = norm(tail_n(f0, level), Space::U);
        w.majorant = norm(f0, Space::Hbar) / mu(level);
    }
    return w;
}

double assumption_witness(const OperatorPair& pair, const std::string& id,
                          std::span<const SpectralField> fields, double c, double gamma, double p,
                          double epsilon, int level) {
    const WitnessTerms w = witness_terms(pair, id, fields, p, level);
    return c * w.majorant - gamma * w.coercive + epsilon * w.slack - w.lhs;
}

// ---------------------------------------------------------------------------

namespace {

SpectralField random_sample_field(int band, double amplitude, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> family(0, 2);
    const int kind = family(rng);
    SpectralField f(band);
    if (kind == 0) {
        std::uniform_int_distribution<int> comp(-band, band);
        ModeIndex k{0, 0};
        while (k.is_zero()) {
            k = {comp(rng), comp(rng)};
        }
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        f = solenoidal_mode(band, k, std::polar(1.0, phase(rng)));
    } else {
        std::uniform_real_distribution<double> slope(0.0, 2.0);
        const int active = kind == 1 ? band : std::min(band, 2);
        f = random_solenoidal_field(band, active, slope(rng), 1.0, rng);
    }
    const double u = norm(f, Space::U);
    if (u > 0.0) {
        f *= amplitude / u;
    }
    return f;
}

double log_uniform(double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(std::log(lo), std::log(hi));
    return std::exp(d(rng));
}

double sample_size(const std::vector<SpectralField>& tuple) {
    double s = 0.0;
    for (const auto& f : tuple) {
        s += norm(f, Space::H);
    }
    return s;
}

struct LpResult {
    double c = 0.0;
    double gamma = 0.0;
    bool bounded = true;
};

/// max gamma - c  s.t.  c * a_s - gamma * b_s >= r_s, c >= 0, gamma >= 0.
LpResult solve_lp(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<double>& r) {
    // Constraints with b_s > 0 bound gamma by the line slope_s * c + icept_s.
    std::vector<double> slope, icept;
    double c_lo = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        if (b[s] > 0.0) {
            slope.push_back(a[s] / b[s]);
            icept.push_back(-r[s] / b[s]);
        } else if (r[s] > 0.0) {
            if (a[s] <= 0.0) {
                return {0.0, 0.0, false};
            }
            c_lo = std::max(c_lo, r[s] / a[s]);
        }
    }
    if (slope.empty()) {
        return {c_lo, 0.0, true};
    }
    const auto envelope = [&](double c, std::size_t* arg) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < slope.size(); ++s) {
            best = std::min(best, slope[s] * c + icept[s]);
        }
        if (arg) {
            // Among lines tied at the minimum, the flattest one is active to the right.
            const double tol = 1e-12 * std::max(1.0, std::abs(best));
            std::size_t who = slope.size();
            for (std::size_t s = 0; s < slope.size(); ++s) {
                if (slope[s] * c + icept[s] <= best + tol &&
                    (who == slope.size() || slope[s] < slope[who])) {
                    who = s;
                }
            }
            *arg = who;
        }
        return best;
    };
    // gamma >= 0 needs envelope(c) >= 0; the envelope is nondecreasing in c.
    if (envelope(c_lo, nullptr) < 0.0) {
        double hi = std::max(1.0, 2.0 * c_lo);
        while (envelope(hi, nullptr) < 0.0) {
            hi *= 2.0;
            if (!std::isfinite(hi) || hi > 1e300) {
                return {0.0, 0.0, false};
            }
        }
        double lo = c_lo;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (envelope(mid, nullptr) < 0.0 ? lo : hi) = mid;
        }
        c_lo = hi;
    }
    // Walk the concave envelope until its slope drops to <= 1.
    double c = c_lo;
    for (std::size_t guard = 0; guard <= slope.size() + 1; ++guard) {
        std::size_t act = 0;
        envelope(c, &act);
        if (slope[act] <= 1.0) {
            return {c, std::max(0.0, envelope(c, nullptr)), true};
        }
        double next = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < slope.size(); ++s) {
            if (slope[s] < slope[act]) {
                const double x = (icept[s] - icept[act]) / (slope[act] - slope[s]);
                if (x > c) {
                    next = std::min(next, x);
                }
            }
        }
        if (!std::isfinite(next)) {
            return {c, envelope(c, nullptr), false};
        }
        c = next;
    }
    return {c, std::max(0.0, envelope(c, nullptr)), true};
}

double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

int audit_level(const InequalityInfo& info, const AuditSettings& settings) {
    // The tail bound needs modes beyond the projection level.
    return info.id == "A3.mu" ? std::max(1, settings.band / 2) : settings.band;
}

}  // namespace

std::vector<std::vector<SpectralField>> audit_samples(const AuditSettings& settings, int arity) {
    if (settings.samples == 0) {
        throw UsageError("assumption audit needs a nonempty sample set");
    }
    if (settings.band < 1 || settings.ladder < 2 || !(settings.amplitude_min > 0.0) ||
        !(settings.amplitude_max > settings.amplitude_min)) {
        throw UsageError("invalid audit sample settings");
    }
    std::mt19937_64 rng(mix_seed(settings.seed + static_cast<std::uint64_t>(arity)));
    std::bernoulli_distribution nearby(0.5);
    const std::size_t ladder = static_cast<std::size_t>(settings.ladder);
    const double ratio = std::log(settings.amplitude_max / settings.amplitude_min) /
                         static_cast<double>(ladder - 1);
    std::vector<std::vector<SpectralField>> out;
    out.reserve(settings.samples);
    std::vector<SpectralField> direction;
    for (std::size_t s = 0; s < settings.samples; ++s) {
        const std::size_t rung = s % ladder;
        if (rung == 0) {
            direction.clear();
            for (int a = 0; a < arity; ++a) {
                if (s == 0 && a == 0) {
                    direction.push_back(solenoidal_mode(settings.band, {1, 0}, 1.0));
                } else if (a == 1 && nearby(rng)) {
                    // Perturbation of the first field, to probe Lipschitz-type bounds.
                    SpectralField g = direction[0];
                    g.axpy(1.0, random_sample_field(settings.band, log_uniform(1e-3, 1.0, rng), rng));
                    direction.push_back(std::move(g));
                } else {
                    const double rel = a == 0 ? 1.0 : log_uniform(0.1, 10.0, rng);
                    direction.push_back(random_sample_field(settings.band, rel, rng));
                }
            }
        }
        const double amp = settings.amplitude_min * std::exp(ratio * static_cast<double>(rung));
        std::vector<SpectralField> tuple;
        for (const auto& d : direction) {
            tuple.push_back(amp * d);
        }
        out.push_back(std::move(tuple));
    }
    return out;
}

InequalityFit fit_inequality(const OperatorPair& pair, const std::string& id,
                             const AuditSettings& settings) {
    const InequalityInfo& info = inequality_info(id);
    const auto samples = audit_samples(settings, info.arity);
    const auto po = settings.p_override.find(id);
    const double p = po != settings.p_override.end() ? po->second : settings.p;
    const int level = audit_level(info, settings);
    const double eps = info.has_epsilon ? settings.epsilon : 0.0;

    std::vector<WitnessTerms> terms;
    terms.reserve(samples.size());
    for (const auto& tuple : samples) {
        const std::vector<SpectralField> fields =
            info.id == "A3.mu" ? std::vector<SpectralField>{tuple[0]} : tuple;
        terms.push_back(witness_terms(pair, id, fields, p, level));
    }

    InequalityFit fit;
    fit.id = id;
    fit.p = p;
    fit.epsilon = eps;
    fit.samples = samples.size();
    if (info.structural) {
        fit.c = 1.0;
    } else if (info.has_gamma) {
        std::vector<double> a, b, r;
        for (const auto& w : terms) {
            a.push_back(w.majorant);
            b.push_back(w.coercive);
            r.push_back(w.lhs - eps * w.slack);
        }
        const LpResult lp = solve_lp(a, b, r);
        fit.c = lp.c;
        fit.gamma = lp.gamma;
        fit.finite = lp.bounded;
        fit.gamma_edge = lp.gamma <= 0.0;
    } else {
        for (const auto& w : terms) {
            const double need = w.lhs - eps * w.slack;
            if (w.majorant > 0.0) {
                fit.c = std::max(fit.c, need / w.majorant);
            } else if (need > 0.0) {
                fit.finite = false;
            }
        }
    }

    fit.worst_margin = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> needed;
    for (std::size_t s = 0; s < terms.size(); ++s) {
        const auto& w = terms[s];
        const double margin = fit.c * w.majorant - fit.gamma * w.coercive + eps * w.slack - w.lhs;
        fit.worst_margin = std::min(fit.worst_margin, margin);
        const double need = w.majorant > 0.0
                                ? (w.lhs + fit.gamma * w.coercive - eps * w.slack) / w.majorant
                                : 0.0;
        needed.emplace_back(sample_size(samples[s]), need);
    }

    // Superlinear growth of the needed constant along a ray means no finite c exists.
    double scale = 0.0;
    for (const auto& w : terms) {
        if (w.majorant > 0.0) {
            scale = std::max(scale, std::abs(w.lhs) / w.majorant);
        }
    }
    // Needed constants below this are rounding noise of lhs - eps * slack.
    const double floor = std::max(1e-8 * scale, 1e-300);
    const std::size_t ladder = static_cast<std::size_t>(settings.ladder);
    fit.growth_slope = 0.0;
    for (std::size_t start = 0; start + ladder <= needed.size(); start += ladder) {
        std::vector<double> xs, ys;
        for (std::size_t r = ladder / 2; r < ladder; ++r) {
            const auto& [size, need] = needed[start + r];
            if (need > floor && size > 0.0) {
                xs.push_back(std::log(size));
                ys.push_back(std::log(need));
            }
        }
        if (xs.size() >= 2) {
            fit.growth_slope = std::max(fit.growth_slope, regression_slope(xs, ys));
        }
    }
    if (info.structural) {
        fit.finite = fit.worst_margin >= -1e-12;
    } else {
        fit.finite = fit.finite && std::isfinite(fit.c) &&
                     fit.growth_slope <= settings.slope_threshold;
    }
    return fit;
}

std::vector<InequalityFit> audit_assumption_set(const OperatorPair& pair, int set,
                                                const AuditSettings& settings) {
    if (set < 1 || set > 3) {
        throw UsageError("assumption set must be 1, 2 or 3");
    }
    std::vector<InequalityFit> out;
    for (const auto& info : inequality_registry()) {
        if (info.set == set) {
            out.push_back(fit_inequality(pair, info.id, settings));
        }
    }
    return out;
}

std::vector<IdentityCheck> structural_identities(const OperatorPair& pair,
                                                 const AuditSettings& settings,
                                                 std::size_t samples) {
    if (samples == 0) {
        throw UsageError("structural identity check needs samples");
    }
    std::mt19937_64 rng(mix_seed(settings.seed ^ 0x1de7'0000'0000'0000ULL));
    std::normal_distribution<double> gauss;
    const int band = settings.band;
    IdentityCheck adv{"advection-skew", 0.0, samples};
    IdentityCheck transport{"transport-skew", 0.0, samples};
    IdentityCheck leray{"leray-idempotence", 0.0, samples};
    IdentityCheck selfadj{"projection-self-adjoint", 0.0, samples};
    const auto ratio = [](double num, double den) { return den > 0.0 ? std::abs(num) / den : 0.0; };
    for (std::size_t s = 0; s < samples; ++s) {
        const double amp = log_uniform(settings.amplitude_min, settings.amplitude_max, rng);
        const SpectralField u = random_sample_field(band, amp, rng);
        const SpectralField a = advection(u);
        // Scales of the terms rather than of the result, which vanishes for shear modes.
        const double uu = norm(u, Space::U);
        const double uh = norm(u, Space::H);
        adv.defect = std::max(adv.defect, ratio(inner(a, u, Space::U), uu * uu * uh));
        if (pair.kind() == OperatorKind::SaltNS) {
            for (int i = 0; i < pair.xi().size(); ++i) {
                const SpectralField t = transport_apply(u, i, pair.xi());
                transport.defect = std::max(
                    transport.defect,
                    ratio(inner(t, u, Space::U), norm(pair.xi().field(i), Space::U) * uu * uh));
            }
        }
        // Unconstrained real field with a compressible part and a mean.
        SpectralField v(band);
        for (std::size_t idx = 0; idx < v.mode_count(); ++idx) {
            const ModeIndex k = v.mode_at(idx);
            v.set(k, {cplx(gauss(rng), gauss(rng)), cplx(gauss(rng), gauss(rng))});
        }
        const SpectralField pv = leray_project(v);
        leray.defect = std::max(leray.defect, ratio(norm(leray_project(pv) - pv, Space::U),
                                                    norm(pv, Space::U)));
        const SpectralField g = random_sample_field(band, 1.0, rng);
        const int n = std::max(1, band / 2);
        selfadj.defect = std::max(
            selfadj.defect, ratio(inner(project_n(u, n), g, Space::U) - inner(u, project_n(g, n), Space::U),
                                  norm(u, Space::U) * norm(g, Space::U)));
    }
    std::vector<IdentityCheck> out{adv, leray, selfadj};
    if (pair.kind() == OperatorKind::SaltNS) {
        out.insert(out.begin() + 1, transport);
    }
    return out;
}

}  // namespace spde
