#include "spde/config.hpp"

#include "spde/errors.hpp"
#include "spde/path_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace spde {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

/// Current key and line, for error messages raised by the value parsers.
struct Where {
    std::string key;
    int line = 0;
};

[[noreturn]] void fail(const Where& w, const std::string& what) {
    throw ConfigError(w.key, w.line,
                      "line " + std::to_string(w.line) + ", key '" + w.key + "': " + what);
}

double to_double(std::string_view s, const Where& w) {
    double v = 0.0;
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        fail(w, "expected a number, got '" + std::string(s) + "'");
    }
    return v;
}

long long to_int(std::string_view s, const Where& w) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        fail(w, "expected an integer, got '" + std::string(s) + "'");
    }
    return v;
}

std::uint64_t to_u64(std::string_view s, const Where& w) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        fail(w, "expected an unsigned integer, got '" + std::string(s) + "'");
    }
    return v;
}

int to_small_int(std::string_view s, const Where& w) {
    const long long v = to_int(s, w);
    if (v < -1'000'000 || v > 1'000'000) {
        fail(w, "integer out of range");
    }
    return static_cast<int>(v);
}

std::size_t to_count(std::string_view s, const Where& w) {
    const long long v = to_int(s, w);
    if (v < 0) {
        fail(w, "expected a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
}

bool to_bool(std::string_view s, const Where& w) {
    if (s == "true") {
        return true;
    }
    if (s == "false") {
        return false;
    }
    fail(w, "expected true or false, got '" + std::string(s) + "'");
}

std::vector<double> to_doubles(std::string_view s, const Where& w) {
    std::vector<double> out;
    for (auto part : split(s, ',')) {
        out.push_back(to_double(part, w));
    }
    return out;
}

std::vector<int> to_ints(std::string_view s, const Where& w) {
    std::vector<int> out;
    for (auto part : split(s, ',')) {
        out.push_back(to_small_int(part, w));
    }
    return out;
}

ModeIndex to_mode(std::string_view s, const Where& w) {
    const auto parts = split(s, ',');
    if (parts.size() != 2) {
        fail(w, "expected a mode 'kx, ky', got '" + std::string(s) + "'");
    }
    return {to_small_int(parts[0], w), to_small_int(parts[1], w)};
}

std::vector<ModeIndex> to_modes(std::string_view s, const Where& w) {
    std::vector<ModeIndex> out;
    if (trim(s).empty()) {
        return out;
    }
    for (auto part : split(s, ';')) {
        out.push_back(to_mode(part, w));
    }
    return out;
}

std::vector<std::pair<double, double>> to_vectors(std::string_view s, const Where& w) {
    std::vector<std::pair<double, double>> out;
    if (trim(s).empty()) {
        return out;
    }
    for (auto part : split(s, ';')) {
        const auto xy = split(part, ',');
        if (xy.size() != 2) {
            fail(w, "expected 'cx, cy' pairs separated by ';'");
        }
        out.emplace_back(to_double(xy[0], w), to_double(xy[1], w));
    }
    return out;
}

std::string show(double x) {
    return format_double(x);
}

template <class T, class F>
std::string join(const std::vector<T>& v, const std::string& sep, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) {
            out += sep;
        }
        out += f(v[i]);
    }
    return out;
}

std::string show_mode(ModeIndex k) {
    return std::to_string(k.kx) + ", " + std::to_string(k.ky);
}

std::string_view scheme_name(Scheme s) {
    return s == Scheme::EulerIto ? "euler-ito" : "heun-stratonovich";
}

std::string_view initial_name(InitialKind k) {
    switch (k) {
        case InitialKind::Zero: return "zero";
        case InitialKind::Mode: return "mode";
        case InitialKind::Random: return "random";
    }
    return "random";
}

std::string_view stopping_name(StoppingFamily f) {
    switch (f) {
        case StoppingFamily::Hit: return "hit";
        case StoppingFamily::Fixed: return "fixed";
        case StoppingFamily::Both: return "both";
    }
    return "both";
}

struct Field {
    std::string section;
    std::string key;
    std::function<void(RunConfig&, std::string_view, const Where&)> set;
    /// Empty result: key omitted from the rendering.
    std::function<std::optional<std::string>(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
    using V = std::string_view;
    using W = const Where&;
    using O = std::optional<std::string>;
    static const std::vector<Field> table = {
        {"", "command",
         [](RunConfig& c, V v, W w) {
             if (!is_command(v)) {
                 fail(w, "unknown command '" + std::string(v) + "'");
             }
             c.command = v;
         },
         [](const RunConfig& c) { return c.command.empty() ? O{} : O{c.command}; }},

        {"operator", "kind",
         [](RunConfig& c, V v, W w) {
             try {
                 c.op.kind = parse_kind(v);
             } catch (const UsageError&) {
                 fail(w, "unknown operator kind '" + std::string(v) + "'");
             }
         },
         [](const RunConfig& c) { return O{std::string(kind_name(c.op.kind))}; }},
        {"operator", "nu", [](RunConfig& c, V v, W w) { c.op.nu = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.op.nu)}; }},
        {"operator", "noise_modes",
         [](RunConfig& c, V v, W w) { c.op.noise_modes = to_small_int(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.op.noise_modes)}; }},
        {"operator", "xi_amplitude",
         [](RunConfig& c, V v, W w) { c.op.xi_amplitude = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.op.xi_amplitude)}; }},
        {"operator", "xi_ratio", [](RunConfig& c, V v, W w) { c.op.xi_ratio = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.op.xi_ratio)}; }},
        {"operator", "xi_phase_seed",
         [](RunConfig& c, V v, W w) { c.op.xi_phase_seed = to_u64(v, w); },
         [](const RunConfig& c) {
             return c.op.xi_phase_seed ? O{std::to_string(*c.op.xi_phase_seed)} : O{};
         }},
        {"operator", "xi_file", [](RunConfig& c, V v, W) { c.op.xi_file = v; },
         [](const RunConfig& c) { return c.op.xi_file.empty() ? O{} : O{c.op.xi_file}; }},
        {"operator", "xi_constant",
         [](RunConfig& c, V v, W w) { c.op.xi_constant = to_vectors(v, w); },
         [](const RunConfig& c) {
             if (c.op.xi_constant.empty()) {
                 return O{};
             }
             return O{join(c.op.xi_constant, "; ", [](const std::pair<double, double>& p) {
                 return show(p.first) + ", " + show(p.second);
             })};
         }},
        {"operator", "rate", [](RunConfig& c, V v, W w) { c.op.rate = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.op.rate)}; }},
        {"operator", "additive_modes",
         [](RunConfig& c, V v, W w) { c.op.additive_modes = to_modes(v, w); },
         [](const RunConfig& c) {
             return c.op.additive_modes.empty() ? O{}
                                                : O{join(c.op.additive_modes, "; ", show_mode)};
         }},
        {"operator", "additive_amplitude",
         [](RunConfig& c, V v, W w) { c.op.additive_amplitude = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.op.additive_amplitude)}; }},

        {"spaces", "levels", [](RunConfig& c, V v, W w) { c.levels = to_ints(v, w); },
         [](const RunConfig& c) {
             return O{join(c.levels, ", ", [](int n) { return std::to_string(n); })};
         }},

        {"initial", "kind",
         [](RunConfig& c, V v, W w) {
             if (v == "zero") {
                 c.initial.kind = InitialKind::Zero;
             } else if (v == "mode") {
                 c.initial.kind = InitialKind::Mode;
             } else if (v == "random") {
                 c.initial.kind = InitialKind::Random;
             } else {
                 fail(w, "expected zero, mode or random");
             }
         },
         [](const RunConfig& c) { return O{std::string(initial_name(c.initial.kind))}; }},
        {"initial", "band", [](RunConfig& c, V v, W w) { c.initial.band = to_small_int(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.initial.band)}; }},
        {"initial", "slope", [](RunConfig& c, V v, W w) { c.initial.slope = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.initial.slope)}; }},
        {"initial", "amplitude",
         [](RunConfig& c, V v, W w) { c.initial.amplitude = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.initial.amplitude)}; }},
        {"initial", "clip", [](RunConfig& c, V v, W w) { c.initial.clip = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.initial.clip)}; }},
        {"initial", "per_path", [](RunConfig& c, V v, W w) { c.initial.per_path = to_bool(v, w); },
         [](const RunConfig& c) { return O{c.initial.per_path ? "true" : "false"}; }},
        {"initial", "mode", [](RunConfig& c, V v, W w) { c.initial.mode = to_mode(v, w); },
         [](const RunConfig& c) { return O{show_mode(c.initial.mode)}; }},

        {"integrator", "dt", [](RunConfig& c, V v, W w) { c.integrator.dt = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.integrator.dt)}; }},
        {"integrator", "T", [](RunConfig& c, V v, W w) { c.integrator.T = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.integrator.T)}; }},
        {"integrator", "scheme",
         [](RunConfig& c, V v, W w) {
             if (v == "euler-ito") {
                 c.integrator.scheme = Scheme::EulerIto;
             } else if (v == "heun-stratonovich") {
                 c.integrator.scheme = Scheme::HeunStratonovich;
             } else {
                 fail(w, "expected euler-ito or heun-stratonovich");
             }
         },
         [](const RunConfig& c) { return O{std::string(scheme_name(c.integrator.scheme))}; }},
        {"integrator", "dt_ratio",
         [](RunConfig& c, V v, W w) { c.integrator.dt_ratio = to_small_int(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.integrator.dt_ratio)}; }},

        {"thresholds", "M", [](RunConfig& c, V v, W w) { c.thresholds.M = to_doubles(v, w); },
         [](const RunConfig& c) { return O{join(c.thresholds.M, ", ", show)}; }},
        {"thresholds", "R",
         [](RunConfig& c, V v, W w) {
             if (v == "auto") {
                 c.thresholds.R.reset();
             } else {
                 c.thresholds.R = to_double(v, w);
             }
         },
         [](const RunConfig& c) {
             return O{c.thresholds.R ? show(*c.thresholds.R) : std::string("auto")};
         }},
        {"thresholds", "hit_ceiling",
         [](RunConfig& c, V v, W w) { c.thresholds.hit_ceiling = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.thresholds.hit_ceiling)}; }},

        {"ensemble", "paths", [](RunConfig& c, V v, W w) { c.ensemble.paths = to_count(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.ensemble.paths)}; }},
        {"ensemble", "seed", [](RunConfig& c, V v, W w) { c.ensemble.seed = to_u64(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.ensemble.seed)}; }},
        {"ensemble", "workers",
         [](RunConfig& c, V v, W w) {
             c.ensemble.workers = static_cast<unsigned>(std::min<std::size_t>(to_count(v, w), 4096));
         },
         [](const RunConfig& c) { return O{std::to_string(c.ensemble.workers)}; }},
        {"ensemble", "blowup_fraction",
         [](RunConfig& c, V v, W w) { c.ensemble.blowup_fraction = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.ensemble.blowup_fraction)}; }},

        {"study", "deltas", [](RunConfig& c, V v, W w) { c.study.deltas = to_doubles(v, w); },
         [](const RunConfig& c) { return O{join(c.study.deltas, ", ", show)}; }},
        {"study", "m_levels", [](RunConfig& c, V v, W w) { c.study.m_levels = to_ints(v, w); },
         [](const RunConfig& c) {
             return O{join(c.study.m_levels, ", ", [](int n) { return std::to_string(n); })};
         }},
        {"study", "partners", [](RunConfig& c, V v, W w) { c.study.partners = to_ints(v, w); },
         [](const RunConfig& c) {
             return O{join(c.study.partners, ", ", [](int n) { return std::to_string(n); })};
         }},
        {"study", "stopping",
         [](RunConfig& c, V v, W w) {
             if (v == "hit") {
                 c.study.stopping = StoppingFamily::Hit;
             } else if (v == "fixed") {
                 c.study.stopping = StoppingFamily::Fixed;
             } else if (v == "both") {
                 c.study.stopping = StoppingFamily::Both;
             } else {
                 fail(w, "expected hit, fixed or both");
             }
         },
         [](const RunConfig& c) { return O{std::string(stopping_name(c.study.stopping))}; }},
        {"study", "theta", [](RunConfig& c, V v, W w) { c.study.theta = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.study.theta)}; }},
        {"study", "probe", [](RunConfig& c, V v, W w) { c.study.probe = to_mode(v, w); },
         [](const RunConfig& c) { return O{show_mode(c.study.probe)}; }},
        {"study", "uniform_tolerance",
         [](RunConfig& c, V v, W w) { c.study.uniform_tolerance = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.study.uniform_tolerance)}; }},
        {"study", "audit_samples",
         [](RunConfig& c, V v, W w) { c.study.audit_samples = to_count(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.study.audit_samples)}; }},
        {"study", "audit_sets", [](RunConfig& c, V v, W w) { c.study.audit_sets = to_ints(v, w); },
         [](const RunConfig& c) {
             return O{join(c.study.audit_sets, ", ", [](int n) { return std::to_string(n); })};
         }},
        {"study", "audit_band",
         [](RunConfig& c, V v, W w) { c.study.audit_band = to_small_int(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.study.audit_band)}; }},
        {"study", "audit_p", [](RunConfig& c, V v, W w) { c.study.audit_p = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.study.audit_p)}; }},
        {"study", "audit_epsilon",
         [](RunConfig& c, V v, W w) { c.study.audit_epsilon = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.study.audit_epsilon)}; }},
        {"study", "audit_slope_threshold",
         [](RunConfig& c, V v, W w) { c.study.audit_slope_threshold = to_double(v, w); },
         [](const RunConfig& c) { return O{show(c.study.audit_slope_threshold)}; }},

        {"output", "dir", [](RunConfig& c, V v, W) { c.output.dir = v; },
         [](const RunConfig& c) { return O{c.output.dir}; }},
        {"output", "state_stride",
         [](RunConfig& c, V v, W w) { c.output.state_stride = to_count(v, w); },
         [](const RunConfig& c) { return O{std::to_string(c.output.state_stride)}; }},
    };
    return table;
}

const std::vector<std::string>& sections() {
    static const std::vector<std::string> s = {"",          "operator", "spaces",
                                               "initial",   "integrator", "thresholds",
                                               "ensemble",  "study",    "output"};
    return s;
}

using LineMap = std::map<std::string, int>;

int line_of(const LineMap& lines, const std::string& key) {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
}

bool multiple_of(double x, double dt) {
    const double r = x / dt;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

void validate_with(const RunConfig& c, const LineMap& lines) {
    const auto check = [&](bool ok, const std::string& key, const std::string& what) {
        if (!ok) {
            fail(Where{key, line_of(lines, key)}, what);
        }
    };
    const auto& op = c.op;
    check(std::isfinite(op.nu) && op.nu >= 0.0, "operator.nu", "nu must be finite and >= 0");
    check(op.noise_modes >= 0 && op.noise_modes <= 64, "operator.noise_modes",
          "noise_modes must lie in [0, 64]");
    check(op.xi_amplitude >= 0.0 && std::isfinite(op.xi_amplitude), "operator.xi_amplitude",
          "xi_amplitude must be finite and >= 0");
    check(op.xi_ratio > 0.0 && op.xi_ratio <= 1.0, "operator.xi_ratio",
          "xi_ratio must lie in (0, 1]");
    check(op.rate >= 0.0 && std::isfinite(op.rate), "operator.rate", "rate must be >= 0");
    for (const ModeIndex& k : op.additive_modes) {
        check(!k.is_zero(), "operator.additive_modes", "additive modes must be nonzero");
    }

    check(!c.levels.empty(), "spaces.levels", "at least one level is required");
    for (int n : c.levels) {
        check(n >= 1 && n <= 256, "spaces.levels", "levels must lie in [1, 256]");
    }

    check(c.initial.band >= 0 && c.initial.band <= 256, "initial.band",
          "band must lie in [0, 256]");
    check(c.initial.amplitude >= 0.0 && std::isfinite(c.initial.amplitude), "initial.amplitude",
          "amplitude must be finite and >= 0");
    check(c.initial.clip > 0.0, "initial.clip", "clip must be positive");
    check(c.initial.kind != InitialKind::Mode || !c.initial.mode.is_zero(), "initial.mode",
          "initial mode must be nonzero");

    const double dt = c.integrator.dt;
    const double T = c.integrator.T;
    check(dt > 0.0 && std::isfinite(dt), "integrator.dt", "dt must be positive");
    check(T > 0.0 && std::isfinite(T), "integrator.T", "T must be positive");
    check(multiple_of(T, dt), "integrator.dt",
          "dt = " + show(dt) + " does not divide T = " + show(T));
    check(c.integrator.dt_ratio >= 2, "integrator.dt_ratio", "dt_ratio must be >= 2");

    check(!c.thresholds.M.empty(), "thresholds.M", "at least one M is required");
    for (double M : c.thresholds.M) {
        check(M > 1.0, "thresholds.M", "M = " + show(M) + " violates the invariant M > 1");
    }
    check(std::is_sorted(c.thresholds.M.begin(), c.thresholds.M.end()) &&
              std::adjacent_find(c.thresholds.M.begin(), c.thresholds.M.end()) ==
                  c.thresholds.M.end(),
          "thresholds.M", "M list must be strictly increasing");
    check(!c.thresholds.R || *c.thresholds.R > 0.0, "thresholds.R", "R must be positive");
    check(c.thresholds.hit_ceiling > 0.0 && c.thresholds.hit_ceiling <= 1.0,
          "thresholds.hit_ceiling", "hit_ceiling must lie in (0, 1]");

    check(c.ensemble.paths >= 2, "ensemble.paths", "paths must be >= 2");
    check(c.ensemble.blowup_fraction >= 0.0 && c.ensemble.blowup_fraction < 1.0,
          "ensemble.blowup_fraction", "blowup_fraction must lie in [0, 1)");

    check(!c.study.deltas.empty(), "study.deltas", "at least one delta is required");
    for (double d : c.study.deltas) {
        check(d > 0.0 && d < T && multiple_of(d, dt), "study.deltas",
              "delta = " + show(d) + " is not a positive multiple of dt below T");
    }
    check(!c.study.m_levels.empty() && c.study.m_levels.front() >= 1 &&
              std::is_sorted(c.study.m_levels.begin(), c.study.m_levels.end()),
          "study.m_levels", "m_levels must be nonempty, increasing and >= 1");
    for (int f : c.study.partners) {
        check(f >= 1 && f <= 8, "study.partners", "partner factors must lie in [1, 8]");
    }
    check(c.study.theta >= 0.0 && c.study.theta <= T, "study.theta", "theta must lie in [0, T]");
    check(c.study.uniform_tolerance > 0.0, "study.uniform_tolerance",
          "uniform_tolerance must be positive");
    check(c.study.audit_samples >= 100, "study.audit_samples", "audit_samples must be >= 100");
    for (int s : c.study.audit_sets) {
        check(s >= 1 && s <= 3, "study.audit_sets", "audit sets are 1, 2 and 3");
    }
    check(c.study.audit_band >= 1 && c.study.audit_band <= 32, "study.audit_band",
          "audit_band must lie in [1, 32]");
    check(c.study.audit_p > 0.0, "study.audit_p", "audit_p must be positive");
    check(c.study.audit_epsilon >= 0.0, "study.audit_epsilon", "audit_epsilon must be >= 0");
    check(c.study.audit_slope_threshold > 0.0, "study.audit_slope_threshold",
          "audit_slope_threshold must be positive");
    check(!c.output.dir.empty(), "output.dir", "output dir must be nonempty");
}

}  // namespace

bool is_command(std::string_view name) noexcept {
    return std::find(std::begin(kCommands), std::end(kCommands), name) != std::end(kCommands);
}

RunConfig parse_config(std::string_view text) {
    RunConfig c;
    LineMap lines;
    std::string section;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line =
            text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                fail(Where{"", line_no}, "malformed section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty() ||
                std::find(sections().begin(), sections().end(), section) == sections().end()) {
                fail(Where{section, line_no}, "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            const std::string word(line.substr(0, line.find_first_of(" \t")));
            fail(Where{section.empty() ? word : section + "." + word, line_no},
                 "expected 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) {
            return f.section == section && f.key == key;
        });
        if (it == table.end()) {
            fail(Where{full, line_no}, "unknown key");
        }
        if (lines.count(full)) {
            fail(Where{full, line_no}, "duplicate key (first on line " +
                                           std::to_string(lines[full]) + ")");
        }
        lines[full] = line_no;
        it->set(c, value, Where{full, line_no});
    }
    validate_with(c, lines);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string render_config(const RunConfig& config) {
    std::string out;
    for (const auto& section : sections()) {
        std::string body;
        for (const auto& f : fields()) {
            if (f.section != section) {
                continue;
            }
            if (auto v = f.get(config)) {
                body += f.key + " = " + *v + "\n";
            }
        }
        if (body.empty()) {
            continue;
        }
        if (!section.empty()) {
            if (!out.empty()) {
                out += "\n";
            }
            out += "[" + section + "]\n";
        }
        out += body;
    }
    return out;
}

void validate_config(const RunConfig& config) {
    validate_with(config, {});
}

OperatorPair build_pair(const RunConfig& config) {
    const auto& op = config.op;
    const int band_of_modes = [&] {
        int b = 1;
        for (const ModeIndex& k : op.additive_modes) {
            b = std::max(b, k.inf_norm());
        }
        return b;
    }();
    std::vector<SpectralField> additive;
    for (const ModeIndex& k : op.additive_modes) {
        additive.push_back(solenoidal_mode(band_of_modes, k, op.additive_amplitude));
    }
    switch (op.kind) {
        case OperatorKind::SaltNS: {
            SaltCoefficients xi;
            int m = op.noise_modes;
            if (!op.xi_file.empty()) {
                xi = SaltCoefficients::load_spectrum(op.xi_file);
            } else if (!op.xi_constant.empty()) {
                xi = SaltCoefficients::constant(op.xi_constant);
                m = xi.size();
            } else {
                xi = SaltCoefficients::default_library(op.noise_modes, op.xi_amplitude,
                                                       op.xi_ratio, op.xi_phase_seed);
            }
            return OperatorPair::salt_ns(NSParams{op.nu, m}, std::move(xi));
        }
        case OperatorKind::Heat:
            return OperatorPair::heat(op.nu, std::move(additive));
        case OperatorKind::Zero:
            return OperatorPair::zero();
        case OperatorKind::AdditiveOU:
            return OperatorPair::additive_ou(op.rate, std::move(additive));
    }
    throw UsageError("unknown operator kind");
}

EnsembleConfig ensemble_config(const RunConfig& config) {
    EnsembleConfig e;
    e.path.dt = config.integrator.dt;
    e.path.T = config.integrator.T;
    e.path.scheme = config.integrator.scheme;
    e.path.M = config.thresholds.M.back();
    e.path.R = config.thresholds.R;
    e.path.initial.kind = config.initial.kind;
    e.path.initial.band = config.initial.band;
    e.path.initial.slope = config.initial.slope;
    e.path.initial.amplitude = config.initial.amplitude;
    e.path.initial.clip = config.initial.clip;
    e.path.initial.per_path = config.initial.per_path;
    e.path.initial.mode = config.initial.mode;
    e.path.level = config.levels.front();
    e.paths = config.ensemble.paths;
    e.master_seed = config.ensemble.seed;
    e.levels = config.levels;
    e.M_list = config.thresholds.M;
    e.hit_ceiling = config.thresholds.hit_ceiling;
    e.deltas = config.study.deltas;
    e.m_levels = config.study.m_levels;
    e.partner_factors = config.study.partners;
    e.stopping = config.study.stopping;
    e.theta = config.study.theta;
    e.probe = config.study.probe;
    e.uniform_tolerance = config.study.uniform_tolerance;
    e.blowup_fraction = config.ensemble.blowup_fraction;
    e.dt_ratio = config.integrator.dt_ratio;
    e.workers = config.ensemble.workers;
    return e;
}

AuditSettings audit_settings(const RunConfig& config) {
    AuditSettings a;
    a.samples = config.study.audit_samples;
    a.seed = config.ensemble.seed;
    a.band = config.study.audit_band;
    a.p = config.study.audit_p;
    a.epsilon = config.study.audit_epsilon;
    a.slope_threshold = config.study.audit_slope_threshold;
    return a;
}

}  // namespace spde
