#include "spde/config.hpp"
#include "spde/diagnostics.hpp"
#include "spde/engine.hpp"
#include "spde/errors.hpp"
#include "spde/operators.hpp"
#include "spde/orchestrator.hpp"
#include "spde/spectral_field.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>
#include <random>

namespace py = pybind11;
using namespace spde;

namespace {

using CArray = py::array_t<cplx>;

CArray component(const SpectralField& f, bool y) {
    const auto src = y ? f.y() : f.x();
    CArray out({f.side(), f.side()});
    std::copy(src.begin(), src.end(), out.mutable_data());
    return out;
}

SpectralField from_arrays(int band, const CArray& x, const CArray& y) {
    SpectralField f(band);
    const auto n = static_cast<py::ssize_t>(f.mode_count());
    if (x.size() != n || y.size() != n) {
        throw UsageError("coefficient arrays must have (2 band + 1)^2 entries");
    }
    std::copy(x.data(), x.data() + n, f.x().begin());
    std::copy(y.data(), y.data() + n, f.y().begin());
    return f;
}

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict report_dict(const EstimateReport& r) {
    py::list cells;
    for (const auto& c : r.cells) {
        py::dict d;
        d["label"] = c.label;
        d["level"] = c.level;
        d["param"] = c.param;
        d["value"] = c.value;
        d["estimate"] = c.estimate;
        d["stderr"] = c.std_error;
        d["samples"] = c.samples;
        d["blowups"] = c.blowups;
        d["pass"] = c.pass;
        py::dict extra;
        for (const auto& [k, v] : c.extra) extra[py::str(k)] = v;
        d["extra"] = extra;
        cells.append(d);
    }
    py::dict summary;
    for (const auto& [k, v] : r.summary) summary[py::str(k)] = v;
    py::dict out;
    out["id"] = r.id;
    out["estimate"] = r.estimate;
    out["stderr"] = r.std_error;
    out["ensemble"] = r.ensemble;
    out["blowups"] = r.blowups;
    out["pass"] = r.pass;
    out["margin"] = r.margin;
    out["cells"] = cells;
    out["summary"] = summary;
    out["notes"] = r.notes;
    return out;
}

py::dict record_dict(const PathRecord& rec) {
    py::dict d;
    d["level"] = rec.level;
    d["dt"] = rec.dt;
    d["T"] = rec.T;
    d["steps"] = rec.steps;
    d["seed"] = rec.seed;
    d["M"] = rec.M;
    d["R"] = rec.R;
    d["baseline"] = rec.baseline;
    d["hit_time"] = rec.hit_time();
    d["blown_up"] = rec.blown_up;
    d["norm_u2"] = to_array(rec.norm_u2);
    d["norm_h2"] = to_array(rec.norm_h2);
    d["norm_v2"] = to_array(rec.norm_v2);
    d["uh"] = to_array(uh_functional_series(rec));
    d["hv"] = to_array(hv_functional_series(rec));
    d["initial"] = rec.initial;
    d["final"] = rec.final_state;
    return d;
}

}  // namespace

PYBIND11_MODULE(_spde, m) {
    m.doc() = "Galerkin SPDE solver and diagnostics";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalBlowup>(m, "NumericalBlowup", PyExc_ArithmeticError);

    py::class_<SpectralField>(m, "SpectralField")
        .def(py::init<int>(), py::arg("band"))
        .def_static("from_arrays", &from_arrays, py::arg("band"), py::arg("x"), py::arg("y"))
        .def_property_readonly("band", &SpectralField::band)
        .def_property_readonly("x", [](const SpectralField& f) { return component(f, false); })
        .def_property_readonly("y", [](const SpectralField& f) { return component(f, true); })
        .def("at",
             [](const SpectralField& f, int kx, int ky) {
                 const Vec2c v = f.at({kx, ky});
                 return std::make_pair(v.x, v.y);
             })
        .def("set", [](SpectralField& f, int kx, int ky, cplx x,
                       cplx y) { f.set({kx, ky}, {x, y}); })
        .def("resized", &SpectralField::resized)
        .def("__add__", [](const SpectralField& a, const SpectralField& b) { return a + b; })
        .def("__sub__", [](const SpectralField& a, const SpectralField& b) { return a - b; })
        .def("__rmul__", [](const SpectralField& a, double s) { return s * a; })
        .def("__eq__", [](const SpectralField& a, const SpectralField& b) { return a == b; })
        .def("__repr__", [](const SpectralField& f) {
            return "<SpectralField band=" + std::to_string(f.band()) + ">";
        });

    m.def("solenoidal_mode", [](int band, int kx, int ky, cplx a) {
        return solenoidal_mode(band, {kx, ky}, a);
    });
    m.def(
        "random_field",
        [](int band, int active_band, double slope, double rms, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return random_solenoidal_field(band, active_band, slope, rms, rng);
        },
        py::arg("band"), py::arg("active_band"), py::arg("slope") = 1.0, py::arg("rms") = 1.0,
        py::arg("seed") = 0);
    m.def("norm", [](const SpectralField& f, const std::string& s) {
        return norm(f, parse_space(s));
    }, py::arg("field"), py::arg("space") = "U");
    m.def("inner", [](const SpectralField& f, const SpectralField& g, const std::string& s) {
        return inner(f, g, parse_space(s));
    }, py::arg("f"), py::arg("g"), py::arg("space") = "U");
    m.def("project_n", &project_n);
    m.def("tail_bound_check", &tail_bound_check);
    m.def("mu", &mu);
    m.def("leray_project", &leray_project);
    m.def("advection", &advection, py::arg("u"), py::arg("out_band") = -1);

    py::class_<OperatorPair>(m, "OperatorPair")
        .def_static(
            "salt_ns",
            [](double nu, int modes, double amplitude, double ratio) {
                return OperatorPair::salt_ns(
                    {nu, modes}, SaltCoefficients::default_library(modes, amplitude, ratio));
            },
            py::arg("nu") = 0.2, py::arg("noise_modes") = 4, py::arg("amplitude") = 0.4,
            py::arg("ratio") = 0.5)
        .def_static("heat", &OperatorPair::heat, py::arg("nu"),
                    py::arg("additive") = std::vector<SpectralField>{})
        .def_static("zero", &OperatorPair::zero)
        .def_static("additive_ou", &OperatorPair::additive_ou, py::arg("rate"),
                    py::arg("additive"))
        .def_property_readonly("kind", [](const OperatorPair& p) {
            return std::string(kind_name(p.kind()));
        })
        .def_property_readonly("noise_count", &OperatorPair::noise_count)
        .def(
            "drift",
            [](const OperatorPair& p, const SpectralField& u, int level, double t) {
                return p.drift(t, u, level);
            },
            py::arg("u"), py::arg("level") = -1, py::arg("t") = 0.0)
        .def(
            "noise_column",
            [](const OperatorPair& p, const SpectralField& u, int i, int level, double t) {
                return p.noise_column(t, u, i, level);
            },
            py::arg("u"), py::arg("i"), py::arg("level") = -1, py::arg("t") = 0.0);

    m.def(
        "simulate",
        [](const OperatorPair& pair, int level, double dt, double T, double M,
           std::uint64_t seed, const std::string& scheme, const std::string& initial,
           double amplitude, int band) {
            PathConfig pc;
            pc.level = level;
            pc.dt = dt;
            pc.T = T;
            pc.M = M;
            pc.seed = seed;
            if (scheme == "heun") {
                pc.scheme = Scheme::HeunStratonovich;
            } else if (scheme != "euler") {
                throw UsageError("scheme must be euler or heun");
            }
            if (initial == "zero") {
                pc.initial.kind = InitialKind::Zero;
            } else if (initial == "mode") {
                pc.initial.kind = InitialKind::Mode;
            } else if (initial != "random") {
                throw UsageError("initial must be zero, mode or random");
            }
            pc.initial.amplitude = amplitude;
            pc.initial.band = band;
            pc.record_increments = false;
            py::gil_scoped_release release;
            PathRecord rec = try_simulate_path(pc, pair);
            py::gil_scoped_acquire acquire;
            return record_dict(rec);
        },
        py::arg("pair"), py::arg("level") = 8, py::arg("dt") = 1e-3, py::arg("T") = 0.5,
        py::arg("M") = std::numeric_limits<double>::infinity(), py::arg("seed") = 0,
        py::arg("scheme") = "euler", py::arg("initial") = "random", py::arg("amplitude") = 1.0,
        py::arg("band") = 3);

    m.def("parse_config", [](const std::string& text) { return render_config(parse_config(text)); },
          "Validates config text and returns its canonical form.");
    m.def(
        "run_study",
        [](const std::string& command, const std::string& config_text) {
            const RunConfig c = parse_config(config_text);
            EstimateReport r;
            {
                py::gil_scoped_release release;
                r = run_study(command, c);
            }
            return report_dict(r);
        },
        py::arg("command"), py::arg("config") = "");
    m.def(
        "run",
        [](const std::string& command, const std::string& config_text,
           const std::filesystem::path& out_dir) {
            const RunConfig c = parse_config(config_text);
            RunManifest man;
            {
                py::gil_scoped_release release;
                man = run(command, c, out_dir);
            }
            py::list files;
            for (const auto& f : man.files) {
                files.append(py::dict(py::arg("file") = f.file, py::arg("sha256") = f.sha256,
                                      py::arg("bytes") = f.bytes));
            }
            py::dict d;
            d["command"] = man.command;
            d["version"] = man.version;
            d["seed"] = man.seed;
            d["pass"] = man.pass;
            d["files"] = files;
            d["errors"] = man.errors;
            return d;
        },
        py::arg("command"), py::arg("config"), py::arg("out_dir"));
    m.attr("__version__") = artifact_version();
}
