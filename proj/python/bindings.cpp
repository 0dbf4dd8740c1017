#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gsfde/harness.hpp"
#include "gsfde/parallel.hpp"

namespace py = pybind11;
using namespace gsfde;

namespace {

py::array_t<double> as_array(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::array_t<double> as_matrix(const std::vector<double>& v, std::size_t cols) {
    const auto rows = static_cast<py::ssize_t>(cols ? v.size() / cols : 0);
    py::array_t<double> out({rows, static_cast<py::ssize_t>(cols)});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict verdict_dict(const Verdict& v) {
    py::list rows;
    for (const auto& r : v.rows) {
        py::dict d;
        d["t"] = r.t;
        d["empirical"] = r.empirical;
        d["standard_error"] = r.standard_error;
        d["bound"] = r.bound;
        d["pass"] = r.pass;
        d["label"] = r.label;
        rows.append(d);
    }
    py::dict out;
    out["name"] = v.name;
    out["status"] = v.status_text();
    out["passed"] = v.passed();
    out["rows"] = rows;
    out["notes"] = v.notes;
    return out;
}

py::dict record_dict(const TrajectoryRecord& r) {
    py::dict d;
    d["times"] = as_array(r.times);
    d["states"] = as_matrix(r.states, r.dim);
    d["segment_norms"] = as_array(r.segment_norms);
    d["running_max"] = as_array(r.running_max);
    d["max_abs"] = r.max_abs;
    d["exit_time"] = r.exit_time ? py::cast(*r.exit_time) : py::none();
    d["seed"] = r.seed;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Monte Carlo and bound checks for delay equations driven by G-Brownian motion";

    static py::exception<Error> error(m, "GsfdeError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error.ptr(), e.what());
        }
    });

    m.def("set_threads", [](std::size_t n) { parallel_workers() = n; }, py::arg("n"),
          "Worker threads for the Monte Carlo loops (0: all cores).");

    py::class_<DelayMeasure>(m, "DelayMeasure")
        .def(py::init([](const std::vector<std::pair<double, double>>& atoms,
                         const std::vector<std::pair<double, double>>& densities, const std::string& name) {
                 std::vector<Atom> a;
                 for (auto [d, w] : atoms) a.push_back({d, w});
                 std::vector<ExpDensity> e;
                 for (auto [r, w] : densities) e.push_back({r, w});
                 return DelayMeasure(std::move(a), std::move(e), name);
             }),
             py::arg("atoms") = std::vector<std::pair<double, double>>{},
             py::arg("densities") = std::vector<std::pair<double, double>>{}, py::arg("name") = "")
        .def_static("point_mass", &DelayMeasure::point_mass, py::arg("delay"), py::arg("name") = "")
        .def_static("exponential", &DelayMeasure::exponential, py::arg("rate"), py::arg("name") = "")
        .def("in_class", &DelayMeasure::in_class)
        .def("moment", [](const DelayMeasure& mu, double order) { return moment(mu, order); })
        .def_property_readonly("name", &DelayMeasure::name);

    py::class_<InitialData>(m, "InitialData")
        .def_static("constant", &InitialData::constant)
        .def_static("exponential_decay", &InitialData::exponential_decay);

    m.def(
        "initial_norm",
        [](const InitialData& d, double q, std::size_t dim, double dt) {
            return segment_norm(from_initial_data(d, q, dim, dt));
        },
        py::arg("data"), py::arg("q"), py::arg("dim") = 1, py::arg("dt") = 1e-3,
        "||zeta||_q of parametric initial data.");

    m.def(
        "integrate",
        [](const DelayMeasure& mu, const InitialData& d, double q, std::size_t dim, double dt, double power) {
            const auto seg = from_initial_data(d, q, dim, dt);
            if (power == 1.0) return py::cast(integrate_segment(mu, seg));
            return py::cast(integrate_segment_power(mu, seg, power));
        },
        py::arg("mu"), py::arg("data"), py::arg("q"), py::arg("dim") = 1, py::arg("dt") = 1e-3,
        py::arg("power") = 1.0);

    py::class_<LinearParams>(m, "LinearParams")
        .def(py::init<>())
        .def_readwrite("dim", &LinearParams::dim)
        .def_readwrite("a_g", &LinearParams::a_g)
        .def_readwrite("b_g", &LinearParams::b_g)
        .def_readwrite("a_h", &LinearParams::a_h)
        .def_readwrite("b_h", &LinearParams::b_h)
        .def_readwrite("a_gamma", &LinearParams::a_gamma)
        .def_readwrite("b_gamma", &LinearParams::b_gamma)
        .def_readwrite("c_g", &LinearParams::c_g)
        .def_readwrite("c_h", &LinearParams::c_h)
        .def_readwrite("c_gamma", &LinearParams::c_gamma)
        .def_readwrite("mu_g", &LinearParams::mu_g)
        .def_readwrite("mu_h", &LinearParams::mu_h)
        .def_readwrite("mu_gamma", &LinearParams::mu_gamma);

    py::class_<A1Certificate>(m, "A1Certificate")
        .def_readonly("lambda1", &A1Certificate::lambda1)
        .def_readonly("lambda2", &A1Certificate::lambda2)
        .def_readonly("lambda3", &A1Certificate::lambda3)
        .def_readonly("lambda4", &A1Certificate::lambda4)
        .def_readonly("lambda5", &A1Certificate::lambda5);

    py::class_<CoefficientSet>(m, "CoefficientSet")
        .def_readonly("dim", &CoefficientSet::dim)
        .def_readwrite("certificate", &CoefficientSet::certificate);

    m.def("build_linear_set", &build_linear_set, py::arg("params"));
    m.def(
        "verify_a1",
        [](const CoefficientSet& set, double q, double dt, std::size_t trials, std::uint64_t seed) {
            const auto r = verify_a1(set, q, dt, trials, seed);
            py::dict d;
            d["max_c1"] = r.max_c1;
            d["max_c2"] = r.max_c2;
            d["max_c3"] = r.max_c3;
            d["pass"] = r.pass;
            return d;
        },
        py::arg("set"), py::arg("q") = 1.0, py::arg("dt") = 1e-2, py::arg("trials") = 1000, py::arg("seed") = 1);

    py::class_<Scenario>(m, "Scenario")
        .def_static(
            "constant",
            [](double lo, double hi, double sigma) {
                return Scenario("constant", VolatilityBand(lo, hi), Control::constant(sigma));
            },
            py::arg("sigma_lo"), py::arg("sigma_hi"), py::arg("sigma"))
        .def_static(
            "random",
            [](double lo, double hi) { return Scenario("random", VolatilityBand(lo, hi), Control::random()); },
            py::arg("sigma_lo"), py::arg("sigma_hi"))
        .def_property_readonly("name", &Scenario::name);

    m.def(
        "sample_path",
        [](const Scenario& s, double horizon, double dt, std::uint64_t seed) {
            const auto p = sample_path(s, Mesh::from_horizon(horizon, dt), seed);
            py::dict d;
            d["B"] = as_array(p.B);
            d["qv"] = as_array(p.qv);
            d["sigma"] = as_array(p.sigma);
            return d;
        },
        py::arg("scenario"), py::arg("horizon") = 1.0, py::arg("dt") = 1e-3, py::arg("seed") = 0);

    m.def(
        "simulate",
        [](const CoefficientSet& set, const InitialData& init, const Scenario& scenario, double horizon, double dt,
           double q, std::size_t stride, std::uint64_t seed, std::optional<double> exit_level) {
            SimConfig c;
            c.horizon = horizon;
            c.dt = dt;
            c.q = q;
            c.dim = set.dim;
            c.coefficients = set;
            c.initial = init;
            c.record_stride = stride;
            c.exit_level = exit_level;
            return record_dict(simulate(c, scenario, seed));
        },
        py::arg("set"), py::arg("initial"), py::arg("scenario"), py::arg("horizon") = 1.0, py::arg("dt") = 1e-3,
        py::arg("q") = 1.0, py::arg("stride") = 1, py::arg("seed") = 0, py::arg("exit_level") = py::none());

    py::class_<Config>(m, "Config")
        .def_readwrite("q", &Config::q)
        .def_readwrite("dt", &Config::dt)
        .def_readwrite("horizon", &Config::horizon)
        .def_readwrite("params", &Config::params)
        .def_property(
            "seed", [](const Config& c) { return c.experiments.seed; },
            [](Config& c, std::uint64_t s) { c.experiments.seed = s; })
        .def_property(
            "paths", [](const Config& c) { return c.experiments.paths; },
            [](Config& c, std::size_t n) { c.experiments.paths = n; })
        .def_property(
            "checkpoints", [](const Config& c) { return c.experiments.checkpoints; },
            [](Config& c, std::vector<double> v) { c.experiments.checkpoints = std::move(v); })
        .def_readonly("source", &Config::source);

    m.def("default_config", &default_config);
    m.def("parse_config", &parse_config, py::arg("text"), py::arg("source") = "<string>");
    m.def("load_config", [](const std::string& p) { return load_config(p); }, py::arg("path"));
    m.def("experiment_names", &experiment_names);

    py::class_<ExperimentSession>(m, "ExperimentSession")
        .def(py::init<Config>())
        .def("feasible", &ExperimentSession::feasible)
        .def("violations", &ExperimentSession::violations)
        .def("bounds_text", [](const ExperimentSession& s) { return s.bounds().text(); })
        .def(
            "constants",
            [](const ExperimentSession& s) {
                const BoundReport& r = s.bounds();
                py::dict d;
                d["K1"] = r.global.K1;
                d["K2"] = r.global.K2;
                d["K3"] = r.global.K3;
                d["K4"] = r.mean_square.K4;
                d["K5"] = r.mean_square.K5;
                d["K6"] = r.K6;
                d["K7"] = r.map_bound.K7;
                d["K8"] = r.map_bound.K8;
                d["K9"] = r.K9;
                d["K_hat"] = r.growth.K_hat;
                d["L1"] = r.growth.L1;
                d["L2"] = r.growth.L2;
                d["M"] = r.growth.M;
                d["lambda_mean_square"] = r.lambda_mean_square;
                d["lambda_map_bound"] = r.lambda_map_bound;
                d["lambda_map_convergence"] = r.lambda_map_convergence;
                return d;
            })
        .def(
            "run",
            [](ExperimentSession& s, const std::string& name) {
                Verdict v;
                {
                    py::gil_scoped_release release;
                    v = s.run(name);
                }
                return verdict_dict(v);
            },
            py::arg("name"))
        .def(
            "write_outputs",
            [](ExperimentSession& s, const std::string& dir, const std::vector<std::string>& names) {
                py::gil_scoped_release release;
                std::vector<Verdict> vs;
                for (const auto& n : names) {
                    vs.push_back(s.run(n));  // sweeps are cached, so repeats are cheap
                }
                write_outputs(dir, s, vs);
            },
            py::arg("dir"), py::arg("names"));
}
