#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "palab/checks.hpp"
#include "palab/cli.hpp"
#include "palab/contract.hpp"
#include "palab/default_time.hpp"
#include "palab/errors.hpp"
#include "palab/hjb.hpp"
#include "palab/market.hpp"
#include "palab/monte_carlo.hpp"

namespace py = pybind11;
using namespace palab;

namespace {

py::array_t<double> grid_array(const ValueGrid& v) {
    const auto& s = v.spec;
    py::array_t<double> out({s.nt, s.nx, s.ny});
    std::copy(v.values.begin(), v.values.end(), out.mutable_data());
    return out;
}

py::dict policy_arrays(const PolicyGrid& p) {
    const auto& s = p.spec;
    py::array_t<double> z({s.nt, s.nx, s.ny}), z_x({s.nt, s.nx, s.ny}), g({s.nt, s.nx, s.ny}),
        g_x({s.nt, s.nx, s.ny}), u({s.nt, s.nx, s.ny});
    for (std::size_t n = 0; n < p.controls.size(); ++n) {
        const ScalarControls& c = p.controls[n];
        z.mutable_data()[n] = c.z;
        z_x.mutable_data()[n] = c.z_x;
        g.mutable_data()[n] = c.g;
        g_x.mutable_data()[n] = c.g_x;
        u.mutable_data()[n] = c.u;
    }
    py::dict d;
    d["z"] = z;
    d["z_x"] = z_x;
    d["g"] = g;
    d["g_x"] = g_x;
    d["u"] = u;
    return d;
}

py::dict series(const SeriesStats& s) {
    py::dict d;
    d["mean"] = s.mean;
    d["se"] = s.se;
    return d;
}

py::dict aggregates(const Aggregates& a) {
    py::dict d;
    d["wealth"] = series(a.wealth);
    d["strategy"] = series(a.strategy);
    d["Y"] = series(a.Y);
    d["u"] = series(a.u);
    d["z_x"] = series(a.z_x);
    d["g_x"] = series(a.g_x);
    d["alive_frac"] = a.alive_frac;
    d["count"] = a.count;
    return d;
}

}  // namespace

PYBIND11_MODULE(palab, m) {
    m.doc() = "Principal-agent contracts with exogenous default";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<EllipticityError>(m, "EllipticityError", base.ptr());
    py::register_exception<AdmissibilityError>(m, "AdmissibilityError", base.ptr());
    py::register_exception<StepSizeError>(m, "StepSizeError", base.ptr());

    py::class_<MarketParams>(m, "MarketParams")
        .def(py::init<>())
        .def_static("scalar", &MarketParams::scalar, py::arg("b"), py::arg("sigma"), py::arg("x0") = 5.0,
                    py::arg("alpha") = 0.0, py::arg("eta") = 1.0, py::arg("c_lo") = 0.0, py::arg("c_hi") = 1.0)
        .def_readwrite("b", &MarketParams::b)
        .def_readwrite("sigma", &MarketParams::sigma)
        .def_readwrite("x0", &MarketParams::x0)
        .def_readwrite("alpha", &MarketParams::alpha)
        .def_readwrite("eta", &MarketParams::eta)
        .def_readwrite("c_lo", &MarketParams::c_lo)
        .def_readwrite("c_hi", &MarketParams::c_hi)
        .def("covariance", &MarketParams::covariance)
        .def("validate", &MarketParams::validate);
    m.def("risk_premium", &risk_premium);

    py::class_<DefaultModel>(m, "DefaultModel")
        .def_static("beta", &DefaultModel::beta, py::arg("a"), py::arg("b"), py::arg("horizon") = 1.0,
                    py::arg("hazard_cap") = DefaultModel::kDefaultHazardCap)
        .def_static("uniform", &DefaultModel::uniform, py::arg("horizon") = 1.0,
                    py::arg("hazard_cap") = DefaultModel::kDefaultHazardCap)
        .def_static("exponential", &DefaultModel::exponential, py::arg("rate"), py::arg("horizon") = 1.0,
                    py::arg("hazard_cap") = DefaultModel::kDefaultHazardCap)
        .def_static("none", &DefaultModel::none, py::arg("horizon") = 1.0)
        .def_property_readonly("horizon", &DefaultModel::horizon)
        .def_property_readonly("is_bounded", &DefaultModel::is_bounded)
        .def("pdf", py::vectorize(&DefaultModel::pdf))
        .def("cdf", py::vectorize(&DefaultModel::cdf))
        .def("survival", py::vectorize(&DefaultModel::survival))
        .def("hazard", py::vectorize(&DefaultModel::hazard))
        .def("cumulative_hazard", py::vectorize(&DefaultModel::cumulative_hazard))
        .def("mean", &DefaultModel::mean)
        .def("label", &DefaultModel::label)
        .def("__repr__", [](const DefaultModel& d) { return "DefaultModel(" + d.label() + ")"; });

    py::class_<ControlTuple>(m, "ControlTuple")
        .def_static("scalar", &ControlTuple::scalar, py::arg("z"), py::arg("z_x"), py::arg("g"), py::arg("g_x"),
                    py::arg("u"))
        .def_static("zeros", &ControlTuple::zeros)
        .def_readwrite("z", &ControlTuple::z)
        .def_readwrite("z_x", &ControlTuple::z_x)
        .def_readwrite("g", &ControlTuple::g)
        .def_readwrite("g_x", &ControlTuple::g_x)
        .def_readwrite("u", &ControlTuple::u);

    m.def("q_norm", &q_norm);
    m.def("q_dist", &q_dist);
    m.def("is_admissible", &is_admissible, py::arg("market"), py::arg("controls"), py::arg("margin") = kPdMargin);
    m.def("agent_strategy", &agent_strategy);
    m.def("unconstrained_strategy", &unconstrained_strategy);
    m.def("raw_f", &raw_f);
    m.def("generator_F", &generator_F);
    m.def("reservation_y0", &reservation_y0);

    py::enum_<PdeCase>(m, "PdeCase").value("Bounded", PdeCase::Bounded).value("Unbounded", PdeCase::Unbounded);
    py::enum_<ContractClass>(m, "ContractClass")
        .value("General", ContractClass::General)
        .value("Linear", ContractClass::Linear)
        .value("NoS", ContractClass::NoS);
    m.def("terminal_condition", &terminal_condition);

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("nt", &GridSpec::nt)
        .def_readwrite("nx", &GridSpec::nx)
        .def_readwrite("ny", &GridSpec::ny)
        .def_readwrite("t_max", &GridSpec::t_max)
        .def_readwrite("x_min", &GridSpec::x_min)
        .def_readwrite("x_max", &GridSpec::x_max)
        .def_readwrite("y_min", &GridSpec::y_min)
        .def_readwrite("y_max", &GridSpec::y_max);

    py::class_<ControlRange>(m, "ControlRange")
        .def(py::init<double, double, std::size_t>(), py::arg("lo"), py::arg("hi"), py::arg("points"))
        .def_readwrite("lo", &ControlRange::lo)
        .def_readwrite("hi", &ControlRange::hi)
        .def_readwrite("points", &ControlRange::points);

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("max_iter", &SolverConfig::max_iter)
        .def_readwrite("tol", &SolverConfig::tol)
        .def_readwrite("z", &SolverConfig::z)
        .def_readwrite("z_x", &SolverConfig::z_x)
        .def_readwrite("g", &SolverConfig::g)
        .def_readwrite("g_x", &SolverConfig::g_x)
        .def_readwrite("u", &SolverConfig::u)
        .def_readwrite("refine_levels", &SolverConfig::refine_levels)
        .def_readwrite("contract_class", &SolverConfig::contract_class)
        .def_readwrite("linear_p", &SolverConfig::linear_p)
        .def_readwrite("include_jumps", &SolverConfig::include_jumps);

    py::class_<SolveResult>(m, "SolveResult")
        .def_property_readonly("value", [](const SolveResult& r) { return grid_array(r.value); })
        .def_property_readonly("policy", [](const SolveResult& r) { return policy_arrays(r.policy); })
        .def_property_readonly("converged", [](const SolveResult& r) { return r.diagnostics.converged; })
        .def_property_readonly("iterations", [](const SolveResult& r) { return r.diagnostics.iterations; })
        .def_property_readonly("value_changes", [](const SolveResult& r) { return r.diagnostics.value_changes; })
        .def("interpolate", [](const SolveResult& r, double t, double x, double y) {
            return r.value.interpolate(t, x, y);
        })
        .def("principal_value", [](const SolveResult& r, const MarketParams& p, double R) {
            return principal_value(r.value, p, R);
        });

    m.def(
        "solve",
        [](const MarketParams& p, const DefaultModel& d, const GridSpec& g, const SolverConfig& cfg, PdeCase c) {
            py::gil_scoped_release release;
            return actor_critic(p, d, g, cfg, c);
        },
        py::arg("market"), py::arg("default_model"), py::arg("grid"), py::arg("solver") = SolverConfig{},
        py::arg("pde_case") = PdeCase::Bounded);

    py::enum_<FreezeMode>(m, "FreezeMode")
        .value("CarryLast", FreezeMode::CarryLast)
        .value("AliveOnly", FreezeMode::AliveOnly)
        .value("Both", FreezeMode::Both);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("n_paths", &SimConfig::n_paths)
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("freeze_mode", &SimConfig::freeze_mode)
        .def_readwrite("R", &SimConfig::R)
        .def_readwrite("forced_strategy", &SimConfig::forced_strategy);

    m.def(
        "simulate",
        [](const MarketParams& p, const DefaultModel& d, const SolveResult& sol, const SimConfig& cfg,
           const SolverConfig& solver) {
            PathEnsemble e;
            {
                py::gil_scoped_release release;
                e = simulate(p, d, sol.policy, sol.value, cfg, solver);
            }
            py::dict out;
            out["times"] = e.times;
            out["carry_last"] = aggregates(e.carry_last);
            out["alive_only"] = aggregates(e.alive_only);
            out["utility_mean"] = e.utility_mean;
            out["utility_se"] = e.utility_se;
            out["Y0"] = e.Y0;
            out["defaults"] = e.diagnostics.defaults;
            return out;
        },
        py::arg("market"), py::arg("default_model"), py::arg("solution"), py::arg("sim") = SimConfig{},
        py::arg("solver") = SolverConfig{});

    py::class_<CheckResult>(m, "CheckResult")
        .def_readonly("name", &CheckResult::name)
        .def_readonly("passed", &CheckResult::passed)
        .def_readonly("detail", &CheckResult::detail);
    m.def("check_hazard_identity", &check_hazard_identity, py::arg("horizon") = 1.0);
    m.def("check_strategy_oracle", &check_strategy_oracle, py::arg("n") = 1000, py::arg("seed") = 2024);

    m.def(
        "run_experiments",
        [](const std::string& scenario, const std::filesystem::path& out, const std::optional<std::filesystem::path>& config) {
            py::gil_scoped_release release;
            return cmd_experiments(scenario, out, config);
        },
        py::arg("scenario"), py::arg("out"), py::arg("config") = std::nullopt);
}
