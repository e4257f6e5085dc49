#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "symqp/bpdn.hpp"
#include "symqp/error.hpp"
#include "symqp/foqp.hpp"
#include "symqp/ground.hpp"
#include "symqp/ipm.hpp"
#include "symqp/mdp.hpp"
#include "symqp/qp.hpp"

namespace py = pybind11;
using namespace symqp;

namespace {

std::string option_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  return py::str(v).cast<std::string>();
}

SolveOptions options_from(const py::kwargs& kw) {
  SolveOptions o;
  for (const auto& [k, v] : kw) set_option(o, k.cast<std::string>() + "=" + option_text(v));
  return o;
}

SolveReport solve_qp(const QpStandard& qp, bool ground, const SolveOptions& o) {
  py::gil_scoped_release nogil;
  return ground ? ground_ipm_solve(ground_qp(qp), o) : ipm_solve(qp, o);
}

py::dict stats_dict(const QpStats& s) {
  py::dict d;
  d["vars"] = s.vars;
  d["constraints"] = s.constraints;
  d["nnz_a"] = s.nnz_a;
  d["nnz_q"] = s.nnz_q;
  d["add_nodes_a"] = s.add_nodes_a;
  d["add_nodes_q"] = s.add_nodes_q;
  d["add_nodes_total"] = s.add_nodes_total;
  d["rows"] = s.rows;
  d["cols"] = s.cols;
  return d;
}

}  // namespace

PYBIND11_MODULE(_symqp, m) {
  m.doc() = "Symbolic interior point solver for logical quadratic programs";

  auto base = py::register_exception<Error>(m, "SymqpError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<UnsupportedStructure>(m, "UnsupportedStructure", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<SolveReport>(m, "SolveReport")
      .def_property_readonly("status", [](const SolveReport& r) { return to_string(r.status); })
      .def_property_readonly("structure", [](const SolveReport& r) { return to_string(r.structure); })
      .def_property_readonly("normal_space", [](const SolveReport& r) { return to_string(r.normal_space); })
      .def_property_readonly("converged", &SolveReport::converged)
      .def_readonly("x", &SolveReport::x)
      .def_readonly("y", &SolveReport::y)
      .def_readonly("objective", &SolveReport::objective)
      .def_readonly("iterations", &SolveReport::iterations)
      .def_readonly("cg_total", &SolveReport::cg_total)
      .def_readonly("cg_cap_hits", &SolveReport::cg_cap_hits)
      .def_readonly("cg_per_iteration", &SolveReport::cg_per_iteration)
      .def_readonly("residual", &SolveReport::final_residual)
      .def_readonly("precond_k", &SolveReport::precond_k)
      .def_readonly("add_nodes_A", &SolveReport::add_nodes_A)
      .def_readonly("add_nodes_Q", &SolveReport::add_nodes_Q)
      .def_readonly("time_solve", &SolveReport::time_solve)
      .def_readonly("products", &SolveReport::products)
      .def_readonly("time_products", &SolveReport::time_products)
      .def("__repr__", [](const SolveReport& r) {
        return "<SolveReport " + std::string(to_string(r.status)) + " objective=" + std::to_string(r.objective) +
               " iterations=" + std::to_string(r.iterations) + ">";
      })
      .def("to_text", [](const SolveReport& r) { return to_text(r); });

  m.def(
      "solve",
      [](const std::string& source, bool ground, const py::kwargs& kw) {
        const SolveOptions o = options_from(kw);
        AddManager mgr;
        const QpStandard qp = compile(parse(source), mgr);
        return solve_qp(qp, ground, o);
      },
      py::arg("source"), py::arg("ground") = false,
      "Compile a model and solve it. Keyword arguments are solver settings, e.g. tol=1e-6, precond_k=50.");

  m.def(
      "stats",
      [](const std::string& source) {
        AddManager mgr;
        return stats_dict(stats(compile(parse(source), mgr)));
      },
      py::arg("source"), "Sizes of the compiled program without solving it.");

  m.def(
      "ground",
      [](const std::string& source) {
        const GroundProgram g = ground(parse(source));
        py::dict d;
        d["A"] = g.A;
        d["b"] = g.b;
        d["c"] = g.c;
        d["Q"] = g.Q;
        d["row_mask"] = g.row_mask;
        d["ge_mask"] = g.ge_mask;
        d["col_mask"] = g.col_mask;
        return d;
      },
      py::arg("source"), "Dense matrices of the enumerated program (small models only).");

  m.def(
      "mdp_source",
      [](int bits, int actions, double gamma, std::uint64_t seed, int replica_bits) {
        return mdp_source(make_factory_mdp(
            {.state_bits = bits, .actions = actions, .gamma = gamma, .seed = seed, .replica_bits = replica_bits}));
      },
      py::arg("bits"), py::arg("actions") = 4, py::arg("gamma") = 0.9, py::arg("seed") = 1,
      py::arg("replica_bits") = 0, "Value LP of a factory-like MDP as model source.");

  m.def(
      "value_iteration",
      [](int bits, int actions, double gamma, std::uint64_t seed, int replica_bits) {
        return value_iteration(make_factory_mdp(
            {.state_bits = bits, .actions = actions, .gamma = gamma, .seed = seed, .replica_bits = replica_bits}));
      },
      py::arg("bits"), py::arg("actions") = 4, py::arg("gamma") = 0.9, py::arg("seed") = 1,
      py::arg("replica_bits") = 0);

  py::class_<BpdnInstance>(m, "BpdnInstance")
      .def_readonly("log_n", &BpdnInstance::log_n)
      .def_readonly("log_m", &BpdnInstance::log_m)
      .def_readonly("tau", &BpdnInstance::tau)
      .def_readonly("rows", &BpdnInstance::rows)
      .def_readonly("x_true", &BpdnInstance::x_true)
      .def_readonly("b", &BpdnInstance::b)
      .def("objective", [](const BpdnInstance& inst, const std::vector<double>& x) { return bpdn_objective(inst, x); })
      .def("to_json", [](const BpdnInstance& inst) {
        std::ostringstream os;
        write_bpdn(os, inst);
        return os.str();
      });

  m.def(
      "make_bpdn",
      [](int log_n, int log_m, int k, double tau, std::uint64_t seed, const std::string& rows, double noise) {
        return make_bpdn({.log_n = log_n,
                          .log_m = log_m,
                          .k = k,
                          .tau = tau,
                          .seed = seed,
                          .selection = parse_row_selection(rows),
                          .noise = noise});
      },
      py::arg("log_n") = 12, py::arg("log_m") = 10, py::arg("k") = 50, py::arg("tau") = 1.0, py::arg("seed") = 1,
      py::arg("rows") = "random", py::arg("noise") = 0.0);

  m.def(
      "solve_bpdn",
      [](const BpdnInstance& inst, bool ground, const py::kwargs& kw) {
        const SolveOptions o = options_from(kw);
        AddManager mgr;
        const QpStandard qp = bpdn_qp(inst, mgr);
        SolveReport r = solve_qp(qp, ground, o);
        std::vector<double> x = bpdn_signal(inst, r.x);
        return py::make_tuple(std::move(x), std::move(r));
      },
      py::arg("instance"), py::arg("ground") = false, "Returns (signal, report).");
}
