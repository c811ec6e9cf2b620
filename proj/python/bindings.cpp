#include "elliptica/experiments.hpp"
#include "elliptica/harmonic.hpp"
#include "elliptica/stability.hpp"
#include "elliptica/variational.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace elliptica;

namespace {

Point to_point(const std::vector<double>& v) {
  Point p(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) p(static_cast<int>(i)) = v[i];
  return p;
}

py::tuple run_json(const std::string& config, std::optional<std::uint64_t> seed) {
  ExperimentOutput out;
  {
    py::gil_scoped_release release;
    out = run_experiment(parse_config(config), seed);
  }
  return py::make_tuple(out.report.dump(), out.files, out.elapsed_seconds);
}

std::string catalog_json() {
  Json list = Json::array();
  for (const auto& s : experiment_catalog())
    list.push_back({{"id", s.id},
                    {"reference", s.reference},
                    {"summary", s.summary},
                    {"stochastic", s.stochastic},
                    {"defaults", s.defaults}});
  return list.dump();
}

py::dict frequency(const std::string& sample, const std::vector<double>& center, const std::vector<double>& radii) {
  auto p = frequency_profile(harmonic_by_name(sample, static_cast<int>(center.size())), to_point(center), radii);
  py::dict d;
  d["r"] = p.r;
  d["H"] = p.H;
  d["D"] = p.D;
  d["K"] = p.K;
  d["N"] = p.N;
  return d;
}

double mean_value(const std::string& sample, const std::vector<double>& center, double r, const std::string& form) {
  if (form != "sphere" && form != "ball") throw Error(ErrorCode::InvalidArgument, "form is 'sphere' or 'ball'");
  return mean_value_residual(harmonic_by_name(sample, static_cast<int>(center.size())), to_point(center), r,
                             form == "sphere" ? MeanForm::sphere : MeanForm::ball);
}

std::vector<double> dirichlet_eigenvalues(const std::vector<double>& lo, const std::vector<double>& hi, double h, int k) {
  auto mesh = build_rect_mesh(Domain::rectangle(to_point(lo), to_point(hi)), h);
  auto sys = assemble(mesh, laplace(static_cast<int>(lo.size()), Form::divergence), {}, nullptr);
  auto spec = eigensolve(sys, k);
  return {spec.eigenvalues.data(), spec.eigenvalues.data() + spec.eigenvalues.size()};
}

py::dict fit(const std::vector<double>& deltas, const std::vector<double>& errors) {
  auto f = stability_fit(deltas, errors);
  py::dict d;
  d["C"] = f.C;
  d["beta"] = f.beta;
  d["residual"] = f.residual;
  d["power_C"] = f.power_C;
  d["power_exponent"] = f.power_exponent;
  d["power_residual"] = f.power_residual;
  d["log_beats_power"] = f.log_beats_power;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "elliptica C++ core";
  static py::exception<Error> exc(m, "EllipticaError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = exc;
      py::object inst = err(e.what());
      inst.attr("code") = error_name(e.code());
      PyErr_SetObject(exc.ptr(), inst.ptr());
    }
  });

  m.def("version", &version);
  m.def("catalog_json", &catalog_json);
  m.def("run_json", &run_json, py::arg("config"), py::arg("seed") = py::none());
  m.def("frequency", &frequency, py::arg("sample"), py::arg("center"), py::arg("radii"));
  m.def("mean_value_residual", &mean_value, py::arg("sample"), py::arg("center"), py::arg("r"),
        py::arg("form") = "sphere");
  m.def("dirichlet_eigenvalues", &dirichlet_eigenvalues, py::arg("lo"), py::arg("hi"), py::arg("h"), py::arg("k"));
  m.def("phi_beta", &phi_beta, py::arg("s"), py::arg("beta"));
  m.def("stability_fit", &fit, py::arg("deltas"), py::arg("errors"));
}
