#include <optional>
#include <stdexcept>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dcc/error.hpp"
#include "dcc/scenario.hpp"

namespace py = pybind11;

namespace {

py::dict obs_dict(const dcc::Observations& o) {
  py::dict d;
  d["top"] = o.top;
  d["low"] = o.low;
  d["cooling"] = o.cooling;
  return d;
}

class PyEnv {
 public:
  PyEnv(const std::filesystem::path& scenario, std::uint64_t seed)
      : scenario_(dcc::load_scenario(scenario)), env_(scenario_.make_env()) {
    initial_ = env_.reset(seed);
  }

  py::dict reset(std::uint64_t seed) { return obs_dict(live().reset(seed)); }

  py::tuple step(std::vector<double> top, std::vector<std::vector<double>> low,
                 std::vector<std::vector<double>> cooling) {
    auto& env = live();
    const auto& dims = env.dims();
    if (!top.empty() && top.size() != dims.top_act) throw dcc::DomainError("top action length mismatch");
    auto check = [&](const auto& per_dc, std::size_t width, const char* level) {
      if (!per_dc.empty() && per_dc.size() != dims.n_dcs) {
        throw dcc::DomainError(std::string(level) + " action count mismatch");
      }
      for (const auto& a : per_dc) {
        if (!a.empty() && a.size() != width) throw dcc::DomainError(std::string(level) + " action length mismatch");
      }
    };
    check(low, dims.low_act, "low");
    check(cooling, dims.cooling_act, "cooling");
    const auto s = env.step({std::move(top), std::move(low), std::move(cooling)});
    py::dict rewards;
    rewards["top"] = s.rewards.top;
    rewards["low"] = s.rewards.low;
    rewards["cooling"] = s.rewards.cooling;
    py::dict info;
    info["t"] = s.info.t;
    info["total_co2_kg"] = s.info.total_co2_kg;
    info["cumulative_co2_kg"] = env.state().ledger.total_co2_kg();
    info["top_latched"] = s.top_latched;
    std::vector<double> energy, sla;
    for (const auto& d : s.info.dcs) {
      energy.push_back(d.energy_kwh());
      sla.push_back(d.sla_units);
    }
    info["energy_kwh"] = energy;
    info["sla_units"] = sla;
    return py::make_tuple(obs_dict(s.obs), rewards, s.done, info);
  }

  void close() { closed_ = true; }

  py::dict dims() const {
    const auto& d = env_.dims();
    py::dict out;
    out["n_dcs"] = d.n_dcs;
    out["top_obs"] = d.top_obs;
    out["top_act"] = d.top_act;
    out["low_obs"] = d.low_obs;
    out["low_act"] = d.low_act;
    out["cooling_obs"] = d.cooling_obs;
    out["cooling_act"] = d.cooling_act;
    return out;
  }

  const std::string& name() const { return scenario_.name; }
  double reward_scale() const { return env_.reward_scale(); }
  double cumulative_co2_kg() const { return env_.state().ledger.total_co2_kg(); }
  bool done() const { return env_.done(); }
  py::dict initial_obs() const { return obs_dict(initial_); }

 private:
  dcc::HierEnv& live() {
    if (closed_) throw std::runtime_error("environment handle is closed");
    return env_;
  }

  dcc::Scenario scenario_;
  dcc::HierEnv env_;
  dcc::Observations initial_;
  bool closed_ = false;
};

}  // namespace

PYBIND11_MODULE(dcc_env, m) {
  m.doc() = "Hierarchical data center cluster environment";
  m.attr("API_VERSION") = "dcc_env_v1";

  py::register_exception<dcc::Error>(m, "DccError", PyExc_ValueError);

  py::class_<PyEnv>(m, "Env")
      .def("reset", &PyEnv::reset, py::arg("seed"))
      .def("step", &PyEnv::step, py::arg("top") = std::vector<double>{},
           py::arg("low") = std::vector<std::vector<double>>{},
           py::arg("cooling") = std::vector<std::vector<double>>{},
           "Returns (obs, rewards, done, info). Empty actions select the level defaults.")
      .def("close", &PyEnv::close)
      .def_property_readonly("dims", &PyEnv::dims)
      .def_property_readonly("name", &PyEnv::name)
      .def_property_readonly("reward_scale", &PyEnv::reward_scale)
      .def_property_readonly("cumulative_co2_kg", &PyEnv::cumulative_co2_kg)
      .def_property_readonly("done", &PyEnv::done)
      .def_property_readonly("initial_obs", &PyEnv::initial_obs);

  m.def("make_env", [](const std::filesystem::path& p, std::uint64_t seed) { return PyEnv(p, seed); },
        py::arg("scenario"), py::arg("seed") = 1);
}
