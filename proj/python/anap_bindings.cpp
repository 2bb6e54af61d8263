#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "anap/sim.hpp"

namespace py = pybind11;
using namespace anap;

namespace {

std::unique_ptr<sim::Simulator> make_simulator(const std::string& scenario_json, std::uint64_t seed) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(scenario_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ScenarioInvalid, std::string("scenario is not JSON: ") + e.what());
  }
  return std::make_unique<sim::Simulator>(sim::parse_scenario(j), seed);
}

std::vector<rep::Vote> to_votes(const std::vector<std::pair<double, double>>& ir_value) {
  std::vector<rep::Vote> out;
  NodeId voter = 1;
  for (const auto& [ir, v] : ir_value) out.push_back(rep::Vote{0, v, voter++, ir});
  return out;
}

py::dict audit_dict(const sim::AuditReport& r) {
  py::list violations;
  for (const auto& v : r.violations) {
    py::dict d;
    d["frame"] = v.index;
    d["t"] = v.t;
    d["sender"] = v.sender;
    d["type"] = v.type;
    d["secret_kind"] = v.secret_kind;
    d["owner"] = v.owner;
    d["offset"] = v.offset;
    violations.append(d);
  }
  py::dict out;
  out["frames"] = r.frames;
  out["lengths"] = std::vector<std::size_t>(r.lengths.begin(), r.lengths.end());
  out["violations"] = violations;
  out["ok"] = r.ok();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ANAP simulator core";

  // Raised for every anap::Error; `code` holds the error kind name.
  static PyObject* anap_error = PyErr_NewException("anap._core.AnapError", PyExc_RuntimeError, nullptr);
  m.attr("AnapError") = py::handle(anap_error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::reinterpret_borrow<py::object>(anap_error)(e.what());
      err.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(anap_error, err.ptr());
    }
  });

  m.def("update_own_experience", &rep::update_own_experience, py::arg("oe_old"), py::arg("st"), py::arg("rho"),
        py::arg("dt"));
  m.def(
      "update_service_reputation",
      [](double oe, const std::vector<std::pair<double, double>>& votes, double alpha) {
        return rep::update_service_reputation(oe, to_votes(votes), alpha);
      },
      py::arg("oe"), py::arg("votes"), py::arg("alpha"), "votes: list of (voter_ir, value)");
  m.def(
      "update_information_reputation",
      [](double oe, const std::vector<std::pair<double, double>>& votes, double beta, double gamma, double dt) {
        return rep::update_information_reputation(oe, to_votes(votes), beta, gamma, dt);
      },
      py::arg("oe"), py::arg("votes"), py::arg("beta"), py::arg("gamma"), py::arg("dt"),
      "votes: list of (voter_ir, value)");

  py::class_<sim::Simulator, std::unique_ptr<sim::Simulator>>(m, "Simulator")
      .def(py::init(&make_simulator), py::arg("scenario_json"), py::arg("seed") = 1)
      .def("run", &sim::Simulator::run)
      .def("run_until", &sim::Simulator::run_until, py::arg("t"))
      .def_property_readonly("now", &sim::Simulator::now)
      .def("node_names",
           [](const sim::Simulator& s) {
             std::vector<std::string> out;
             for (std::size_t i = 0; i < s.node_count(); ++i) out.push_back(s.name_of(static_cast<NodeId>(i)));
             return out;
           })
      .def("summary_json", [](const sim::Simulator& s, std::uint64_t seed) { return s.summary(seed).dump(); },
           py::arg("seed"))
      .def("trace_jsonl", &sim::Simulator::trace_jsonl)
      .def("reputation_tsv", &sim::Simulator::reputation_tsv)
      .def("audit", [](const sim::Simulator& s) { return audit_dict(s.metrics().audit); })
      .def(
          "reputation",
          [](sim::Simulator& s, const std::string& observer, const std::string& subject) {
            const auto r = s.node(observer).reputation().get(s.id_of(subject));
            return py::make_tuple(r.oe, r.sr, r.ir);
          },
          py::arg("observer"), py::arg("subject"), "(oe, sr, ir) held by observer about subject")
      .def("handshakes",
           [](const sim::Simulator& s) {
             py::list out;
             for (const auto& h : s.handshakes()) {
               py::dict d;
               d["t"] = h.t;
               d["initiator"] = s.name_of(h.initiator);
               d["responder"] = s.name_of(h.responder);
               d["dest"] = h.dest_alias;
               d["label"] = h.label;
               d["succeeded"] = s.handshake_succeeded(h);
               out.append(d);
             }
             return out;
           });
}
