#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qkdrelay/errors.hpp"
#include "qkdrelay/harness.hpp"
#include "qkdrelay/protocol.hpp"
#include "qkdrelay/qusec.hpp"
#include "qkdrelay/topology.hpp"
#include "qkdrelay/trace.hpp"

namespace py = pybind11;
using namespace qkdrelay;

namespace {

WeightPolicy policy_arg(const std::optional<std::string>& name, const Topology& t) {
  if (!name) return t.weight_policy();
  auto p = parse_weight_policy(*name);
  if (!p) throw py::value_error("unknown weight policy: " + *name);
  return *p;
}

Octets to_octets(const py::bytes& b) {
  const std::string s = b;
  return Octets(s.begin(), s.end());
}

py::dict run(const std::filesystem::path& scenario_path,
             const std::optional<std::filesystem::path>& topology_path,
             std::optional<std::uint64_t> seed, const std::optional<std::string>& policy,
             std::optional<SimTime> cache_ttl) {
  const auto scenario = load_scenario(scenario_path);
  const auto topo_file = topology_path ? topology_path : scenario.topology;
  if (!topo_file) throw ParseError("no topology given and the scenario names none");
  const auto topology = Topology::load_file(*topo_file);

  RunOverrides overrides;
  overrides.seed = seed;
  overrides.cache_ttl = cache_ttl;
  if (policy) overrides.policy = policy_arg(policy, topology);

  RunResult r;
  {
    py::gil_scoped_release release;
    r = run_scenario(scenario, topology, overrides);
  }
  py::dict out;
  out["exit_code"] = r.exit_code;
  out["failures"] = r.failures;
  out["invariant_violations"] = r.invariant_violations;
  out["trace"] = encode_trace(r.trace);
  out["report"] = r.report_json;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "QKD trusted-relay key management simulator";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<UnknownApp>(m, "UnknownApp", base.ptr());
  py::register_exception<CodecError>(m, "CodecError", base.ptr());
  // ValidationError carries its violation list; translate by hand.
  static PyObject* validation =
      py::exception<ValidationError>(m, "ValidationError", base.ptr()).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(validation)(e.what());
      exc.attr("violations") = py::cast(e.violations());
      PyErr_SetObject(validation, exc.ptr());
    }
  });

  py::class_<Topology>(m, "Topology")
      .def_property_readonly("nodes",
                             [](const Topology& t) {
                               std::vector<std::string> ids;
                               for (const auto& n : t.nodes()) ids.push_back(n.id);
                               return ids;
                             })
      .def_property_readonly("links",
                             [](const Topology& t) {
                               std::vector<std::string> ids;
                               for (const auto& l : t.links()) ids.push_back(l.id);
                               return ids;
                             })
      .def_property_readonly("apps", &Topology::apps)
      .def_property_readonly("weight_policy",
                             [](const Topology& t) { return std::string(to_string(t.weight_policy())); })
      .def("role", [](const Topology& t, const std::string& node) {
        return std::string(to_string(t.node(node).role));
      })
      .def("kms_names",
           [](const Topology& t) {
             std::vector<std::string> out;
             for (const auto& k : t.all_kms()) out.push_back(k.name());
             return out;
           })
      .def("resolve_app", [](const Topology& t, const std::string& app) { return t.resolve_app(app); })
      .def("serialize", &Topology::serialize)
      .def("__eq__", &Topology::operator==);

  m.def("load_topology", [](const std::string& text) { return Topology::load(text); }, py::arg("text"));
  m.def(
      "validate_topology",
      [](const std::string& text) -> std::vector<std::string> {
        try {
          Topology::load(text);
          return {};
        } catch (const ValidationError& e) {
          return e.violations();
        }
      },
      py::arg("text"), "Violations found in a topology document; empty when valid.");

  m.def(
      "compute_relay_path",
      [](const Topology& t, const std::string& src, const std::string& dst,
         const std::optional<std::string>& policy) {
        const auto path = compute_relay_path(t, src, dst, policy_arg(policy, t));
        py::dict d;
        d["nodes"] = path.nodes;
        d["links"] = path.links;
        d["cost"] = path.cost;
        d["kms"] = path.kms_names();
        return d;
      },
      py::arg("topology"), py::arg("src"), py::arg("dst"), py::arg("policy") = py::none());

  m.def(
      "otp_xor",
      [](const py::bytes& a, const py::bytes& b) {
        const auto out = otp_xor(to_octets(a), to_octets(b));
        return py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
      },
      py::arg("a"), py::arg("b"));

  m.def("recode", [](const std::string& line) { return encode(decode(line)); }, py::arg("line"),
        "Decode one wire envelope and encode it again.");

  m.def("canonicalize_trace", &canonicalize_trace, py::arg("lines"));
  m.def(
      "trace_compare",
      [](const std::vector<std::string>& expected, const std::vector<std::string>& actual) {
        const auto d = trace_compare(expected, actual);
        py::dict out;
        out["equal"] = d.equal;
        out["index"] = d.index;
        out["expected"] = d.expected;
        out["actual"] = d.actual;
        return out;
      },
      py::arg("expected"), py::arg("actual"));

  m.def("run_scenario", &run, py::arg("scenario"), py::arg("topology") = py::none(),
        py::arg("seed") = py::none(), py::arg("policy") = py::none(),
        py::arg("cache_ttl") = py::none());
}
