// qkdrelay: scenario runner, topology validator and trace differ.
//
//   qkdrelay run --topology T --scenario S --seed N --trace-out F
//   qkdrelay validate --topology T
//   qkdrelay diff EXPECTED ACTUAL
//
// Exit status: 0 ok, 1 expectation or diff failure, 2 configuration error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qkdrelay/errors.hpp"
#include "qkdrelay/harness.hpp"
#include "qkdrelay/topology.hpp"
#include "qkdrelay/trace.hpp"

using namespace qkdrelay;

namespace {

int cmd_run(const std::string& topo_path, const std::string& scenario_path,
            std::optional<std::uint64_t> seed, const std::string& trace_out,
            const std::string& report_out, const std::string& policy,
            std::optional<SimTime> cache_ttl, bool canonical) {
  Scenario scenario;
  std::optional<Topology> topology;
  RunOverrides overrides;
  try {
    scenario = load_scenario(scenario_path);
    if (!topo_path.empty()) {
      topology = Topology::load_file(topo_path);
    } else if (scenario.topology) {
      topology = Topology::load_file(*scenario.topology);
    } else {
      std::cerr << "error: no topology given and the scenario names none\n";
      return 2;
    }
    overrides.seed = seed;
    overrides.cache_ttl = cache_ttl;
    if (!policy.empty()) overrides.policy = parse_weight_policy(policy);
  } catch (const ValidationError& e) {
    std::cerr << "error: invalid topology\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  RunResult result;
  try {
    result = run_scenario(scenario, *topology, overrides);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (!trace_out.empty()) {
    try {
      if (canonical) {
        std::ofstream out(trace_out, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write trace file " + trace_out);
        for (const auto& line : canonicalize_trace(encode_trace(result.trace))) out << line << '\n';
      } else {
        write_trace(trace_out, result.trace);
      }
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  if (!report_out.empty()) {
    std::ofstream out(report_out);
    out << result.report_json << "\n";
  }
  for (const auto& f : result.failures) std::cerr << "FAIL " << f << "\n";
  std::cout << (result.exit_code == 0 ? "ok" : "FAILED") << ": " << result.trace.size()
            << " records, " << result.failures.size() << " failures\n";
  return result.exit_code;
}

int cmd_validate(const std::string& topo_path) {
  try {
    const auto t = Topology::load_file(topo_path);
    std::cout << "ok: " << t.nodes().size() << " nodes, " << t.links().size() << " links, "
              << t.apps().size() << " apps, policy " << to_string(t.weight_policy()) << "\n";
    for (const auto& n : t.nodes()) std::cout << "  " << n.id << " " << to_string(n.role) << "\n";
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "invalid topology\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_diff(const std::string& expected, const std::string& actual) {
  try {
    const auto d = trace_compare_files(expected, actual);
    if (d.equal) {
      std::cout << "traces match\n";
      return 0;
    }
    std::cout << d.describe() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QKD trusted-relay key management simulator"};
  app.require_subcommand(1);

  std::string topo, scenario_path, trace_out, report_out, policy;
  std::optional<std::uint64_t> seed;
  std::optional<SimTime> cache_ttl;
  auto* run = app.add_subcommand("run", "run a scenario to quiescence");
  run->add_option("--topology", topo, "topology file (defaults to the scenario's)");
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--seed", seed, "RNG seed");
  run->add_option("--trace-out", trace_out, "write the JSON-lines transport trace here");
  bool canonical = false;
  run->add_flag("--canonical", canonical, "write the trace with run-specific ids renumbered");
  run->add_option("--report-out", report_out, "write the final JSON report here");
  run->add_option("--weight-policy", policy, "override the topology weight policy")
      ->check(CLI::IsMember({"hop_count", "inverse_key_rate", "distance"}));
  run->add_option("--cache-ttl", cache_ttl, "vKMS discovery cache TTL in ms (0 disables)")
      ->check(CLI::NonNegativeNumber);

  std::string validate_topo;
  auto* validate = app.add_subcommand("validate", "validate a topology file");
  validate->add_option("--topology", validate_topo, "topology file")->required();

  std::string expected, actual;
  auto* diff = app.add_subcommand("diff", "compare two traces after canonicalization");
  diff->add_option("expected", expected)->required();
  diff->add_option("actual", actual)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*run) return cmd_run(topo, scenario_path, seed, trace_out, report_out, policy, cache_ttl,
                               canonical);
  if (*validate) return cmd_validate(validate_topo);
  if (*diff) return cmd_diff(expected, actual);
  return 2;
}
