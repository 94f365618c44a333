#include "qkdrelay/harness.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

using nlohmann::json;

namespace {

void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) throw ParseError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return get<T>(obj, key, where);
}

ScenarioEvent parse_event(const json& e, std::size_t index) {
  const std::string where = "event " + std::to_string(index);
  ScenarioEvent ev;
  ev.at = get<SimTime>(e, "at", where);
  if (ev.at < 0) throw ParseError(where + ": negative time");
  const auto kind = get<std::string>(e, "event", where);
  if (kind == "app_get_key") {
    only_keys(e, {"at", "event", "app", "peer"}, where);
    ev.kind = ScenarioEvent::Kind::app_get_key;
    ev.app = get<std::string>(e, "app", where);
    ev.peer = get<std::string>(e, "peer", where);
  } else if (kind == "app_get_key_with_id") {
    only_keys(e, {"at", "event", "app", "peer", "key_id"}, where);
    ev.kind = ScenarioEvent::Kind::app_get_key_with_id;
    ev.app = get<std::string>(e, "app", where);
    ev.peer = get<std::string>(e, "peer", where);
    ev.key_id = get_opt<std::string>(e, "key_id", where);
  } else if (kind == "tick_links") {
    only_keys(e, {"at", "event", "dt_ms", "link"}, where);
    ev.kind = ScenarioEvent::Kind::tick_links;
    ev.dt_ms = get<SimTime>(e, "dt_ms", where);
    if (ev.dt_ms < 0) throw ParseError(where + ": negative dt_ms");
    ev.link = get_opt<std::string>(e, "link", where);
  } else if (kind == "drop_message" || kind == "corrupt_message") {
    only_keys(e, {"at", "event", "n", "type"}, where);
    ev.kind = kind == "drop_message" ? ScenarioEvent::Kind::drop_message
                                     : ScenarioEvent::Kind::corrupt_message;
    ev.n = get<std::size_t>(e, "n", where);
    if (ev.n == 0) throw ParseError(where + ": n is 1-based");
    ev.type = get_opt<std::string>(e, "type", where);
  } else if (kind == "advance_clock") {
    only_keys(e, {"at", "event"}, where);
    ev.kind = ScenarioEvent::Kind::advance_clock;
  } else {
    throw ParseError(where + ": unknown event '" + kind + "'");
  }
  return ev;
}

std::optional<SimTime> optional_ms(const json& obj, const char* key, const std::string& where) {
  auto v = get_opt<SimTime>(obj, key, where);
  if (v && *v < 0) throw ParseError(where + ": " + key + " must be non-negative");
  return v;
}

}  // namespace

Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scenario JSON: ") + e.what());
  }
  only_keys(doc, {"topology", "seed", "config", "events", "expect", "description"}, "scenario");

  Scenario sc;
  if (auto t = get_opt<std::string>(doc, "topology", "scenario")) sc.topology = base_dir / *t;
  sc.seed = get_opt<std::uint64_t>(doc, "seed", "scenario");

  if (doc.contains("config")) {
    const auto& c = doc["config"];
    only_keys(c,
              {"latency_ms", "timeout_ms", "cache_ttl_ms", "session_lifetime_ms",
               "delivered_ttl_ms", "weight_policy"},
              "config");
    if (auto v = optional_ms(c, "latency_ms", "config")) sc.config.latency = *v;
    if (auto v = optional_ms(c, "timeout_ms", "config")) sc.config.timeout = *v;
    if (auto v = optional_ms(c, "cache_ttl_ms", "config")) sc.config.cache_ttl = *v;
    sc.config.session_lifetime = optional_ms(c, "session_lifetime_ms", "config");
    sc.config.delivered_ttl = optional_ms(c, "delivered_ttl_ms", "config");
    if (auto p = get_opt<std::string>(c, "weight_policy", "config")) {
      sc.config.policy_override = parse_weight_policy(*p);
      if (!sc.config.policy_override) throw ParseError("config: unknown weight_policy " + *p);
    }
  }

  if (!doc.contains("events") || !doc["events"].is_array())
    throw ParseError("scenario: missing array 'events'");
  for (std::size_t i = 0; i < doc["events"].size(); ++i)
    sc.events.push_back(parse_event(doc["events"][i], i));
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const auto& a, const auto& b) { return a.at < b.at; });

  if (doc.contains("expect")) {
    const auto& x = doc["expect"];
    only_keys(x,
              {"trace", "statuses", "key_match", "message_counts", "install_targets",
               "total_key_draws", "draws_per_link", "delivered_store_sizes"},
              "expect");
    auto& ex = sc.expect;
    if (auto t = get_opt<std::string>(x, "trace", "expect")) ex.trace = base_dir / *t;
    if (x.contains("statuses")) {
      for (const auto& [app, list] : get<std::map<std::string, std::vector<std::string>>>(
               x, "statuses", "expect")) {
        auto& out = ex.statuses[app];
        for (const auto& s : list) {
          auto st = parse_status(s);
          if (!st) throw ParseError("expect.statuses: unknown status " + s);
          out.push_back(*st);
        }
      }
    }
    if (x.contains("key_match")) {
      for (const auto& pair : get<std::vector<std::vector<std::string>>>(x, "key_match", "expect")) {
        if (pair.size() != 2) throw ParseError("expect.key_match: entries are [initiator, target]");
        ex.key_match.emplace_back(pair[0], pair[1]);
      }
    }
    if (x.contains("message_counts"))
      ex.message_counts = get<std::map<std::string, std::size_t>>(x, "message_counts", "expect");
    ex.install_targets = get_opt<std::vector<std::string>>(x, "install_targets", "expect");
    ex.total_key_draws = get_opt<std::size_t>(x, "total_key_draws", "expect");
    if (x.contains("draws_per_link"))
      ex.draws_per_link = get<std::map<std::string, std::size_t>>(x, "draws_per_link", "expect");
    if (x.contains("delivered_store_sizes"))
      ex.delivered_store_sizes =
          get<std::map<std::string, std::size_t>>(x, "delivered_store_sizes", "expect");
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

std::vector<std::string> check_invariants(Simulation& sim) {
  std::vector<std::string> violations;
  const auto& trace = sim.trace();
  const std::string controller(kControllerId);
  std::map<std::pair<EntityId, EntityId>, std::uint64_t> last_seq;

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& env = trace[i];
    const std::string where = "record " + std::to_string(i) + " (" +
                              std::string(message_type(env.payload)) + " " + env.from + "->" +
                              env.to + ")";
    const auto body = json::parse(encode(env))["body"];

    if (env.from == controller || env.to == controller) {
      for (const char* f : {"material", "value_relay_key", "encrypted_relay_key"}) {
        if (body.contains(f)) violations.push_back(where + ": controller channel carries " + f);
      }
    }
    for (const char* f : {"material", "value_relay_key"}) {
      if (body.contains(f) && !body[f].get<std::string>().empty() &&
          env.channel != Channel::intra_node) {
        violations.push_back(where + ": plaintext " + std::string(f) + " off the intra-node channel");
      }
    }
    if (const auto* relay = std::get_if<KeyRelay>(&env.payload)) {
      const auto* k1 = sim.key_material(relay->id_relay_key);
      const auto* k2 = sim.key_material(relay->id_key_encryption);
      if (!k1 || !k2) {
        violations.push_back(where + ": references unknown key");
      } else if (k1->size() != relay->encrypted_relay_key.size() || k2->size() != k1->size() ||
                 otp_xor(relay->encrypted_relay_key, *k2) != *k1) {
        violations.push_back(where + ": payload XOR K2 != K1");
      } else if (std::any_of(k2->begin(), k2->end(), [](auto b) { return b != 0; }) &&
                 relay->encrypted_relay_key == *k1) {
        violations.push_back(where + ": payload equals the relayed key in the clear");
      }
    }
    auto& prev = last_seq[{env.from, env.to}];
    if (env.seq <= prev) violations.push_back(where + ": out-of-order delivery on channel");
    prev = env.seq;
  }

  for (const auto* k : sim.all_kms()) {
    if (k->pool().foreign_accesses() != 0)
      violations.push_back(k->id() + ": pool accessed by another entity");
  }
  return violations;
}

RunResult run_scenario(const Scenario& scenario, const Topology& topology,
                       const RunOverrides& overrides) {
  SimConfig cfg = scenario.config;
  cfg.seed = overrides.seed.value_or(scenario.seed.value_or(topology.seed().value_or(0)));
  if (overrides.policy) cfg.policy_override = overrides.policy;
  if (overrides.cache_ttl) cfg.cache_ttl = *overrides.cache_ttl;

  RunResult result;
  result.sim = std::make_unique<Simulation>(topology, cfg);
  auto& sim = *result.sim;

  for (const auto& ev : scenario.events) {
    sim.advance_to(ev.at);
    switch (ev.kind) {
      case ScenarioEvent::Kind::app_get_key:
        sim.request_key(ev.app, ev.peer);
        break;
      case ScenarioEvent::Kind::app_get_key_with_id: {
        KeyId id;
        if (ev.key_id) {
          id = *ev.key_id;
        } else if (const auto* d = sim.app(ev.peer).last_ok(ev.app)) {
          id = d->delivery.key_id;
        }
        sim.request_key_with_id(ev.app, ev.peer, id);
        break;
      }
      case ScenarioEvent::Kind::tick_links:
        sim.tick_links(ev.dt_ms, ev.link);
        break;
      case ScenarioEvent::Kind::drop_message:
        sim.transport().add_fault(FaultRule{FaultKind::drop, ev.n, ev.type});
        break;
      case ScenarioEvent::Kind::corrupt_message:
        sim.transport().add_fault(FaultRule{FaultKind::corrupt, ev.n, ev.type});
        break;
      case ScenarioEvent::Kind::advance_clock:
        sim.controller().session_gc(sim.now());
        for (const auto& node : topology.nodes()) sim.vkms(node.id).cache_expire(sim.now());
        break;
    }
  }
  sim.run_until_idle();
  result.trace = sim.trace();

  auto& failures = result.failures;
  const auto& ex = scenario.expect;

  if (sim.pending_requests() != 0)
    failures.push_back("not quiescent: " + std::to_string(sim.pending_requests()) +
                       " requests pending");

  result.invariant_violations = check_invariants(sim);
  for (const auto& v : result.invariant_violations) failures.push_back("invariant: " + v);

  std::map<std::string, std::size_t> counts;
  std::vector<EntityId> install_targets;
  for (const auto& env : result.trace) {
    ++counts[std::string(message_type(env.payload))];
    if (std::holds_alternative<RelayPathInstall>(env.payload)) install_targets.push_back(env.to);
  }

  for (const auto& [app, want] : ex.statuses) {
    std::vector<Status> got;
    for (const auto& d : sim.app(app).deliveries()) got.push_back(d.delivery.status);
    if (got != want) {
      std::string g, w;
      for (auto s : got) g += std::string(to_string(s)) + " ";
      for (auto s : want) w += std::string(to_string(s)) + " ";
      failures.push_back("statuses of " + app + ": expected [ " + w + "] got [ " + g + "]");
    }
  }

  for (const auto& [initiator, target] : ex.key_match) {
    std::size_t matched = 0;
    for (const auto& t : sim.app(target).deliveries()) {
      if (t.delivery.status != Status::ok) continue;
      const bool found = std::any_of(
          sim.app(initiator).deliveries().begin(), sim.app(initiator).deliveries().end(),
          [&](const AppDelivery& i) {
            return i.delivery.status == Status::ok && i.delivery.key_id == t.delivery.key_id &&
                   i.delivery.material == t.delivery.material;
          });
      if (!found) {
        failures.push_back("E2E key mismatch: " + target + " key " + t.delivery.key_id +
                           " differs from what " + initiator + " received");
      } else {
        ++matched;
      }
    }
    if (matched == 0) failures.push_back("E2E key match: " + target + " has no matching key");
  }

  for (const auto& [type, want] : ex.message_counts) {
    const auto got = counts.count(type) ? counts[type] : 0;
    if (got != want)
      failures.push_back("count of " + type + ": expected " + std::to_string(want) + " got " +
                         std::to_string(got));
  }

  if (ex.install_targets) {
    auto want = *ex.install_targets;
    auto got = install_targets;
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want != got) failures.push_back("RelayPathInstall targets differ from expectation");
  }

  std::size_t total_draws = 0;
  std::map<LinkId, std::size_t> draws_per_link;
  for (const auto* k : sim.all_kms()) {
    total_draws += k->pool().counters().draws;
    draws_per_link[k->kms_id().link] += k->pool().counters().draws;
  }
  if (ex.total_key_draws && *ex.total_key_draws != total_draws)
    failures.push_back("total key draws: expected " + std::to_string(*ex.total_key_draws) +
                       " got " + std::to_string(total_draws));
  for (const auto& [link, want] : ex.draws_per_link) {
    if (draws_per_link[link] != want)
      failures.push_back("key draws on link " + link + ": expected " + std::to_string(want) +
                         " got " + std::to_string(draws_per_link[link]));
  }
  for (const auto& [kms, want] : ex.delivered_store_sizes) {
    const auto got = sim.kms(kms).delivered_count();
    if (got != want)
      failures.push_back("delivered store of " + kms + ": expected " + std::to_string(want) +
                         " got " + std::to_string(got));
  }

  if (ex.trace) {
    result.trace_diff = trace_compare(read_trace_lines(*ex.trace), encode_trace(result.trace));
    if (!result.trace_diff->equal) failures.push_back("golden trace: " + result.trace_diff->describe());
  }

  result.exit_code = failures.empty() ? 0 : 1;

  json report;
  report["exit_code"] = result.exit_code;
  report["seed"] = cfg.seed;
  report["final_time_ms"] = sim.now();
  report["records"] = result.trace.size();
  report["message_counts"] = counts;
  report["failures"] = failures;
  json deliveries = json::object();
  for (const auto& [app, _] : topology.apps()) {
    deliveries[app] = json::array();
    for (const auto& d : sim.app(app).deliveries()) {
      deliveries[app].push_back({{"at_ms", d.at},
                                 {"peer", d.delivery.app_dst},
                                 {"status", to_string(d.delivery.status)},
                                 {"key_id", d.delivery.key_id}});
    }
  }
  report["deliveries"] = deliveries;
  json pools = json::object();
  for (const auto* k : sim.all_kms()) {
    const auto c = k->pool().counters();
    pools[k->id()] = {{"available", c.available},
                      {"reserved", c.reserved},
                      {"consumed", c.consumed},
                      {"draws", c.draws},
                      {"delivered_store", k->delivered_count()}};
  }
  report["pools"] = pools;
  report["controller"] = json::parse(sim.controller().dump_state());
  if (result.trace_diff) {
    report["trace_diff"] = {{"equal", result.trace_diff->equal},
                            {"index", result.trace_diff->index},
                            {"expected", result.trace_diff->expected.value_or("")},
                            {"actual", result.trace_diff->actual.value_or("")}};
  }
  result.report_json = report.dump(2);
  return result;
}

}  // namespace qkdrelay
