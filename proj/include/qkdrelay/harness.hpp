#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qkdrelay/simulation.hpp"
#include "qkdrelay/trace.hpp"

namespace qkdrelay {

struct ScenarioEvent {
  enum class Kind {
    app_get_key,
    app_get_key_with_id,
    tick_links,
    drop_message,
    corrupt_message,
    advance_clock,
  };

  SimTime at = 0;
  Kind kind = Kind::app_get_key;
  AppId app;
  AppId peer;
  // For app_get_key_with_id; when absent the id of the peer's latest key for
  // this pair is used, standing in for out-of-band id sharing.
  std::optional<KeyId> key_id;
  SimTime dt_ms = 0;
  std::optional<LinkId> link;
  std::size_t n = 1;
  std::optional<std::string> type;
};

struct Expectations {
  std::optional<std::filesystem::path> trace;  // golden JSON-lines file
  std::map<AppId, std::vector<Status>> statuses;
  // (initiator, target): every key the target got matches one the initiator got.
  std::vector<std::pair<AppId, AppId>> key_match;
  std::map<std::string, std::size_t> message_counts;
  std::optional<std::vector<EntityId>> install_targets;
  std::optional<std::size_t> total_key_draws;
  std::map<LinkId, std::size_t> draws_per_link;
  std::map<EntityId, std::size_t> delivered_store_sizes;
};

struct Scenario {
  std::optional<std::filesystem::path> topology;
  std::optional<std::uint64_t> seed;
  SimConfig config;
  std::vector<ScenarioEvent> events;  // sorted by time, stable
  Expectations expect;
};

// Relative paths inside the scenario resolve against base_dir. Throws
// ParseError.
Scenario parse_scenario(std::string_view json_text, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<WeightPolicy> policy;
  std::optional<SimTime> cache_ttl;
};

struct RunResult {
  int exit_code = 0;  // 0 all expectations hold, 1 otherwise
  std::vector<std::string> failures;
  std::vector<std::string> invariant_violations;
  std::optional<TraceDiff> trace_diff;
  std::vector<Envelope> trace;
  std::string report_json;
  std::unique_ptr<Simulation> sim;
};

// Drives the scenario to quiescence and evaluates expectations and the
// invariant suite.
RunResult run_scenario(const Scenario& scenario, const Topology& topology,
                       const RunOverrides& overrides = {});

// Trace-level and state-level protocol invariants: controller key blindness,
// plaintext only on intra-node channels, one-time-pad relation of every
// key_relay, FIFO channels, per-link pool isolation.
std::vector<std::string> check_invariants(Simulation& sim);

}  // namespace qkdrelay
