#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qkdrelay/harness.hpp"
#include "qkdrelay/qusec.hpp"
#include "qkdrelay/simulation.hpp"
#include "qkdrelay/topology.hpp"
#include "qkdrelay/transport.hpp"

namespace qkdrelay::testing {

// mesh4: links a:N1-N2, b:N1-N3, c:N2-N3, d:N3-N4.
TopologyDesc mesh4_desc(const NodeId& app_a_node = "N1", const NodeId& app_b_node = "N4",
                        std::size_t pool = 16);
Topology mesh4(const NodeId& app_a_node = "N1", const NodeId& app_b_node = "N4");

// N1 - N2 - ... - N(links+1), link ids l1..lL, APP_A at N1, APP_B at the far end.
TopologyDesc chain_desc(std::size_t links, std::size_t pool = 4);

// Connected graph with `nodes` nodes, a random spanning tree plus extra edges,
// random positive weight attributes. Apps on the first and last node.
TopologyDesc random_connected(std::mt19937_64& rng, std::size_t nodes, double extra_edge_p = 0.35);

// Exhaustive minimum over all simple paths, as an oracle for SPF.
struct BruteForceResult {
  double cost = 0.0;
  std::vector<std::vector<NodeId>> optimal_node_paths;
};
std::optional<BruteForceResult> brute_force_min(const Topology& t, const NodeId& src,
                                                const NodeId& dst, const LinkWeight& weight);

// Outbox that records instead of delivering, for driving one entity by hand.
class RecordingOutbox : public Outbox {
 public:
  struct Sent {
    EntityId to;
    Message msg;
  };
  struct Timer {
    SimTime delay;
    std::uint64_t token;
  };

  SimTime now() const override { return now_; }
  void send(const EntityId& to, Message msg) override { sent.push_back({to, std::move(msg)}); }
  void set_timer(SimTime delay, std::uint64_t token) override { timers.push_back({delay, token}); }

  SimTime now_ = 0;
  std::vector<Sent> sent;
  std::vector<Timer> timers;
};

Envelope envelope(const EntityId& from, const EntityId& to, Message msg, std::uint64_t seq = 1,
                  Channel channel = Channel::inter_node);

// Single scenario: `app_src` asks, then the peer asks with the id 100 ms later.
Scenario pair_scenario(const AppId& initiator = "APP_A", const AppId& target = "APP_B",
                       SimTime target_at = 100);

std::size_t count_type(const std::vector<Envelope>& trace, std::string_view type);

}  // namespace qkdrelay::testing
