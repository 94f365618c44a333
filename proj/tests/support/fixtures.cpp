#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace qkdrelay::testing {

namespace {

Link make_link(LinkId id, NodeId a, NodeId b, double rate, double km, std::size_t pool) {
  Link l;
  l.id = std::move(id);
  l.a = std::move(a);
  l.b = std::move(b);
  l.key_rate = rate;
  l.distance_km = km;
  l.initial_pool = pool;
  return l;
}

}  // namespace

TopologyDesc mesh4_desc(const NodeId& app_a_node, const NodeId& app_b_node, std::size_t pool) {
  TopologyDesc d;
  d.nodes = {"N1", "N2", "N3", "N4"};
  d.links = {make_link("a", "N1", "N2", 10, 20, pool), make_link("b", "N1", "N3", 10, 25, pool),
             make_link("c", "N2", "N3", 10, 15, pool), make_link("d", "N3", "N4", 10, 30, pool)};
  d.apps = {{"APP_A", app_a_node}, {"APP_B", app_b_node}};
  d.weight_policy = WeightPolicy::hop_count;
  d.seed = 7;
  return d;
}

Topology mesh4(const NodeId& app_a_node, const NodeId& app_b_node) {
  return Topology::build(mesh4_desc(app_a_node, app_b_node));
}

TopologyDesc chain_desc(std::size_t links, std::size_t pool) {
  TopologyDesc d;
  for (std::size_t i = 1; i <= links + 1; ++i) d.nodes.push_back("N" + std::to_string(i));
  for (std::size_t i = 1; i <= links; ++i) {
    d.links.push_back(make_link("l" + std::to_string(i), d.nodes[i - 1], d.nodes[i], 5, 40, pool));
  }
  d.apps = {{"APP_A", d.nodes.front()}, {"APP_B", d.nodes.back()}};
  return d;
}

TopologyDesc random_connected(std::mt19937_64& rng, std::size_t nodes, double extra_edge_p) {
  TopologyDesc d;
  for (std::size_t i = 0; i < nodes; ++i) d.nodes.push_back("N" + std::to_string(i + 1));
  std::uniform_real_distribution<double> rate(0.5, 50.0);
  std::uniform_real_distribution<double> km(1.0, 120.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::set<std::pair<std::size_t, std::size_t>> used;
  auto add = [&](std::size_t u, std::size_t v) {
    if (u > v) std::swap(u, v);
    if (!used.insert({u, v}).second) return;
    // Coarse integer weights on about half the links.
    const bool ints = coin(rng) < 0.5;
    const double r = ints ? std::floor(rate(rng) / 10.0) + 1.0 : rate(rng);
    const double k = ints ? std::floor(km(rng) / 40.0) + 1.0 : km(rng);
    d.links.push_back(make_link("e" + std::to_string(d.links.size()), d.nodes[u], d.nodes[v], r, k, 2));
  };
  for (std::size_t i = 1; i < nodes; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    add(parent(rng), i);
  }
  for (std::size_t u = 0; u < nodes; ++u) {
    for (std::size_t v = u + 1; v < nodes; ++v) {
      if (coin(rng) < extra_edge_p) add(u, v);
    }
  }
  d.apps = {{"APP_A", d.nodes.front()}, {"APP_B", d.nodes.back()}};
  return d;
}

std::optional<BruteForceResult> brute_force_min(const Topology& t, const NodeId& src,
                                                const NodeId& dst, const LinkWeight& weight) {
  std::optional<BruteForceResult> best;
  std::vector<NodeId> path{src};
  std::set<NodeId> on_path{src};
  std::function<void(const NodeId&, double)> walk = [&](const NodeId& at, double cost) {
    if (at == dst) {
      const double tol = 1e-9 * std::max(1.0, std::fabs(cost));
      if (!best || cost < best->cost - tol) {
        best = BruteForceResult{cost, {path}};
      } else if (std::fabs(cost - best->cost) <= tol) {
        best->optimal_node_paths.push_back(path);
      }
      return;
    }
    for (const Link* l : t.incident_links(at)) {
      const auto& next = l->other(at);
      if (on_path.count(next)) continue;
      path.push_back(next);
      on_path.insert(next);
      walk(next, cost + weight(*l));
      on_path.erase(next);
      path.pop_back();
    }
  };
  walk(src, 0.0);
  return best;
}

Envelope envelope(const EntityId& from, const EntityId& to, Message msg, std::uint64_t seq,
                  Channel channel) {
  return Envelope{seq, from, to, channel, std::move(msg)};
}

Scenario pair_scenario(const AppId& initiator, const AppId& target, SimTime target_at) {
  Scenario sc;
  ScenarioEvent ask;
  ask.at = 0;
  ask.kind = ScenarioEvent::Kind::app_get_key;
  ask.app = initiator;
  ask.peer = target;
  ScenarioEvent pick;
  pick.at = target_at;
  pick.kind = ScenarioEvent::Kind::app_get_key_with_id;
  pick.app = target;
  pick.peer = initiator;
  sc.events = {ask, pick};
  return sc;
}

std::size_t count_type(const std::vector<Envelope>& trace, std::string_view type) {
  return static_cast<std::size_t>(std::count_if(trace.begin(), trace.end(), [&](const Envelope& e) {
    return message_type(e.payload) == type;
  }));
}

}  // namespace qkdrelay::testing
