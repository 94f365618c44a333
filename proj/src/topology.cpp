#include "qkdrelay/topology.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

using nlohmann::json;

std::string_view to_string(WeightPolicy policy) {
  switch (policy) {
    case WeightPolicy::hop_count: return "hop_count";
    case WeightPolicy::inverse_key_rate: return "inverse_key_rate";
    case WeightPolicy::distance: return "distance";
  }
  return "hop_count";
}

std::optional<WeightPolicy> parse_weight_policy(std::string_view text) {
  if (text == "hop_count") return WeightPolicy::hop_count;
  if (text == "inverse_key_rate") return WeightPolicy::inverse_key_rate;
  if (text == "distance") return WeightPolicy::distance;
  return std::nullopt;
}

std::string_view to_string(NodeRole role) {
  return role == NodeRole::simple ? "simple" : "trusted_relay";
}

double Link::weight(WeightPolicy policy) const {
  switch (policy) {
    case WeightPolicy::hop_count: return 1.0;
    case WeightPolicy::inverse_key_rate: return 1.0 / key_rate;
    case WeightPolicy::distance: return distance_km;
  }
  return 1.0;
}

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": key '" + key + "' has the wrong type");
  }
}

const json& required_array(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_array())
    throw ParseError(std::string("missing array '") + key + "'");
  return obj.at(key);
}

}  // namespace

Topology::Topology(TopologyDesc desc) : desc_(std::move(desc)) {}

Topology Topology::build(TopologyDesc desc) {
  std::vector<std::string> violations;
  std::set<std::string> node_ids;
  for (const auto& n : desc.nodes) {
    if (n.empty()) violations.push_back("empty node id");
    if (!node_ids.insert(n).second) violations.push_back("duplicate node " + n);
  }
  if (desc.nodes.empty()) violations.push_back("topology has no nodes");

  std::set<std::string> link_ids;
  std::map<std::string, std::size_t> degree;
  for (const auto& l : desc.links) {
    if (l.id.empty()) violations.push_back("empty link id");
    if (!link_ids.insert(l.id).second) violations.push_back("duplicate link " + l.id);
    for (const auto* end : {&l.a, &l.b}) {
      if (!node_ids.count(*end)) violations.push_back("unknown node " + *end);
    }
    if (l.a == l.b) violations.push_back("link " + l.id + " connects node " + l.a + " to itself");
    if (!(l.key_rate > 0.0) || !std::isfinite(l.key_rate))
      violations.push_back("link " + l.id + " has non-positive key_rate");
    if (!(l.distance_km > 0.0) || !std::isfinite(l.distance_km))
      violations.push_back("link " + l.id + " has non-positive distance_km");
    ++degree[l.a];
    if (l.b != l.a) ++degree[l.b];
  }
  for (const auto& n : desc.nodes) {
    if (!degree.count(n)) violations.push_back("node " + n + " has no links");
  }

  std::set<std::string> app_ids;
  for (const auto& [app, node] : desc.apps) {
    if (!app_ids.insert(app).second) violations.push_back("duplicate app " + app);
    if (!node_ids.count(node)) violations.push_back("app " + app + " references unknown node " + node);
  }
  if (desc.key_size == 0) violations.push_back("key_size must be positive");

  // Connectivity over declared nodes.
  if (!desc.nodes.empty() && violations.empty()) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& l : desc.links) {
      adj[l.a].push_back(l.b);
      adj[l.b].push_back(l.a);
    }
    std::set<std::string> seen{desc.nodes.front()};
    std::deque<std::string> frontier{desc.nodes.front()};
    while (!frontier.empty()) {
      auto cur = frontier.front();
      frontier.pop_front();
      for (const auto& nb : adj[cur]) {
        if (seen.insert(nb).second) frontier.push_back(nb);
      }
    }
    if (seen.size() != node_ids.size()) {
      for (const auto& n : desc.nodes) {
        if (!seen.count(n)) violations.push_back("graph is disconnected: " + n + " unreachable");
      }
    }
  }

  std::map<std::string, KmsId, std::less<>> kms_by_name;
  if (violations.empty()) {
    for (const auto& l : desc.links) {
      for (const auto* end : {&l.a, &l.b}) {
        KmsId id{*end, l.id};
        if (!kms_by_name.emplace(id.name(), id).second)
          violations.push_back("KMS name collision: " + id.name());
      }
    }
  }

  if (!violations.empty()) throw ValidationError(std::move(violations));

  Topology topo(std::move(desc));
  topo.kms_by_name_ = std::move(kms_by_name);
  for (std::size_t i = 0; i < topo.desc_.links.size(); ++i)
    topo.link_index_.emplace(topo.desc_.links[i].id, i);
  for (const auto& id : topo.desc_.nodes) {
    Node node{id, NodeRole::simple, {}};
    for (const auto& l : topo.desc_.links) {
      if (l.touches(id)) node.kms.push_back(KmsId{id, l.id});
    }
    node.role = node.kms.size() >= 2 ? NodeRole::trusted_relay : NodeRole::simple;
    topo.node_index_.emplace(id, topo.nodes_.size());
    topo.nodes_.push_back(std::move(node));
  }
  for (const auto& [app, node] : topo.desc_.apps) topo.apps_.emplace(app, node);
  return topo;
}

Topology Topology::load(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed topology JSON: ") + e.what());
  }
  check_keys(doc, {"nodes", "links", "apps", "weight_policy", "key_size", "seed"}, "topology");

  TopologyDesc desc;
  for (const auto& n : required_array(doc, "nodes")) {
    check_keys(n, {"id"}, "node");
    desc.nodes.push_back(required<std::string>(n, "id", "node"));
  }
  for (const auto& l : required_array(doc, "links")) {
    check_keys(l, {"id", "a", "b", "key_rate", "distance_km", "initial_pool"}, "link");
    Link link;
    link.id = required<std::string>(l, "id", "link");
    const std::string where = "link " + link.id;
    link.a = required<std::string>(l, "a", where);
    link.b = required<std::string>(l, "b", where);
    link.key_rate = required<double>(l, "key_rate", where);
    link.distance_km = required<double>(l, "distance_km", where);
    const auto pool = required<std::int64_t>(l, "initial_pool", where);
    if (pool < 0) throw ValidationError({where + " has negative initial_pool"});
    link.initial_pool = static_cast<std::uint64_t>(pool);
    desc.links.push_back(std::move(link));
  }
  for (const auto& a : required_array(doc, "apps")) {
    check_keys(a, {"id", "node"}, "app");
    desc.apps.emplace_back(required<std::string>(a, "id", "app"),
                           required<std::string>(a, "node", "app"));
  }
  const auto policy_text = required<std::string>(doc, "weight_policy", "topology");
  const auto policy = parse_weight_policy(policy_text);
  if (!policy) throw ValidationError({"unknown weight_policy " + policy_text});
  desc.weight_policy = *policy;
  if (doc.contains("key_size")) {
    const auto size = required<std::int64_t>(doc, "key_size", "topology");
    if (size <= 0) throw ValidationError({"key_size must be positive"});
    desc.key_size = static_cast<std::size_t>(size);
  }
  if (doc.contains("seed")) desc.seed = required<std::uint64_t>(doc, "seed", "topology");
  return build(std::move(desc));
}

Topology Topology::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open topology file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load(buf.str());
}

std::string Topology::serialize() const {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : desc_.nodes) doc["nodes"].push_back({{"id", n}});
  doc["links"] = json::array();
  for (const auto& l : desc_.links) {
    doc["links"].push_back({{"id", l.id},
                            {"a", l.a},
                            {"b", l.b},
                            {"key_rate", l.key_rate},
                            {"distance_km", l.distance_km},
                            {"initial_pool", l.initial_pool}});
  }
  doc["apps"] = json::array();
  for (const auto& [app, node] : desc_.apps) doc["apps"].push_back({{"id", app}, {"node", node}});
  doc["weight_policy"] = std::string(to_string(desc_.weight_policy));
  doc["key_size"] = desc_.key_size;
  if (desc_.seed) doc["seed"] = *desc_.seed;
  return doc.dump(2);
}

bool Topology::has_node(std::string_view id) const { return node_index_.find(id) != node_index_.end(); }

const Node& Topology::node(std::string_view id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) throw Error("unknown node " + std::string(id));
  return nodes_[it->second];
}

const Link& Topology::link(std::string_view id) const {
  auto it = link_index_.find(id);
  if (it == link_index_.end()) throw Error("unknown link " + std::string(id));
  return desc_.links[it->second];
}

std::vector<const Link*> Topology::incident_links(std::string_view node) const {
  std::vector<const Link*> out;
  for (const auto& l : desc_.links) {
    if (l.touches(node)) out.push_back(&l);
  }
  return out;
}

const NodeId& Topology::resolve_app(std::string_view app) const {
  auto it = apps_.find(std::string(app));
  if (it == apps_.end()) throw UnknownApp(std::string(app));
  return it->second;
}

std::optional<KmsId> Topology::find_kms(std::string_view name) const {
  auto it = kms_by_name_.find(name);
  if (it == kms_by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<KmsId> Topology::all_kms() const {
  std::vector<KmsId> out;
  for (const auto& n : nodes_) out.insert(out.end(), n.kms.begin(), n.kms.end());
  return out;
}

KmsId Topology::peer_of(const KmsId& kms) const {
  const auto& l = link(kms.link);
  return KmsId{l.other(kms.node), l.id};
}

}  // namespace qkdrelay
