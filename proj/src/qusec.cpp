#include "qkdrelay/qusec.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

std::vector<EntityId> RelayPath::kms_names() const {
  std::vector<EntityId> out;
  out.reserve(kms.size());
  for (const auto& k : kms) out.push_back(k.name());
  return out;
}

namespace {

bool nearly_equal(double a, double b) {
  return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

struct Label {
  double cost = 0.0;
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;
};

// Strict ordering on candidate paths: cost, then node sequence, then links.
bool better(const Label& a, const Label& b) {
  if (!nearly_equal(a.cost, b.cost)) return a.cost < b.cost;
  if (a.nodes != b.nodes) return a.nodes < b.nodes;
  return a.links < b.links;
}

}  // namespace

RelayPath compute_relay_path(const Topology& topology, const NodeId& src, const NodeId& dst,
                             WeightPolicy policy) {
  return compute_relay_path(topology, src, dst,
                            [policy](const Link& l) { return l.weight(policy); });
}

RelayPath compute_relay_path(const Topology& topology, const NodeId& src, const NodeId& dst,
                             const LinkWeight& weight) {
  if (!topology.has_node(src)) throw Error("unknown node " + src);
  if (!topology.has_node(dst)) throw Error("unknown node " + dst);
  if (src == dst) throw SameNode(src);

  // Dijkstra with whole-path labels.
  std::map<NodeId, Label> best;
  std::map<NodeId, bool> settled;
  best[src] = Label{0.0, {src}, {}};

  for (;;) {
    const Label* pick = nullptr;
    NodeId pick_node;
    for (const auto& [node, label] : best) {
      if (settled[node]) continue;
      if (!pick || better(label, *pick)) {
        pick = &label;
        pick_node = node;
      }
    }
    if (!pick) throw NoPath(src, dst);
    settled[pick_node] = true;
    if (pick_node == dst) break;

    const Label current = *pick;
    for (const Link* link : topology.incident_links(pick_node)) {
      const auto& next = link->other(pick_node);
      if (settled[next]) continue;
      const double w = weight(*link);
      if (!(w > 0.0) || !std::isfinite(w)) throw Error("link " + link->id + " has invalid weight");
      Label cand = current;
      cand.cost += w;
      cand.nodes.push_back(next);
      cand.links.push_back(link->id);
      auto it = best.find(next);
      if (it == best.end() || better(cand, it->second)) best.insert_or_assign(next, std::move(cand));
    }
  }

  const Label& found = best.at(dst);
  RelayPath path;
  path.nodes = found.nodes;
  path.links = found.links;
  path.cost = found.cost;
  for (std::size_t i = 0; i < found.links.size(); ++i) {
    path.kms.push_back(KmsId{found.nodes[i], found.links[i]});
    path.kms.push_back(KmsId{found.nodes[i + 1], found.links[i]});
  }
  return path;
}

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::installed: return "installed";
    case SessionStatus::completed: return "completed";
    case SessionStatus::expired: return "expired";
  }
  return "installed";
}

Controller::Controller(const Topology& topology, ControllerConfig config)
    : name_(kControllerId), topology_(&topology), config_(config) {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                    static_cast<std::uint32_t>(config_.seed >> 32), 0x51u, 0x5ecu};
  rng_.seed(seq);
}

WeightPolicy Controller::policy() const {
  return config_.policy_override.value_or(topology_->weight_policy());
}

AssociationId Controller::fresh_association() {
  Octets raw(16);
  for (std::size_t i = 0; i < raw.size(); i += 8) {
    const auto word = rng_();
    for (std::size_t j = 0; j < 8; ++j) raw[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
  }
  return to_hex(raw);
}

const Link* Controller::direct_link(const NodeId& a, const NodeId& b) const {
  const Link* pick = nullptr;
  for (const Link* l : topology_->incident_links(a)) {
    if (l->other(a) != b) continue;
    if (!pick) {
      pick = l;
      continue;
    }
    const double wl = l->weight(policy());
    const double wp = pick->weight(policy());
    if (nearly_equal(wl, wp) ? l->id < pick->id : wl < wp) pick = l;
  }
  return pick;
}

std::size_t Controller::session_gc(SimTime now) {
  if (!config_.session_lifetime) return 0;
  std::size_t n = 0;
  for (auto& s : sessions_) {
    if (s.status != SessionStatus::expired && now - s.created > *config_.session_lifetime) {
      s.status = SessionStatus::expired;
      ++n;
    }
  }
  return n;
}

KmsDiscoveryResponse Controller::handle_kms_discovery(const KmsDiscoveryRequest& req, Outbox& out) {
  ++discoveries_;
  session_gc(out.now());
  KmsDiscoveryResponse resp{req.app_src, req.app_dst, std::nullopt, Status::ok};

  const auto& apps = topology_->apps();
  auto src_it = apps.find(req.app_src);
  auto dst_it = apps.find(req.app_dst);
  if (src_it == apps.end() || dst_it == apps.end()) {
    resp.status = Status::failed_unknown_app;
    return resp;
  }
  const NodeId& src = src_it->second;
  const NodeId& dst = dst_it->second;
  if (src == dst) {
    resp.status = Status::failed_no_rule;
    return resp;
  }

  // Same link domain: the requester's end of the shared link serves it.
  if (const Link* link = direct_link(src, dst)) {
    const KmsId near{src, link->id};
    const KmsId far{dst, link->id};
    resp.id_kms = near.name();
    sessions_.push_back(SessionState{{}, SessionKind::direct, req.app_src, req.app_dst,
                                     {near.name(), far.name()}, near.name(), far.name(),
                                     out.now(), SessionStatus::installed});
    return resp;
  }

  // Requester is the target of a relay already installed towards it.
  for (auto it = sessions_.rbegin(); it != sessions_.rend(); ++it) {
    if (it->kind != SessionKind::relay || it->target != req.app_src ||
        it->initiator != req.app_dst) {
      continue;
    }
    if (it->status == SessionStatus::expired) {
      resp.status = Status::failed_no_rule;
      return resp;
    }
    it->status = SessionStatus::completed;
    resp.id_kms = it->last_kms;
    return resp;
  }

  RelayPath path;
  try {
    path = compute_relay_path(*topology_, src, dst, policy());
  } catch (const NoPath&) {
    resp.status = Status::failed_no_rule;
    return resp;
  }
  const auto names = path.kms_names();
  const auto assoc = fresh_association();
  // Installed last to first.
  for (std::size_t i = names.size(); i-- > 0;) {
    RelayPathInstall install;
    install.id_association = assoc;
    if (i > 0) install.prev_hop = names[i - 1];
    if (i + 1 < names.size()) install.next_hop = names[i + 1];
    install.app_src = req.app_src;
    install.app_dst = req.app_dst;
    out.send(names[i], std::move(install));
    ++installs_sent_;
  }
  sessions_.push_back(SessionState{assoc, SessionKind::relay, req.app_src, req.app_dst, names,
                                   names.front(), names.back(), out.now(),
                                   SessionStatus::installed});
  resp.id_kms = names.front();
  return resp;
}

void Controller::on_message(const Envelope& env, Outbox& out) {
  if (const auto* req = std::get_if<KmsDiscoveryRequest>(&env.payload)) {
    out.send(env.from, handle_kms_discovery(*req, out));
  }
}

std::string Controller::dump_state() const {
  nlohmann::json doc;
  doc["policy"] = std::string(to_string(policy()));
  doc["installs_sent"] = installs_sent_;
  doc["discoveries"] = discoveries_;
  doc["sessions"] = nlohmann::json::array();
  for (const auto& s : sessions_) {
    doc["sessions"].push_back({{"id_association", s.id_association},
                               {"kind", s.kind == SessionKind::direct ? "direct" : "relay"},
                               {"initiator", s.initiator},
                               {"target", s.target},
                               {"kms_path", s.kms_path},
                               {"first_kms", s.first_kms},
                               {"last_kms", s.last_kms},
                               {"created_ms", s.created},
                               {"status", to_string(s.status)}});
  }
  return doc.dump(2);
}

}  // namespace qkdrelay
