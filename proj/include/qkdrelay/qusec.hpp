#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qkdrelay/ids.hpp"
#include "qkdrelay/protocol.hpp"
#include "qkdrelay/topology.hpp"
#include "qkdrelay/transport.hpp"

namespace qkdrelay {

struct RelayPath {
  std::vector<NodeId> nodes;
  std::vector<LinkId> links;
  double cost = 0.0;
  // Two KMSs per traversed link: the near end, then the far end.
  std::vector<KmsId> kms;

  std::vector<EntityId> kms_names() const;
};

using LinkWeight = std::function<double(const Link&)>;

// Minimum-weight path from src to dst, expanded to KMS granularity. Among
// equal-cost paths the lexicographically smallest node sequence wins, then
// the smallest link sequence. Throws NoPath, or Error for unknown nodes or
// src == dst.
RelayPath compute_relay_path(const Topology& topology, const NodeId& src, const NodeId& dst,
                             WeightPolicy policy);
RelayPath compute_relay_path(const Topology& topology, const NodeId& src, const NodeId& dst,
                             const LinkWeight& weight);

enum class SessionKind { direct, relay };
enum class SessionStatus { installed, completed, expired };

std::string_view to_string(SessionStatus status);

struct SessionState {
  AssociationId id_association;  // empty for direct sessions
  SessionKind kind = SessionKind::relay;
  AppId initiator;
  AppId target;
  std::vector<EntityId> kms_path;
  EntityId first_kms;
  EntityId last_kms;
  SimTime created = 0;
  SessionStatus status = SessionStatus::installed;
};

struct ControllerConfig {
  std::optional<WeightPolicy> policy_override;
  std::optional<SimTime> session_lifetime;  // none: sessions never expire
  std::uint64_t seed = 0;
};

// Centralized controller: resolves which KMS serves an application pair,
// computes and installs relay paths, and keeps session state. It only ever
// handles control messages and never sees key material.
class Controller : public Entity {
 public:
  Controller(const Topology& topology, ControllerConfig config = {});

  const EntityId& id() const override { return name_; }
  WeightPolicy policy() const;

  // Answers a discovery request, sending RelayPathInstall messages through
  // `out` when a new relay path is needed.
  KmsDiscoveryResponse handle_kms_discovery(const KmsDiscoveryRequest& req, Outbox& out);

  // Marks sessions older than the configured lifetime as expired.
  std::size_t session_gc(SimTime now);

  const std::vector<SessionState>& sessions() const { return sessions_; }
  std::size_t installs_sent() const { return installs_sent_; }
  std::size_t discoveries() const { return discoveries_; }

  // JSON snapshot of sessions and counters.
  std::string dump_state() const;

  void on_message(const Envelope& env, Outbox& out) override;

 private:
  AssociationId fresh_association();
  const Link* direct_link(const NodeId& a, const NodeId& b) const;

  EntityId name_;
  const Topology* topology_;
  ControllerConfig config_;
  std::mt19937_64 rng_;
  std::vector<SessionState> sessions_;
  std::size_t installs_sent_ = 0;
  std::size_t discoveries_ = 0;
};

}  // namespace qkdrelay
