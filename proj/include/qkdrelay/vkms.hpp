#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <tuple>
#include <utility>

#include "qkdrelay/ids.hpp"
#include "qkdrelay/protocol.hpp"
#include "qkdrelay/topology.hpp"
#include "qkdrelay/transport.hpp"

namespace qkdrelay {

struct VkmsConfig {
  SimTime cache_ttl = 0;  // 0 disables the discovery cache
  SimTime timeout = 1000;
};

// Per-node facade for applications. Finds the serving KMS through the
// controller, forwards the request and relays the answer back.
class Vkms : public Entity {
 public:
  using AppPair = std::pair<AppId, AppId>;

  Vkms(NodeId node, const Topology& topology, VkmsConfig config = {});

  const EntityId& id() const override { return name_; }
  const NodeId& node() const { return node_; }

  // Discovery cache keyed by the ordered (app_src, app_dst) pair.
  std::optional<EntityId> cache_lookup(const AppPair& pair, SimTime now) const;
  void cache_insert(const AppPair& pair, const EntityId& kms, SimTime now);
  std::size_t cache_expire(SimTime now);
  std::size_t cache_size() const { return cache_.size(); }

  std::size_t discovery_requests() const { return discovery_requests_; }
  std::size_t cache_hits() const { return cache_hits_; }
  std::size_t pending_count() const;

  void on_message(const Envelope& env, Outbox& out) override;
  void on_timer(std::uint64_t token, Outbox& out) override;

 private:
  struct Request {
    std::uint64_t token;
    EntityId app;
    Message original;  // GetKey or GetKeyWithId
  };
  using DeliveryKey = std::tuple<EntityId, AppId, AppId>;

  void accept(const Envelope& env, const AppPair& pair, Outbox& out);
  void forward(const EntityId& kms, Request req, const AppPair& pair, Outbox& out);
  void reply_failure(const EntityId& app, const AppPair& pair, Status status, Outbox& out);
  bool cacheable(const AppPair& pair, const EntityId& kms) const;
  void on_discovery(const KmsDiscoveryResponse& m, Outbox& out);
  void on_delivery(const Envelope& env, const KeyDelivery& m, Outbox& out);

  NodeId node_;
  EntityId name_;
  const Topology* topology_;
  VkmsConfig config_;

  std::map<AppPair, std::pair<EntityId, SimTime>> cache_;
  std::map<AppPair, std::deque<Request>> awaiting_discovery_;
  std::map<DeliveryKey, std::deque<Request>> awaiting_delivery_;
  std::uint64_t next_token_ = 0;
  std::size_t discovery_requests_ = 0;
  std::size_t cache_hits_ = 0;
  std::size_t orphans_ = 0;
};

}  // namespace qkdrelay
