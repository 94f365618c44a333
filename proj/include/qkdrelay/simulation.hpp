#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/kms.hpp"
#include "qkdrelay/linksim.hpp"
#include "qkdrelay/qusec.hpp"
#include "qkdrelay/topology.hpp"
#include "qkdrelay/transport.hpp"
#include "qkdrelay/vkms.hpp"

namespace qkdrelay {

struct AppDelivery {
  SimTime at = 0;
  KeyDelivery delivery;
};

// Harness-driven application. Talks only to the vKMS of its node.
class Application : public Entity {
 public:
  Application(AppId id, NodeId node) : id_(std::move(id)), node_(std::move(node)), vkms_(vkms_name(node_)) {}

  const EntityId& id() const override { return id_; }
  const NodeId& node() const { return node_; }
  const EntityId& vkms() const { return vkms_; }

  void request_key(const AppId& peer, Outbox& out);
  void request_key_with_id(const AppId& peer, const KeyId& key_id, Outbox& out);

  const std::vector<AppDelivery>& deliveries() const { return deliveries_; }
  // Most recent successful delivery for this peer, if any.
  const AppDelivery* last_ok(const AppId& peer) const;

  void on_message(const Envelope& env, Outbox& out) override;

 private:
  AppId id_;
  NodeId node_;
  EntityId vkms_;
  std::vector<AppDelivery> deliveries_;
};

struct SimConfig {
  std::uint64_t seed = 0;
  SimTime latency = 1;
  SimTime timeout = 1000;
  SimTime cache_ttl = 0;
  std::optional<SimTime> session_lifetime;
  std::optional<SimTime> delivered_ttl;
  std::optional<WeightPolicy> policy_override;
};

// Discrete-event world: every entity of a topology wired to one transport.
// Single logical event loop; at equal timestamps deliveries run before
// timers, and both run before harness actions scheduled for that time.
class Simulation {
 public:
  explicit Simulation(Topology topology, SimConfig config = {});
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const Topology& topology() const { return topology_; }
  const SimConfig& config() const { return config_; }
  SimTime now() const { return now_; }

  Transport& transport() { return transport_; }
  Controller& controller() { return *controller_; }
  const Controller& controller() const { return *controller_; }
  Kms& kms(std::string_view name);
  const Kms& kms(std::string_view name) const;
  Vkms& vkms(std::string_view node);
  Application& app(std::string_view id);
  const Application& app(std::string_view id) const;
  LinkSimulator& link(std::string_view id);
  std::vector<const Kms*> all_kms() const;

  void request_key(const AppId& app, const AppId& peer);
  void request_key_with_id(const AppId& app, const AppId& peer, const KeyId& key_id);
  std::size_t tick_links(SimTime dt_ms, const std::optional<LinkId>& only = std::nullopt);

  // Processes everything due at or before t, then moves the clock to t.
  void advance_to(SimTime t);
  // Processes until no deliveries or timers remain.
  void run_until_idle();
  bool idle() const { return transport_.idle() && timers_.empty(); }

  // Requests still waiting on a KMS or vKMS.
  std::size_t pending_requests() const;

  // Every envelope delivered so far, in delivery order.
  const std::vector<Envelope>& trace();

  // Verification-only view of generated key material, across all links.
  const Octets* key_material(std::string_view id) const;

 private:
  class EntityOutbox;
  struct Timer {
    SimTime at;
    std::uint64_t order;
    EntityId entity;
    std::uint64_t token;
    bool operator>(const Timer& o) const { return at != o.at ? at > o.at : order > o.order; }
  };

  bool step(std::optional<SimTime> limit);
  Entity& entity(const EntityId& id);
  void send_from(const EntityId& from, const EntityId& to, Message msg);

  Topology topology_;
  SimConfig config_;
  SimTime now_ = 0;
  Transport transport_;
  std::unique_ptr<Controller> controller_;
  std::map<EntityId, std::unique_ptr<Kms>, std::less<>> kms_;
  std::map<NodeId, std::unique_ptr<Vkms>, std::less<>> vkms_;
  std::map<AppId, std::unique_ptr<Application>, std::less<>> apps_;
  std::map<LinkId, std::unique_ptr<LinkSimulator>, std::less<>> links_;
  std::map<EntityId, Entity*> entities_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::uint64_t timer_order_ = 0;
  std::vector<Envelope> trace_;
};

}  // namespace qkdrelay
