#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>

#include "qkdrelay/ids.hpp"
#include "qkdrelay/linksim.hpp"
#include "qkdrelay/protocol.hpp"
#include "qkdrelay/transport.hpp"

namespace qkdrelay {

// This KMS's role in one association, as installed by the controller.
struct RelayRule {
  AssociationId id_association;
  std::optional<EntityId> prev_hop;  // none: this KMS initiates
  std::optional<EntityId> next_hop;  // none: this KMS terminates
  AppId app_src;
  AppId app_dst;

  bool operator==(const RelayRule&) const = default;
};

struct KmsConfig {
  SimTime timeout = 1000;
  std::optional<SimTime> delivered_ttl;  // none: relayed keys wait forever
};

struct DeliveredKey {
  KeyId id;
  Octets material;
  AppId app_src;
  AppId app_dst;
  SimTime stored_at = 0;
};

// Local KMS bound to one QKD link endpoint. Serves keys from its own pool and
// executes its part of the hop-by-hop relay.
class Kms : public Entity {
 public:
  Kms(KmsId kms_id, EntityId peer, EntityId vkms, LinkEnd end, KmsConfig config = {});

  const EntityId& id() const override { return name_; }
  const KmsId& kms_id() const { return kms_id_; }
  const EntityId& peer() const { return peer_; }

  KeyPool& pool() { return pool_; }
  const KeyPool& pool() const { return pool_; }

  // Stores or overwrites the rule. Returns true if the table changed.
  bool install_rule(const RelayPathInstall& msg);
  std::map<AssociationId, RelayRule> rules() const;

  std::size_t delivered_count() const { return delivered_.size(); }
  const DeliveredKey* find_delivered(const KeyId& id, const AppId& app_src,
                                     const AppId& app_dst) const;

  std::size_t pending_count() const { return pending_.size(); }
  std::size_t orphan_count() const { return orphans_; }

  void on_message(const Envelope& env, Outbox& out) override;
  void on_timer(std::uint64_t token, Outbox& out) override;

 private:
  enum class Stage {
    initiator,      // drew K1, waiting for relay_process_response
    relay_ingress,  // got relay_process_request, waiting for ack_request
    link_egress,    // sent key_relay, waiting for key_relay_response
    link_ingress,   // got key_relay and forwarded, waiting for ack_request
  };

  struct Pending {
    Stage stage;
    EntityId upstream;
    AssociationId id_association;
    AppId app_src;
    AppId app_dst;
    KeyId link_key;  // K1 at the initiator, K2 at a link egress
    Octets relay_key;
    std::uint64_t timer = 0;
  };

  struct RuleSlot {
    RelayRule rule;
    std::uint64_t installed = 0;
    bool used = false;
  };

  void handle(const Envelope& env, const GetKey& m, Outbox& out);
  void handle(const Envelope& env, const GetKeyWithId& m, Outbox& out);
  void handle(const Envelope& env, const RelayPathInstall& m, Outbox& out);
  void handle(const Envelope& env, const RelayProcessRequest& m, Outbox& out);
  void handle(const Envelope& env, const ExtKeyRequest& m, Outbox& out);
  void handle(const Envelope& env, const KeyRelay& m, Outbox& out);
  void handle(const Envelope& env, const KeyRelayResponse& m, Outbox& out);
  void handle(const Envelope& env, const AckRequest& m, Outbox& out);
  void handle(const Envelope& env, const RelayProcessResponse& m, Outbox& out);
  template <typename M>
  void handle(const Envelope&, const M&, Outbox&) {
    ++orphans_;
  }

  // Oldest unused rule matching the predicate, marked used.
  template <typename Pred>
  RuleSlot* claim_rule(Pred pred);

  void await(const KeyId& relay_key, Pending pending, Outbox& out);
  void complete(const KeyId& relay_key, Status status, Outbox& out);
  void store_delivered(const KeyId& id, Octets material, const AppId& src, const AppId& dst,
                       SimTime now);
  void expire_delivered(SimTime now);

  EntityId name_;
  KmsId kms_id_;
  EntityId peer_;
  EntityId vkms_;
  KmsConfig config_;
  KeyPool pool_;

  std::map<AssociationId, RuleSlot> slots_;
  std::uint64_t install_counter_ = 0;

  std::map<std::tuple<KeyId, AppId, AppId>, DeliveredKey> delivered_;
  std::map<KeyId, Pending> pending_;
  std::map<std::uint64_t, KeyId> timers_;
  std::uint64_t next_timer_ = 0;
  std::size_t orphans_ = 0;
};

}  // namespace qkdrelay
