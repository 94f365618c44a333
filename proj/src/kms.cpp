#include "qkdrelay/kms.hpp"

namespace qkdrelay {

Kms::Kms(KmsId kms_id, EntityId peer, EntityId vkms, LinkEnd end, KmsConfig config)
    : name_(kms_id.name()),
      kms_id_(std::move(kms_id)),
      peer_(std::move(peer)),
      vkms_(std::move(vkms)),
      config_(config),
      pool_(kms_id_.link, name_, end) {}

bool Kms::install_rule(const RelayPathInstall& msg) {
  RelayRule rule{msg.id_association, msg.prev_hop, msg.next_hop, msg.app_src, msg.app_dst};
  auto it = slots_.find(msg.id_association);
  if (it != slots_.end() && it->second.rule == rule) return false;
  slots_.insert_or_assign(msg.id_association, RuleSlot{std::move(rule), ++install_counter_, false});
  return true;
}

std::map<AssociationId, RelayRule> Kms::rules() const {
  std::map<AssociationId, RelayRule> out;
  for (const auto& [id, slot] : slots_) out.emplace(id, slot.rule);
  return out;
}

const DeliveredKey* Kms::find_delivered(const KeyId& id, const AppId& app_src,
                                        const AppId& app_dst) const {
  auto it = delivered_.find({id, app_src, app_dst});
  return it == delivered_.end() ? nullptr : &it->second;
}

template <typename Pred>
Kms::RuleSlot* Kms::claim_rule(Pred pred) {
  RuleSlot* best = nullptr;
  for (auto& [_, slot] : slots_) {
    if (slot.used || !pred(slot.rule)) continue;
    if (!best || slot.installed < best->installed) best = &slot;
  }
  if (best) best->used = true;
  return best;
}

void Kms::await(const KeyId& relay_key, Pending pending, Outbox& out) {
  pending.timer = ++next_timer_;
  timers_.emplace(pending.timer, relay_key);
  out.set_timer(config_.timeout, pending.timer);
  pending_.insert_or_assign(relay_key, std::move(pending));
}

void Kms::store_delivered(const KeyId& id, Octets material, const AppId& src, const AppId& dst,
                          SimTime now) {
  delivered_.insert_or_assign({id, src, dst}, DeliveredKey{id, std::move(material), src, dst, now});
}

void Kms::expire_delivered(SimTime now) {
  if (!config_.delivered_ttl) return;
  for (auto it = delivered_.begin(); it != delivered_.end();) {
    if (now - it->second.stored_at > *config_.delivered_ttl) {
      it = delivered_.erase(it);
    } else {
      ++it;
    }
  }
}

void Kms::on_message(const Envelope& env, Outbox& out) {
  std::visit([&](const auto& m) { handle(env, m, out); }, env.payload);
}

void Kms::on_timer(std::uint64_t token, Outbox& out) {
  auto it = timers_.find(token);
  if (it == timers_.end()) return;
  const auto relay_key = it->second;
  timers_.erase(it);
  auto p = pending_.find(relay_key);
  if (p == pending_.end() || p->second.timer != token) return;
  complete(relay_key, Status::failed_timeout, out);
}

// Resolves a pending relay stage and reports the status one step back
// towards the initiator.
void Kms::complete(const KeyId& relay_key, Status status, Outbox& out) {
  auto it = pending_.find(relay_key);
  if (it == pending_.end()) {
    ++orphans_;
    return;
  }
  Pending p = std::move(it->second);
  pending_.erase(it);
  timers_.erase(p.timer);

  switch (p.stage) {
    case Stage::initiator: {
      pool_.consume(p.link_key, name_);
      KeyDelivery d;
      d.status = status;
      d.app_src = p.app_src;
      d.app_dst = p.app_dst;
      if (status == Status::ok) {
        d.key_id = p.link_key;
        d.material = std::move(p.relay_key);
      }
      out.send(p.upstream, std::move(d));
      break;
    }
    case Stage::relay_ingress:
      out.send(p.upstream, RelayProcessResponse{status, relay_key});
      break;
    case Stage::link_egress:
      pool_.consume(p.link_key, name_);
      out.send(p.upstream, AckRequest{relay_key, status, p.app_src, p.app_dst, {}});
      break;
    case Stage::link_ingress:
      out.send(p.upstream, KeyRelayResponse{status, relay_key});
      break;
  }
}

void Kms::handle(const Envelope& env, const GetKey& m, Outbox& out) {
  auto fail = [&](Status s) {
    out.send(env.from, KeyDelivery{{}, {}, s, m.app_src, m.app_dst});
  };
  RuleSlot* slot = claim_rule([&](const RelayRule& r) {
    return !r.prev_hop && r.app_src == m.app_src && r.app_dst == m.app_dst;
  });
  auto key = pool_.reserve_next(name_);
  if (!key) return fail(Status::failed_no_key);

  if (!slot || !slot->rule.next_hop) {
    // Direct delivery from this link's pool.
    pool_.consume(key->id, name_);
    out.send(env.from, KeyDelivery{key->id, std::move(key->material), Status::ok, m.app_src, m.app_dst});
    return;
  }

  out.send(*slot->rule.next_hop, RelayProcessRequest{m.app_src, m.app_dst, key->id});
  Pending p{Stage::initiator, env.from, slot->rule.id_association, m.app_src, m.app_dst,
            key->id, std::move(key->material), 0};
  await(key->id, std::move(p), out);
}

void Kms::handle(const Envelope& env, const GetKeyWithId& m, Outbox& out) {
  expire_delivered(out.now());
  // A relayed key is stored under the initiator's ordering of the pair.
  for (const auto& k : {std::tuple{m.key_id, m.app_dst, m.app_src},
                        std::tuple{m.key_id, m.app_src, m.app_dst}}) {
    auto it = delivered_.find(k);
    if (it == delivered_.end()) continue;
    auto material = std::move(it->second.material);
    delivered_.erase(it);
    out.send(env.from, KeyDelivery{m.key_id, std::move(material), Status::ok, m.app_src, m.app_dst});
    return;
  }
  if (auto material = pool_.take(m.key_id, name_)) {
    out.send(env.from, KeyDelivery{m.key_id, std::move(*material), Status::ok, m.app_src, m.app_dst});
    return;
  }
  out.send(env.from, KeyDelivery{{}, {}, Status::failed_no_key, m.app_src, m.app_dst});
}

void Kms::handle(const Envelope&, const RelayPathInstall& m, Outbox&) { install_rule(m); }

void Kms::handle(const Envelope& env, const RelayProcessRequest& m, Outbox& out) {
  RuleSlot* slot = claim_rule([&](const RelayRule& r) {
    return r.prev_hop && *r.prev_hop == env.from && r.app_src == m.app_src &&
           r.app_dst == m.app_dst;
  });
  if (!slot) {
    out.send(env.from, RelayProcessResponse{Status::failed_no_rule, m.id_relay_key});
    return;
  }
  auto material = pool_.take(m.id_relay_key, name_);
  if (!material) {
    out.send(env.from, RelayProcessResponse{Status::failed_no_key, m.id_relay_key});
    return;
  }
  const auto& rule = slot->rule;
  if (!rule.next_hop) {
    store_delivered(m.id_relay_key, std::move(*material), m.app_src, m.app_dst, out.now());
    out.send(env.from, RelayProcessResponse{Status::ok, m.id_relay_key});
    return;
  }
  out.send(*rule.next_hop, ExtKeyRequest{m.id_relay_key, *material, m.app_src, m.app_dst,
                                         rule.id_association, {}});
  await(m.id_relay_key,
        Pending{Stage::relay_ingress, env.from, rule.id_association, m.app_src, m.app_dst, {}, {}, 0},
        out);
}

void Kms::handle(const Envelope& env, const ExtKeyRequest& m, Outbox& out) {
  auto ack = [&](Status s) {
    out.send(env.from, AckRequest{m.id_relay_key, s, m.app_src, m.app_dst, m.ext});
  };
  auto it = slots_.find(m.id_association);
  if (it == slots_.end() || (it->second.rule.prev_hop && *it->second.rule.prev_hop != env.from)) {
    return ack(Status::failed_no_rule);
  }
  it->second.used = true;
  const auto& rule = it->second.rule;
  if (!rule.next_hop) {
    store_delivered(m.id_relay_key, m.value_relay_key, m.app_src, m.app_dst, out.now());
    return ack(Status::ok);
  }

  auto link_key = pool_.reserve_next(name_);
  if (!link_key) return ack(Status::failed_no_key);
  if (link_key->material.size() != m.value_relay_key.size()) {
    pool_.consume(link_key->id, name_);
    return ack(Status::failed_decrypt);
  }
  auto encrypted = otp_xor(m.value_relay_key, link_key->material);
  out.send(*rule.next_hop, KeyRelay{std::move(encrypted), link_key->id, m.id_relay_key, m.app_src,
                                    m.app_dst, m.id_association});
  await(m.id_relay_key,
        Pending{Stage::link_egress, env.from, m.id_association, m.app_src, m.app_dst, link_key->id,
                {}, 0},
        out);
}

void Kms::handle(const Envelope& env, const KeyRelay& m, Outbox& out) {
  auto respond = [&](Status s) { out.send(env.from, KeyRelayResponse{s, m.id_relay_key}); };
  auto it = slots_.find(m.id_association);
  if (it == slots_.end() || (it->second.rule.prev_hop && *it->second.rule.prev_hop != env.from)) {
    return respond(Status::failed_no_rule);
  }
  it->second.used = true;
  const auto& rule = it->second.rule;

  auto link_key = pool_.take(m.id_key_encryption, name_);
  if (!link_key || link_key->size() != m.encrypted_relay_key.size()) {
    return respond(Status::failed_decrypt);
  }
  auto relay_key = otp_xor(m.encrypted_relay_key, *link_key);
  if (!rule.next_hop) {
    store_delivered(m.id_relay_key, std::move(relay_key), m.app_src, m.app_dst, out.now());
    return respond(Status::ok);
  }
  out.send(*rule.next_hop, ExtKeyRequest{m.id_relay_key, std::move(relay_key), m.app_src,
                                         m.app_dst, m.id_association, {}});
  await(m.id_relay_key,
        Pending{Stage::link_ingress, env.from, m.id_association, m.app_src, m.app_dst, {}, {}, 0},
        out);
}

void Kms::handle(const Envelope&, const KeyRelayResponse& m, Outbox& out) {
  auto it = pending_.find(m.id_relay_key);
  if (it == pending_.end() || it->second.stage != Stage::link_egress) {
    ++orphans_;
    return;
  }
  complete(m.id_relay_key, m.status, out);
}

void Kms::handle(const Envelope&, const AckRequest& m, Outbox& out) {
  auto it = pending_.find(m.id_relay_key);
  if (it == pending_.end() ||
      (it->second.stage != Stage::relay_ingress && it->second.stage != Stage::link_ingress)) {
    ++orphans_;
    return;
  }
  complete(m.id_relay_key, m.ack_status, out);
}

void Kms::handle(const Envelope&, const RelayProcessResponse& m, Outbox& out) {
  auto it = pending_.find(m.id_relay_key);
  if (it == pending_.end() || it->second.stage != Stage::initiator) {
    ++orphans_;
    return;
  }
  complete(m.id_relay_key, m.status, out);
}

}  // namespace qkdrelay
