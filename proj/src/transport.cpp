#include "qkdrelay/transport.hpp"

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

namespace {

void flip(Octets& bytes) {
  if (!bytes.empty()) bytes.front() ^= 0x01;
}

}  // namespace

void corrupt_payload(Message& msg) {
  if (auto* m = std::get_if<ExtKeyRequest>(&msg)) flip(m->value_relay_key);
  if (auto* m = std::get_if<KeyRelay>(&msg)) flip(m->encrypted_relay_key);
  if (auto* m = std::get_if<KeyDelivery>(&msg)) flip(m->material);
}

void Transport::register_entity(EntityInfo info) {
  auto id = info.id;
  entities_.insert_or_assign(id, std::move(info));
}

const EntityInfo& Transport::info(const EntityId& id) const {
  auto it = entities_.find(id);
  if (it == entities_.end()) throw UnknownEntity(id);
  return it->second;
}

Channel Transport::classify(const EntityId& from, const EntityId& to) const {
  const auto& a = info(from);
  const auto& b = info(to);
  if (a.kind == EntityKind::controller || b.kind == EntityKind::controller) return Channel::control;
  return a.node == b.node ? Channel::intra_node : Channel::inter_node;
}

void Transport::add_fault(FaultRule rule) { faults_.push_back(ActiveFault{std::move(rule), 0}); }

std::optional<Envelope> Transport::send(const EntityId& from, const EntityId& to, Message msg,
                                        SimTime now) {
  Envelope env;
  env.channel = classify(from, to);
  env.seq = ++next_seq_[from];
  env.from = from;
  env.to = to;
  env.payload = std::move(msg);

  const auto type = message_type(env.payload);
  bool drop = false;
  for (auto& f : faults_) {
    if (f.rule.type && *f.rule.type != type) continue;
    if (++f.seen != f.rule.nth) continue;
    if (f.rule.kind == FaultKind::drop) {
      drop = true;
    } else {
      corrupt_payload(env.payload);
      ++corrupted_;
    }
  }
  if (drop) {
    ++dropped_;
    return std::nullopt;
  }
  in_flight_.push_back(InFlight{now + latency_, env});
  return env;
}

SimTime Transport::next_delivery_time() const {
  if (in_flight_.empty()) throw Error("transport is idle");
  return in_flight_.front().deliver_at;
}

Envelope Transport::deliver_next() {
  if (in_flight_.empty()) throw Error("transport is idle");
  auto env = std::move(in_flight_.front().env);
  in_flight_.pop_front();
  log_.push_back(env);
  return env;
}

std::vector<Envelope> Transport::drain() {
  std::vector<Envelope> out;
  out.swap(log_);
  return out;
}

}  // namespace qkdrelay
