#include "qkdrelay/vkms.hpp"

namespace qkdrelay {

Vkms::Vkms(NodeId node, const Topology& topology, VkmsConfig config)
    : node_(std::move(node)), name_(vkms_name(node_)), topology_(&topology), config_(config) {}

std::optional<EntityId> Vkms::cache_lookup(const AppPair& pair, SimTime now) const {
  if (config_.cache_ttl <= 0) return std::nullopt;
  auto it = cache_.find(pair);
  if (it == cache_.end() || now - it->second.second >= config_.cache_ttl) return std::nullopt;
  return it->second.first;
}

void Vkms::cache_insert(const AppPair& pair, const EntityId& kms, SimTime now) {
  if (config_.cache_ttl <= 0) return;
  cache_.insert_or_assign(pair, std::pair{kms, now});
}

std::size_t Vkms::cache_expire(SimTime now) {
  std::size_t n = 0;
  for (auto it = cache_.begin(); it != cache_.end();) {
    if (now - it->second.second >= config_.cache_ttl) {
      it = cache_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t Vkms::pending_count() const {
  std::size_t n = 0;
  for (const auto& [_, q] : awaiting_discovery_) n += q.size();
  for (const auto& [_, q] : awaiting_delivery_) n += q.size();
  return n;
}

// Direct-path answers only.
bool Vkms::cacheable(const AppPair& pair, const EntityId& kms) const {
  const auto id = topology_->find_kms(kms);
  if (!id || id->node != node_) return false;
  auto dst = topology_->apps().find(pair.second);
  if (dst == topology_->apps().end()) return false;
  return topology_->peer_of(*id).node == dst->second;
}

void Vkms::reply_failure(const EntityId& app, const AppPair& pair, Status status, Outbox& out) {
  out.send(app, KeyDelivery{{}, {}, status, pair.first, pair.second});
}

void Vkms::on_message(const Envelope& env, Outbox& out) {
  if (const auto* m = std::get_if<GetKey>(&env.payload)) {
    accept(env, {m->app_src, m->app_dst}, out);
  } else if (const auto* m = std::get_if<GetKeyWithId>(&env.payload)) {
    accept(env, {m->app_src, m->app_dst}, out);
  } else if (const auto* m = std::get_if<KmsDiscoveryResponse>(&env.payload)) {
    on_discovery(*m, out);
  } else if (const auto* m = std::get_if<KeyDelivery>(&env.payload)) {
    on_delivery(env, *m, out);
  } else {
    ++orphans_;
  }
}

void Vkms::accept(const Envelope& env, const AppPair& pair, Outbox& out) {
  auto home = topology_->apps().find(pair.first);
  if (home == topology_->apps().end() || home->second != node_ || env.from != pair.first) {
    return reply_failure(env.from, pair, Status::failed_unknown_app, out);
  }
  Request req{++next_token_, env.from, env.payload};
  if (auto kms = cache_lookup(pair, out.now())) {
    ++cache_hits_;
    return forward(*kms, std::move(req), pair, out);
  }
  ++discovery_requests_;
  out.send(EntityId(kControllerId), KmsDiscoveryRequest{pair.first, pair.second});
  out.set_timer(config_.timeout, req.token);
  awaiting_discovery_[pair].push_back(std::move(req));
}

void Vkms::forward(const EntityId& kms, Request req, const AppPair& pair, Outbox& out) {
  out.send(kms, req.original);
  req.token = ++next_token_;
  out.set_timer(config_.timeout, req.token);
  awaiting_delivery_[DeliveryKey{kms, pair.first, pair.second}].push_back(std::move(req));
}

void Vkms::on_discovery(const KmsDiscoveryResponse& m, Outbox& out) {
  const AppPair pair{m.app_src, m.app_dst};
  auto it = awaiting_discovery_.find(pair);
  if (it == awaiting_discovery_.end() || it->second.empty()) {
    ++orphans_;
    return;
  }
  Request req = std::move(it->second.front());
  it->second.pop_front();
  if (it->second.empty()) awaiting_discovery_.erase(it);

  if (!m.id_kms || m.status != Status::ok) {
    const auto status = m.status == Status::ok ? Status::failed_no_rule : m.status;
    return reply_failure(req.app, pair, status, out);
  }
  if (cacheable(pair, *m.id_kms)) cache_insert(pair, *m.id_kms, out.now());
  forward(*m.id_kms, std::move(req), pair, out);
}

void Vkms::on_delivery(const Envelope& env, const KeyDelivery& m, Outbox& out) {
  auto it = awaiting_delivery_.find(DeliveryKey{env.from, m.app_src, m.app_dst});
  if (it == awaiting_delivery_.end() || it->second.empty()) {
    ++orphans_;
    return;
  }
  const auto app = it->second.front().app;
  it->second.pop_front();
  if (it->second.empty()) awaiting_delivery_.erase(it);
  out.send(app, m);
}

void Vkms::on_timer(std::uint64_t token, Outbox& out) {
  auto expire = [&](auto& table, auto pair_of) {
    for (auto it = table.begin(); it != table.end(); ++it) {
      auto& q = it->second;
      for (auto r = q.begin(); r != q.end(); ++r) {
        if (r->token != token) continue;
        const auto app = r->app;
        const AppPair pair = pair_of(it->first);
        q.erase(r);
        if (q.empty()) table.erase(it);
        reply_failure(app, pair, Status::failed_timeout, out);
        return true;
      }
    }
    return false;
  };
  if (expire(awaiting_discovery_, [](const AppPair& p) { return p; })) return;
  expire(awaiting_delivery_,
         [](const DeliveryKey& k) { return AppPair{std::get<1>(k), std::get<2>(k)}; });
}

}  // namespace qkdrelay
