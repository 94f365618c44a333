#include "qkdrelay/simulation.hpp"

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

void Application::request_key(const AppId& peer, Outbox& out) {
  out.send(vkms_, GetKey{id_, peer});
}

void Application::request_key_with_id(const AppId& peer, const KeyId& key_id, Outbox& out) {
  out.send(vkms_, GetKeyWithId{id_, peer, key_id});
}

const AppDelivery* Application::last_ok(const AppId& peer) const {
  for (auto it = deliveries_.rbegin(); it != deliveries_.rend(); ++it) {
    if (it->delivery.status == Status::ok && it->delivery.app_dst == peer) return &*it;
  }
  return nullptr;
}

void Application::on_message(const Envelope& env, Outbox& out) {
  if (const auto* d = std::get_if<KeyDelivery>(&env.payload)) {
    deliveries_.push_back(AppDelivery{out.now(), *d});
  }
}

class Simulation::EntityOutbox : public Outbox {
 public:
  EntityOutbox(Simulation& sim, EntityId self) : sim_(sim), self_(std::move(self)) {}

  SimTime now() const override { return sim_.now_; }
  void send(const EntityId& to, Message msg) override { sim_.send_from(self_, to, std::move(msg)); }
  void set_timer(SimTime delay, std::uint64_t token) override {
    sim_.timers_.push(Timer{sim_.now_ + delay, ++sim_.timer_order_, self_, token});
  }

 private:
  Simulation& sim_;
  EntityId self_;
};

Simulation::Simulation(Topology topology, SimConfig config)
    : topology_(std::move(topology)), config_(config), transport_(config.latency) {
  ControllerConfig cc;
  cc.policy_override = config_.policy_override;
  cc.session_lifetime = config_.session_lifetime;
  cc.seed = config_.seed;
  controller_ = std::make_unique<Controller>(topology_, cc);
  transport_.register_entity({controller_->id(), {}, EntityKind::controller});
  entities_.emplace(controller_->id(), controller_.get());

  KmsConfig kc{config_.timeout, config_.delivered_ttl};
  VkmsConfig vc{config_.cache_ttl, config_.timeout};
  for (const auto& node : topology_.nodes()) {
    auto v = std::make_unique<Vkms>(node.id, topology_, vc);
    transport_.register_entity({v->id(), node.id, EntityKind::vkms});
    entities_.emplace(v->id(), v.get());
    vkms_.emplace(node.id, std::move(v));
  }
  for (const auto& link : topology_.links()) {
    const KmsId a{link.a, link.id};
    const KmsId b{link.b, link.id};
    auto ka = std::make_unique<Kms>(a, b.name(), vkms_name(link.a), LinkEnd::a, kc);
    auto kb = std::make_unique<Kms>(b, a.name(), vkms_name(link.b), LinkEnd::b, kc);
    auto sim = std::make_unique<LinkSimulator>(link, topology_.key_size(), config_.seed, ka->pool(),
                                               kb->pool());
    sim->generate_keys(link.initial_pool);
    for (auto* k : {ka.get(), kb.get()}) {
      transport_.register_entity({k->id(), k->kms_id().node, EntityKind::kms});
      entities_.emplace(k->id(), k);
    }
    kms_.emplace(ka->id(), std::move(ka));
    kms_.emplace(kb->id(), std::move(kb));
    links_.emplace(link.id, std::move(sim));
  }
  for (const auto& [app, node] : topology_.apps()) {
    auto a = std::make_unique<Application>(app, node);
    transport_.register_entity({a->id(), node, EntityKind::application});
    entities_.emplace(a->id(), a.get());
    apps_.emplace(app, std::move(a));
  }
}

Kms& Simulation::kms(std::string_view name) {
  auto it = kms_.find(name);
  if (it == kms_.end()) throw UnknownEntity(std::string(name));
  return *it->second;
}

const Kms& Simulation::kms(std::string_view name) const {
  auto it = kms_.find(name);
  if (it == kms_.end()) throw UnknownEntity(std::string(name));
  return *it->second;
}

Vkms& Simulation::vkms(std::string_view node) {
  auto it = vkms_.find(node);
  if (it == vkms_.end()) throw UnknownEntity(vkms_name(node));
  return *it->second;
}

Application& Simulation::app(std::string_view id) {
  auto it = apps_.find(id);
  if (it == apps_.end()) throw UnknownApp(std::string(id));
  return *it->second;
}

const Application& Simulation::app(std::string_view id) const {
  auto it = apps_.find(id);
  if (it == apps_.end()) throw UnknownApp(std::string(id));
  return *it->second;
}

LinkSimulator& Simulation::link(std::string_view id) {
  auto it = links_.find(id);
  if (it == links_.end()) throw Error("unknown link " + std::string(id));
  return *it->second;
}

std::vector<const Kms*> Simulation::all_kms() const {
  std::vector<const Kms*> out;
  for (const auto& [_, k] : kms_) out.push_back(k.get());
  return out;
}

Entity& Simulation::entity(const EntityId& id) {
  auto it = entities_.find(id);
  if (it == entities_.end()) throw UnknownEntity(id);
  return *it->second;
}

void Simulation::send_from(const EntityId& from, const EntityId& to, Message msg) {
  transport_.send(from, to, std::move(msg), now_);
}

void Simulation::request_key(const AppId& app_id, const AppId& peer) {
  auto& a = app(app_id);
  EntityOutbox out(*this, a.id());
  a.request_key(peer, out);
}

void Simulation::request_key_with_id(const AppId& app_id, const AppId& peer, const KeyId& key_id) {
  auto& a = app(app_id);
  EntityOutbox out(*this, a.id());
  a.request_key_with_id(peer, key_id, out);
}

std::size_t Simulation::tick_links(SimTime dt_ms, const std::optional<LinkId>& only) {
  std::size_t n = 0;
  for (auto& [id, sim] : links_) {
    if (only && *only != id) continue;
    n += sim->tick(static_cast<double>(dt_ms) / 1000.0);
  }
  return n;
}

bool Simulation::step(std::optional<SimTime> limit) {
  const bool has_delivery = !transport_.idle();
  const bool has_timer = !timers_.empty();
  if (!has_delivery && !has_timer) return false;

  const bool delivery_first =
      has_delivery && (!has_timer || transport_.next_delivery_time() <= timers_.top().at);
  const SimTime at = delivery_first ? transport_.next_delivery_time() : timers_.top().at;
  if (limit && at > *limit) return false;
  now_ = std::max(now_, at);

  if (delivery_first) {
    auto env = transport_.deliver_next();
    auto& target = entity(env.to);
    EntityOutbox out(*this, env.to);
    target.on_message(env, out);
  } else {
    const Timer t = timers_.top();
    timers_.pop();
    EntityOutbox out(*this, t.entity);
    entity(t.entity).on_timer(t.token, out);
  }
  return true;
}

void Simulation::advance_to(SimTime t) {
  while (step(t)) {
  }
  now_ = std::max(now_, t);
}

void Simulation::run_until_idle() {
  while (step(std::nullopt)) {
  }
}

std::size_t Simulation::pending_requests() const {
  std::size_t n = 0;
  for (const auto& [_, k] : kms_) n += k->pending_count();
  for (const auto& [_, v] : vkms_) n += v->pending_count();
  return n;
}

const std::vector<Envelope>& Simulation::trace() {
  auto fresh = transport_.drain();
  trace_.insert(trace_.end(), std::make_move_iterator(fresh.begin()),
                std::make_move_iterator(fresh.end()));
  return trace_;
}

const Octets* Simulation::key_material(std::string_view id) const {
  for (const auto& [_, sim] : links_) {
    if (const auto* m = sim->material(id)) return m;
  }
  return nullptr;
}

}  // namespace qkdrelay
