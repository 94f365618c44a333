#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkdrelay/ids.hpp"
#include "qkdrelay/protocol.hpp"

namespace qkdrelay {

// Simulated time in milliseconds.
using SimTime = std::int64_t;

enum class EntityKind { application, vkms, kms, controller };

struct EntityInfo {
  EntityId id;
  NodeId node;  // empty for the controller
  EntityKind kind = EntityKind::application;
};

// What an entity may do while handling an input: send messages and arm
// timers. Entities never touch each other directly.
class Outbox {
 public:
  virtual ~Outbox() = default;
  virtual SimTime now() const = 0;
  virtual void send(const EntityId& to, Message msg) = 0;
  virtual void set_timer(SimTime delay, std::uint64_t token) = 0;
};

// A serial actor on the transport.
class Entity {
 public:
  virtual ~Entity() = default;
  virtual const EntityId& id() const = 0;
  virtual void on_message(const Envelope& env, Outbox& out) = 0;
  virtual void on_timer(std::uint64_t /*token*/, Outbox& /*out*/) {}
};

enum class FaultKind { drop, corrupt };

// Applies to the nth matching send (1-based). With a type filter only sends
// of that message type are counted.
struct FaultRule {
  FaultKind kind = FaultKind::drop;
  std::size_t nth = 1;
  std::optional<std::string> type;
};

// Instrumented message bus. Every channel is FIFO: delivery order equals send
// order because all messages share one fixed latency. Delivered envelopes are
// appended to the log, which is the conformance trace.
class Transport {
 public:
  explicit Transport(SimTime latency = 1) : latency_(latency) {}

  void register_entity(EntityInfo info);
  bool knows(const EntityId& id) const { return entities_.count(id) != 0; }
  const EntityInfo& info(const EntityId& id) const;

  Channel classify(const EntityId& from, const EntityId& to) const;

  void add_fault(FaultRule rule);

  // Stamps seq and channel and queues the envelope for delivery at
  // now + latency. Returns nullopt when a fault rule dropped it. Throws
  // UnknownEntity.
  std::optional<Envelope> send(const EntityId& from, const EntityId& to, Message msg, SimTime now);

  bool idle() const { return in_flight_.empty(); }
  SimTime next_delivery_time() const;

  // Pops the earliest in-flight envelope and logs it.
  Envelope deliver_next();

  // Returns the log accumulated since the last drain and clears it.
  std::vector<Envelope> drain();
  const std::vector<Envelope>& log() const { return log_; }

  std::size_t dropped() const { return dropped_; }
  std::size_t corrupted() const { return corrupted_; }

 private:
  struct InFlight {
    SimTime deliver_at;
    Envelope env;
  };
  struct ActiveFault {
    FaultRule rule;
    std::size_t seen = 0;
  };

  SimTime latency_;
  std::map<EntityId, EntityInfo> entities_;
  std::map<EntityId, std::uint64_t> next_seq_;
  std::vector<ActiveFault> faults_;
  std::deque<InFlight> in_flight_;
  std::vector<Envelope> log_;
  std::size_t dropped_ = 0;
  std::size_t corrupted_ = 0;
};

// Flips the low bit of the first octet of every key-material field.
void corrupt_payload(Message& msg);

}  // namespace qkdrelay
