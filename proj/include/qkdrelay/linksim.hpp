#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qkdrelay/ids.hpp"
#include "qkdrelay/octets.hpp"
#include "qkdrelay/topology.hpp"

namespace qkdrelay {

enum class KeyState { available, reserved, consumed };

// Which endpoint of its link a pool copy sits on.
enum class LinkEnd { a, b };

struct KeyRecord {
  KeyId id;
  Octets material;
  KeyState state = KeyState::available;
};

struct PoolCounters {
  std::size_t available = 0;
  std::size_t reserved = 0;
  std::size_t consumed = 0;
  std::size_t draws = 0;  // keys taken by reserve_next at this endpoint

  bool operator==(const PoolCounters&) const = default;
};

// One endpoint's copy of a link's synchronized key store.
//
// Both copies hold the same (id, material) sequence. Fresh keys are drawn only
// from this endpoint's share of the sequence (even generation indexes for end
// a, odd for end b) so the two endpoints never hand out the same key to
// different requests. Keys drawn by the peer are consumed here by id.
class KeyPool {
 public:
  KeyPool(LinkId link, EntityId owner, LinkEnd end);

  const LinkId& link() const { return link_; }
  const EntityId& owner() const { return owner_; }
  LinkEnd end() const { return end_; }

  void append(KeyId id, Octets material);

  // Oldest available key in this endpoint's share, moved to reserved.
  std::optional<KeyRecord> reserve_next(std::string_view accessor);

  // available -> consumed, for a key the peer endpoint drew.
  std::optional<Octets> take(std::string_view id, std::string_view accessor);

  // reserved -> consumed. False if the key is not reserved here.
  bool consume(std::string_view id, std::string_view accessor);

  const KeyRecord* find(std::string_view id) const;
  PoolCounters counters() const;
  std::size_t size() const { return records_.size(); }
  std::vector<std::pair<KeyId, Octets>> sequence() const;

  // Operations invoked by anyone other than the owning KMS.
  std::size_t foreign_accesses() const { return foreign_accesses_; }

 private:
  void audit(std::string_view accessor);
  bool owns_index(std::size_t index) const;

  LinkId link_;
  EntityId owner_;
  LinkEnd end_;
  std::vector<KeyRecord> records_;
  std::unordered_map<KeyId, std::size_t> index_;
  std::size_t cursor_ = 0;
  PoolCounters counters_;
  std::size_t foreign_accesses_ = 0;
};

// Stand-in for a QKD link: a seeded generator that appends identical key
// records to both endpoint pools.
class LinkSimulator {
 public:
  LinkSimulator(Link link, std::size_t key_size, std::uint64_t seed, KeyPool& end_a,
                KeyPool& end_b);

  const Link& link() const { return link_; }
  std::size_t key_size() const { return key_size_; }

  std::vector<KeyId> generate_keys(std::size_t n);

  // Generates floor(key_rate * dt + carry) keys, keeping the fractional part.
  std::size_t tick(double dt_seconds);

  // Appends a caller-chosen record to both pools.
  void inject_key(KeyId id, Octets material);

  // Material of a key generated on this link, for verification only.
  const Octets* material(std::string_view id) const;
  std::size_t generated() const { return ledger_.size(); }

 private:
  KeyId fresh_id();

  Link link_;
  std::size_t key_size_;
  std::mt19937_64 rng_;
  double carry_ = 0.0;
  KeyPool* end_a_;
  KeyPool* end_b_;
  std::unordered_map<KeyId, Octets> ledger_;
};

}  // namespace qkdrelay
