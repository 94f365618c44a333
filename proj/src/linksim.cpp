#include "qkdrelay/linksim.hpp"

#include <cmath>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

KeyPool::KeyPool(LinkId link, EntityId owner, LinkEnd end)
    : link_(std::move(link)), owner_(std::move(owner)), end_(end) {}

void KeyPool::audit(std::string_view accessor) {
  if (accessor != owner_) ++foreign_accesses_;
}

bool KeyPool::owns_index(std::size_t index) const {
  return (index % 2 == 0) == (end_ == LinkEnd::a);
}

void KeyPool::append(KeyId id, Octets material) {
  index_.emplace(id, records_.size());
  records_.push_back(KeyRecord{std::move(id), std::move(material), KeyState::available});
  ++counters_.available;
}

std::optional<KeyRecord> KeyPool::reserve_next(std::string_view accessor) {
  audit(accessor);
  while (cursor_ < records_.size() &&
         (!owns_index(cursor_) || records_[cursor_].state != KeyState::available)) {
    ++cursor_;
  }
  if (cursor_ >= records_.size()) return std::nullopt;
  auto& rec = records_[cursor_++];
  rec.state = KeyState::reserved;
  --counters_.available;
  ++counters_.reserved;
  ++counters_.draws;
  return rec;
}

std::optional<Octets> KeyPool::take(std::string_view id, std::string_view accessor) {
  audit(accessor);
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  auto& rec = records_[it->second];
  if (rec.state != KeyState::available) return std::nullopt;
  rec.state = KeyState::consumed;
  --counters_.available;
  ++counters_.consumed;
  return rec.material;
}

bool KeyPool::consume(std::string_view id, std::string_view accessor) {
  audit(accessor);
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return false;
  auto& rec = records_[it->second];
  if (rec.state != KeyState::reserved) return false;
  rec.state = KeyState::consumed;
  --counters_.reserved;
  ++counters_.consumed;
  return true;
}

const KeyRecord* KeyPool::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

PoolCounters KeyPool::counters() const { return counters_; }

std::vector<std::pair<KeyId, Octets>> KeyPool::sequence() const {
  std::vector<std::pair<KeyId, Octets>> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.emplace_back(r.id, r.material);
  return out;
}

namespace {

// FNV-1a, used to mix the link id into the generator seed reproducibly.
std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::string_view link) {
  const std::uint64_t mix = fnv1a(link);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(mix), static_cast<std::uint32_t>(mix >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

LinkSimulator::LinkSimulator(Link link, std::size_t key_size, std::uint64_t seed, KeyPool& end_a,
                             KeyPool& end_b)
    : link_(std::move(link)),
      key_size_(key_size),
      rng_(seeded_engine(seed, link_.id)),
      end_a_(&end_a),
      end_b_(&end_b) {}

KeyId LinkSimulator::fresh_id() {
  for (;;) {
    Octets raw(16);
    for (std::size_t i = 0; i < raw.size(); i += 8) {
      const auto word = rng_();
      for (std::size_t j = 0; j < 8; ++j) raw[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
    }
    auto id = to_hex(raw);
    if (!ledger_.count(id)) return id;
  }
}

std::vector<KeyId> LinkSimulator::generate_keys(std::size_t n) {
  std::vector<KeyId> ids;
  ids.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto id = fresh_id();
    Octets material(key_size_);
    for (std::size_t i = 0; i < key_size_; i += 8) {
      const auto word = rng_();
      for (std::size_t j = 0; j < 8 && i + j < key_size_; ++j)
        material[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
    }
    inject_key(id, std::move(material));
    ids.push_back(std::move(id));
  }
  return ids;
}

std::size_t LinkSimulator::tick(double dt_seconds) {
  if (!(dt_seconds > 0.0) || !(link_.key_rate > 0.0)) return 0;
  const double total = link_.key_rate * dt_seconds + carry_;
  const double whole = std::floor(total);
  carry_ = total - whole;
  const auto n = static_cast<std::size_t>(whole);
  generate_keys(n);
  return n;
}

void LinkSimulator::inject_key(KeyId id, Octets material) {
  if (!ledger_.emplace(id, material).second) throw Error("duplicate key id " + id + " on link " + link_.id);
  end_a_->append(id, material);
  end_b_->append(std::move(id), std::move(material));
}

const Octets* LinkSimulator::material(std::string_view id) const {
  auto it = ledger_.find(std::string(id));
  return it == ledger_.end() ? nullptr : &it->second;
}

}  // namespace qkdrelay
