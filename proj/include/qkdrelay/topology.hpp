#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qkdrelay/ids.hpp"

namespace qkdrelay {

// Edge weight used by the controller's shortest-path computation.
enum class WeightPolicy { hop_count, inverse_key_rate, distance };

std::string_view to_string(WeightPolicy policy);
std::optional<WeightPolicy> parse_weight_policy(std::string_view text);

enum class NodeRole { simple, trusted_relay };

std::string_view to_string(NodeRole role);

struct Link {
  LinkId id;
  NodeId a;
  NodeId b;
  double key_rate = 1.0;     // keys per second
  double distance_km = 1.0;
  std::uint64_t initial_pool = 0;

  bool touches(std::string_view node) const { return a == node || b == node; }
  const NodeId& other(std::string_view node) const { return a == node ? b : a; }
  double weight(WeightPolicy policy) const;

  bool operator==(const Link&) const = default;
};

struct Node {
  NodeId id;
  NodeRole role = NodeRole::simple;
  std::vector<KmsId> kms;  // one per incident link, in link declaration order

  bool operator==(const Node&) const = default;
};

// Unvalidated description of a network. Topology::build checks it.
struct TopologyDesc {
  std::vector<NodeId> nodes;
  std::vector<Link> links;
  std::vector<std::pair<AppId, NodeId>> apps;
  WeightPolicy weight_policy = WeightPolicy::hop_count;
  std::size_t key_size = 32;
  std::optional<std::uint64_t> seed;

  bool operator==(const TopologyDesc&) const = default;
};

// Immutable, validated network model: QKD nodes, links, one KMS per link
// endpoint and the static application registry.
class Topology {
 public:
  // Throws ValidationError listing every violated invariant.
  static Topology build(TopologyDesc desc);

  // Parses the JSON topology file format. Throws ParseError on malformed
  // text and ValidationError on invariant violations.
  static Topology load(std::string_view json_text);
  static Topology load_file(const std::filesystem::path& path);

  std::string serialize() const;

  const TopologyDesc& desc() const { return desc_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return desc_.links; }
  const std::map<AppId, NodeId>& apps() const { return apps_; }
  WeightPolicy weight_policy() const { return desc_.weight_policy; }
  std::size_t key_size() const { return desc_.key_size; }
  std::optional<std::uint64_t> seed() const { return desc_.seed; }

  bool has_node(std::string_view id) const;
  const Node& node(std::string_view id) const;
  const Link& link(std::string_view id) const;
  std::vector<const Link*> incident_links(std::string_view node) const;

  // Node hosting a registered application. Throws UnknownApp.
  const NodeId& resolve_app(std::string_view app) const;

  // Inverse of KmsId::name() for KMSs present in this topology.
  std::optional<KmsId> find_kms(std::string_view name) const;
  std::vector<KmsId> all_kms() const;

  // KMS at the far end of this KMS's link.
  KmsId peer_of(const KmsId& kms) const;

  bool operator==(const Topology& other) const { return desc_ == other.desc_; }

 private:
  explicit Topology(TopologyDesc desc);

  TopologyDesc desc_;
  std::vector<Node> nodes_;
  std::map<AppId, NodeId> apps_;
  std::map<std::string, std::size_t, std::less<>> node_index_;
  std::map<std::string, std::size_t, std::less<>> link_index_;
  std::map<std::string, KmsId, std::less<>> kms_by_name_;
};

}  // namespace qkdrelay
