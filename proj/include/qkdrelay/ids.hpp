#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace qkdrelay {

using NodeId = std::string;
using LinkId = std::string;
using AppId = std::string;
using KeyId = std::string;
using AssociationId = std::string;

// Name of an entity on the simulated transport ("APP_A", "vKMS_3", "KMS_3d",
// "QuSeC").
using EntityId = std::string;

inline constexpr std::string_view kControllerId = "QuSeC";

// Short form of a node id used inside entity names: a node called "N<digits>"
// renders as "<digits>", anything else renders verbatim. "N3" -> "3".
std::string node_label(std::string_view node);

// A local KMS is identified by the node hosting it and the link it serves.
struct KmsId {
  NodeId node;
  LinkId link;

  // "KMS_<node label><link>", e.g. {N3, d} -> "KMS_3d".
  std::string name() const;

  auto operator<=>(const KmsId&) const = default;
};

std::string vkms_name(std::string_view node);

}  // namespace qkdrelay
