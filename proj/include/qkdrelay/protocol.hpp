#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "qkdrelay/ids.hpp"
#include "qkdrelay/octets.hpp"

namespace qkdrelay {

enum class Status {
  ok,
  failed_no_key,
  failed_no_rule,
  failed_decrypt,
  failed_timeout,
  failed_unknown_app,
};

std::string_view to_string(Status status);
std::optional<Status> parse_status(std::string_view text);

// Opaque extension parameters of the inter-KMS relay messages. Empty unless a
// deployment fills them in; carried through untouched.
using Extension = std::map<std::string, std::string>;

// Application -> vKMS, and vKMS -> KMS.
struct GetKey {
  AppId app_src;
  AppId app_dst;
  bool operator==(const GetKey&) const = default;
};

struct GetKeyWithId {
  AppId app_src;
  AppId app_dst;
  KeyId key_id;
  bool operator==(const GetKeyWithId&) const = default;
};

// vKMS -> QuSeC.
struct KmsDiscoveryRequest {
  AppId app_src;
  AppId app_dst;
  bool operator==(const KmsDiscoveryRequest&) const = default;
};

// QuSeC -> vKMS. id_kms is null when the controller cannot serve the pair;
// status then says why.
struct KmsDiscoveryResponse {
  AppId app_src;
  AppId app_dst;
  std::optional<std::string> id_kms;
  Status status = Status::ok;
  bool operator==(const KmsDiscoveryResponse&) const = default;
};

// QuSeC -> KMS. prev_hop is null at the initiating KMS, next_hop is null at
// the terminating KMS.
struct RelayPathInstall {
  AssociationId id_association;
  std::optional<std::string> prev_hop;
  std::optional<std::string> next_hop;
  AppId app_src;
  AppId app_dst;
  bool operator==(const RelayPathInstall&) const = default;
};

// KMS -> peer KMS.
struct RelayProcessRequest {
  AppId app_src;
  AppId app_dst;
  KeyId id_relay_key;
  bool operator==(const RelayProcessRequest&) const = default;
};

// KMS -> KMS on the same node. Carries the relayed key in the clear.
struct ExtKeyRequest {
  KeyId id_relay_key;
  Octets value_relay_key;
  AppId app_src;
  AppId app_dst;
  AssociationId id_association;
  Extension ext;
  bool operator==(const ExtKeyRequest&) const = default;
};

// KMS -> peer KMS. encrypted_relay_key = relayed key XOR link key.
struct KeyRelay {
  Octets encrypted_relay_key;
  KeyId id_key_encryption;
  KeyId id_relay_key;
  AppId app_src;
  AppId app_dst;
  AssociationId id_association;
  bool operator==(const KeyRelay&) const = default;
};

struct KeyRelayResponse {
  Status status = Status::ok;
  KeyId id_relay_key;
  bool operator==(const KeyRelayResponse&) const = default;
};

// KMS that sent a key_relay -> KMS that asked it to (ext_key_request sender).
struct AckRequest {
  KeyId id_relay_key;
  Status ack_status = Status::ok;
  AppId app_src;
  AppId app_dst;
  Extension ext;
  bool operator==(const AckRequest&) const = default;
};

struct RelayProcessResponse {
  Status status = Status::ok;
  KeyId id_relay_key;
  bool operator==(const RelayProcessResponse&) const = default;
};

// KMS -> vKMS -> application. key_id and material are empty on failure.
struct KeyDelivery {
  KeyId key_id;
  Octets material;
  Status status = Status::ok;
  AppId app_src;
  AppId app_dst;
  bool operator==(const KeyDelivery&) const = default;
};

using Message = std::variant<GetKey, GetKeyWithId, KmsDiscoveryRequest, KmsDiscoveryResponse,
                             RelayPathInstall, RelayProcessRequest, ExtKeyRequest, KeyRelay,
                             KeyRelayResponse, AckRequest, RelayProcessResponse, KeyDelivery>;

// Wire name of the message variant, e.g. "KeyRelay".
std::string_view message_type(const Message& msg);

// True for messages that carry key octets (plaintext or encrypted).
bool carries_key_material(const Message& msg);

enum class Channel { intra_node, inter_node, control };

std::string_view to_string(Channel channel);
std::optional<Channel> parse_channel(std::string_view text);

struct Envelope {
  std::uint64_t seq = 0;  // per-sender, starts at 1
  EntityId from;
  EntityId to;
  Channel channel = Channel::intra_node;
  Message payload;

  bool operator==(const Envelope&) const = default;
};

// Canonical single-line JSON: {"body","channel","from","seq","to","type"}
// with sorted keys and lowercase hex octets.
std::string encode(const Envelope& env);

// Throws CodecError naming the offending field.
Envelope decode(std::string_view line);

// Bytewise XOR. Throws LengthMismatch.
Octets otp_xor(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace qkdrelay
