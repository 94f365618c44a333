#include "qkdrelay/protocol.hpp"

#include <array>
#include <set>

#include <nlohmann/json.hpp>

#include "qkdrelay/errors.hpp"

namespace qkdrelay {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kStatusNames = {
    "ok", "failed_no_key", "failed_no_rule", "failed_decrypt", "failed_timeout", "failed_unknown_app"};

constexpr std::array<std::string_view, 12> kTypeNames = {
    "GetKey",        "GetKeyWithId", "KmsDiscoveryRequest", "KmsDiscoveryResponse",
    "RelayPathInstall", "RelayProcessRequest", "ExtKeyRequest", "KeyRelay",
    "KeyRelayResponse", "AckRequest", "RelayProcessResponse", "KeyDelivery"};

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

json to_body(const GetKey& m) { return {{"app_src", m.app_src}, {"app_dst", m.app_dst}}; }
json to_body(const GetKeyWithId& m) {
  return {{"app_src", m.app_src}, {"app_dst", m.app_dst}, {"key_id", m.key_id}};
}
json to_body(const KmsDiscoveryRequest& m) { return {{"app_src", m.app_src}, {"app_dst", m.app_dst}}; }
json to_body(const KmsDiscoveryResponse& m) {
  return {{"app_src", m.app_src},
          {"app_dst", m.app_dst},
          {"id_kms", opt(m.id_kms)},
          {"status", to_string(m.status)}};
}
json to_body(const RelayPathInstall& m) {
  return {{"id_association", m.id_association},
          {"prev_hop", opt(m.prev_hop)},
          {"next_hop", opt(m.next_hop)},
          {"app_src", m.app_src},
          {"app_dst", m.app_dst}};
}
json to_body(const RelayProcessRequest& m) {
  return {{"app_src", m.app_src}, {"app_dst", m.app_dst}, {"id_relay_key", m.id_relay_key}};
}
json to_body(const ExtKeyRequest& m) {
  return {{"id_relay_key", m.id_relay_key},
          {"value_relay_key", to_hex(m.value_relay_key)},
          {"app_src", m.app_src},
          {"app_dst", m.app_dst},
          {"id_association", m.id_association},
          {"ext", json(m.ext)}};
}
json to_body(const KeyRelay& m) {
  return {{"encrypted_relay_key", to_hex(m.encrypted_relay_key)},
          {"id_key_encryption", m.id_key_encryption},
          {"id_relay_key", m.id_relay_key},
          {"app_src", m.app_src},
          {"app_dst", m.app_dst},
          {"id_association", m.id_association}};
}
json to_body(const KeyRelayResponse& m) {
  return {{"status", to_string(m.status)}, {"id_relay_key", m.id_relay_key}};
}
json to_body(const AckRequest& m) {
  return {{"id_relay_key", m.id_relay_key},
          {"ack_status", to_string(m.ack_status)},
          {"app_src", m.app_src},
          {"app_dst", m.app_dst},
          {"ext", json(m.ext)}};
}
json to_body(const RelayProcessResponse& m) {
  return {{"status", to_string(m.status)}, {"id_relay_key", m.id_relay_key}};
}
json to_body(const KeyDelivery& m) {
  return {{"key_id", m.key_id},
          {"material", to_hex(m.material)},
          {"status", to_string(m.status)},
          {"app_src", m.app_src},
          {"app_dst", m.app_dst}};
}

// Reads body fields by name, remembering which were consumed so that
// leftovers can be rejected.
class BodyReader {
 public:
  explicit BodyReader(const json& body) : body_(body) {
    if (!body_.is_object()) throw CodecError("body", "expected an object");
  }

  std::string str(const char* key) {
    const auto& v = field(key);
    if (!v.is_string()) throw CodecError(path(key), "expected a string");
    return v.get<std::string>();
  }

  std::optional<std::string> nullable_str(const char* key) {
    const auto& v = field(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) throw CodecError(path(key), "expected a string or null");
    return v.get<std::string>();
  }

  Octets octets(const char* key) {
    auto bytes = from_hex(str(key));
    if (!bytes) throw CodecError(path(key), "expected hex octets");
    return *bytes;
  }

  Status status(const char* key) {
    auto s = parse_status(str(key));
    if (!s) throw CodecError(path(key), "unknown status");
    return *s;
  }

  Extension ext(const char* key) {
    const auto& v = field(key);
    if (!v.is_object()) throw CodecError(path(key), "expected an object");
    Extension out;
    for (const auto& [k, val] : v.items()) {
      if (!val.is_string()) throw CodecError(path(key) + "." + k, "expected a string");
      out.emplace(k, val.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, _] : body_.items()) {
      if (!used_.count(k)) throw CodecError(path(k.c_str()), "unexpected field");
    }
  }

 private:
  static std::string path(const char* key) { return std::string("body.") + key; }

  const json& field(const char* key) {
    if (!body_.contains(key)) throw CodecError(path(key), "missing field");
    used_.insert(key);
    return body_.at(key);
  }

  const json& body_;
  std::set<std::string> used_;
};

Message from_body(std::string_view type, const json& body) {
  BodyReader r(body);
  Message msg;
  if (type == "GetKey") {
    GetKey m;
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    msg = m;
  } else if (type == "GetKeyWithId") {
    GetKeyWithId m;
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    m.key_id = r.str("key_id");
    msg = m;
  } else if (type == "KmsDiscoveryRequest") {
    KmsDiscoveryRequest m;
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    msg = m;
  } else if (type == "KmsDiscoveryResponse") {
    KmsDiscoveryResponse m;
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    m.id_kms = r.nullable_str("id_kms");
    m.status = r.status("status");
    msg = m;
  } else if (type == "RelayPathInstall") {
    RelayPathInstall m;
    m.id_association = r.str("id_association");
    m.prev_hop = r.nullable_str("prev_hop");
    m.next_hop = r.nullable_str("next_hop");
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    msg = m;
  } else if (type == "RelayProcessRequest") {
    RelayProcessRequest m;
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    m.id_relay_key = r.str("id_relay_key");
    msg = m;
  } else if (type == "ExtKeyRequest") {
    ExtKeyRequest m;
    m.id_relay_key = r.str("id_relay_key");
    m.value_relay_key = r.octets("value_relay_key");
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    m.id_association = r.str("id_association");
    m.ext = r.ext("ext");
    msg = m;
  } else if (type == "KeyRelay") {
    KeyRelay m;
    m.encrypted_relay_key = r.octets("encrypted_relay_key");
    m.id_key_encryption = r.str("id_key_encryption");
    m.id_relay_key = r.str("id_relay_key");
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    m.id_association = r.str("id_association");
    msg = m;
  } else if (type == "KeyRelayResponse") {
    KeyRelayResponse m;
    m.status = r.status("status");
    m.id_relay_key = r.str("id_relay_key");
    msg = m;
  } else if (type == "AckRequest") {
    AckRequest m;
    m.id_relay_key = r.str("id_relay_key");
    m.ack_status = r.status("ack_status");
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    m.ext = r.ext("ext");
    msg = m;
  } else if (type == "RelayProcessResponse") {
    RelayProcessResponse m;
    m.status = r.status("status");
    m.id_relay_key = r.str("id_relay_key");
    msg = m;
  } else if (type == "KeyDelivery") {
    KeyDelivery m;
    m.key_id = r.str("key_id");
    m.material = r.octets("material");
    m.status = r.status("status");
    m.app_src = r.str("app_src");
    m.app_dst = r.str("app_dst");
    msg = m;
  } else {
    throw CodecError("type", "unknown message type '" + std::string(type) + "'");
  }
  r.finish();
  return msg;
}

}  // namespace

std::string_view to_string(Status status) { return kStatusNames[static_cast<std::size_t>(status)]; }

std::optional<Status> parse_status(std::string_view text) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == text) return static_cast<Status>(i);
  }
  return std::nullopt;
}

std::string_view message_type(const Message& msg) { return kTypeNames[msg.index()]; }

bool carries_key_material(const Message& msg) {
  return std::holds_alternative<ExtKeyRequest>(msg) || std::holds_alternative<KeyRelay>(msg) ||
         std::holds_alternative<KeyDelivery>(msg);
}

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::intra_node: return "intra_node";
    case Channel::inter_node: return "inter_node";
    case Channel::control: return "control";
  }
  return "intra_node";
}

std::optional<Channel> parse_channel(std::string_view text) {
  if (text == "intra_node") return Channel::intra_node;
  if (text == "inter_node") return Channel::inter_node;
  if (text == "control") return Channel::control;
  return std::nullopt;
}

std::string encode(const Envelope& env) {
  json doc = {{"seq", env.seq},
              {"from", env.from},
              {"to", env.to},
              {"channel", to_string(env.channel)},
              {"type", message_type(env.payload)},
              {"body", std::visit([](const auto& m) { return to_body(m); }, env.payload)}};
  return doc.dump();
}

Envelope decode(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CodecError("envelope", e.what());
  }
  if (!doc.is_object()) throw CodecError("envelope", "expected an object");
  static const std::set<std::string> kKeys = {"seq", "from", "to", "channel", "type", "body"};
  for (const auto& [k, _] : doc.items()) {
    if (!kKeys.count(k)) throw CodecError(k, "unexpected envelope field");
  }
  for (const auto& k : kKeys) {
    if (!doc.contains(k)) throw CodecError(k, "missing envelope field");
  }
  Envelope env;
  if (!doc["seq"].is_number_unsigned()) throw CodecError("seq", "expected an unsigned integer");
  env.seq = doc["seq"].get<std::uint64_t>();
  if (!doc["from"].is_string()) throw CodecError("from", "expected a string");
  if (!doc["to"].is_string()) throw CodecError("to", "expected a string");
  if (!doc["type"].is_string()) throw CodecError("type", "expected a string");
  if (!doc["channel"].is_string()) throw CodecError("channel", "expected a string");
  env.from = doc["from"].get<std::string>();
  env.to = doc["to"].get<std::string>();
  auto channel = parse_channel(doc["channel"].get<std::string>());
  if (!channel) throw CodecError("channel", "unknown channel class");
  env.channel = *channel;
  env.payload = from_body(doc["type"].get<std::string>(), doc["body"]);
  return env;
}

Octets otp_xor(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
  Octets out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

}  // namespace qkdrelay
