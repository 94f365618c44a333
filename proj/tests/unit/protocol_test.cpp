#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "fixtures.hpp"
#include "qkdrelay/errors.hpp"
#include "qkdrelay/protocol.hpp"
#include "qkdrelay/transport.hpp"

using namespace qkdrelay;

namespace {

struct Gen {
  std::mt19937_64 rng;

  std::string str() {
    static const char* pool[] = {"APP_A", "APP_B", "KMS_1b", "", "x\"y", "ünï", "0123abcd"};
    return pool[rng() % 7];
  }
  Octets octets() {
    Octets o(rng() % 40);
    for (auto& b : o) b = static_cast<std::uint8_t>(rng());
    return o;
  }
  std::optional<std::string> opt() {
    if (rng() % 3 == 0) return std::nullopt;
    return str();
  }
  Status status() { return static_cast<Status>(rng() % 6); }
  Extension ext() {
    Extension e;
    if (rng() % 2) e["k" + str()] = str();
    return e;
  }

  Message message() {
    switch (rng() % 12) {
      case 0: return GetKey{str(), str()};
      case 1: return GetKeyWithId{str(), str(), str()};
      case 2: return KmsDiscoveryRequest{str(), str()};
      case 3: return KmsDiscoveryResponse{str(), str(), opt(), status()};
      case 4: return RelayPathInstall{str(), opt(), opt(), str(), str()};
      case 5: return RelayProcessRequest{str(), str(), str()};
      case 6: return ExtKeyRequest{str(), octets(), str(), str(), str(), ext()};
      case 7: return KeyRelay{octets(), str(), str(), str(), str(), str()};
      case 8: return KeyRelayResponse{status(), str()};
      case 9: return AckRequest{str(), status(), str(), str(), ext()};
      case 10: return RelayProcessResponse{status(), str()};
      default: return KeyDelivery{str(), octets(), status(), str(), str()};
    }
  }
};

std::string codec_field(std::string_view line) {
  try {
    decode(line);
  } catch (const CodecError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(Otp, IdentityAndInvolution) {
  Octets k1(32), k2(32);
  std::mt19937_64 rng(1);
  for (auto& b : k1) b = static_cast<std::uint8_t>(rng());
  for (auto& b : k2) b = static_cast<std::uint8_t>(rng());
  EXPECT_EQ(otp_xor(k1, Octets(32, 0)), k1);
  EXPECT_EQ(otp_xor(otp_xor(k1, k2), k2), k1);
  EXPECT_EQ(otp_xor(Octets(32, 0xFF), Octets(32, 0x0F)), Octets(32, 0xF0));
}

TEST(Otp, LengthMismatch) { EXPECT_THROW(otp_xor(Octets(3), Octets(4)), LengthMismatch); }

TEST(Codec, TerminalHopEncodesNull) {
  Envelope env{1, "QuSeC", "KMS_4d", Channel::control,
               RelayPathInstall{"ab", std::string("KMS_3d"), std::nullopt, "APP_A", "APP_B"}};
  const auto doc = nlohmann::json::parse(encode(env));
  EXPECT_TRUE(doc["body"]["next_hop"].is_null());
  EXPECT_EQ(doc["body"]["prev_hop"], "KMS_3d");
  EXPECT_EQ(doc["type"], "RelayPathInstall");
}

TEST(Codec, CanonicalForm) {
  Envelope env{7, "KMS_3d", "KMS_4d", Channel::inter_node,
               KeyRelay{Octets{0xAB, 0x01}, "k2", "k1", "APP_A", "APP_B", "as"}};
  const auto line = encode(env);
  EXPECT_EQ(line,
            R"({"body":{"app_dst":"APP_B","app_src":"APP_A","encrypted_relay_key":"ab01",)"
            R"("id_association":"as","id_key_encryption":"k2","id_relay_key":"k1"},)"
            R"("channel":"inter_node","from":"KMS_3d","seq":7,"to":"KMS_4d","type":"KeyRelay"})");
  EXPECT_EQ(line.find('\n'), std::string::npos);
}

TEST(Codec, RoundTripProperty) {
  Gen g{std::mt19937_64(42)};
  const Channel channels[] = {Channel::intra_node, Channel::inter_node, Channel::control};
  for (int i = 0; i < 2000; ++i) {
    Envelope env{g.rng() % 100000 + 1, g.str(), g.str(), channels[g.rng() % 3], g.message()};
    const auto line = encode(env);
    const auto back = decode(line);
    ASSERT_EQ(back, env) << line;
    ASSERT_EQ(encode(back), line);
  }
}

TEST(Codec, StrictDecoding) {
  const std::string good =
      R"({"body":{"app_dst":"B","app_src":"A"},"channel":"control","from":"v","seq":1,"to":"QuSeC","type":"KmsDiscoveryRequest"})";
  EXPECT_NO_THROW(decode(good));

  auto unknown_type = good;
  unknown_type.replace(unknown_type.find("KmsDiscoveryRequest"), 19, "KmsTeleport");
  EXPECT_EQ(codec_field(unknown_type), "type");

  auto extra = good;
  extra.replace(extra.find(R"("app_src":"A")"), 13, R"("app_src":"A","colour":"red")");
  EXPECT_EQ(codec_field(extra), "body.colour");

  auto missing = good;
  missing.replace(missing.find(R"(,"app_src":"A")"), 14, "");
  EXPECT_EQ(codec_field(missing), "body.app_src");

  EXPECT_EQ(codec_field(R"({"body":{},"channel":"warp","from":"v","seq":1,"to":"q","type":"GetKey"})"),
            "channel");
  EXPECT_EQ(codec_field("not json"), "envelope");
  EXPECT_EQ(codec_field(R"({"body":{"id_relay_key":"k","status":"meh"},"channel":"inter_node","from":"a","seq":1,"to":"b","type":"KeyRelayResponse"})"),
            "body.status");
  EXPECT_EQ(codec_field(R"({"body":{"app_dst":"","app_src":"","key_id":"","material":"zz","status":"ok"},"channel":"intra_node","from":"a","seq":1,"to":"b","type":"KeyDelivery"})"),
            "body.material");
}

class TransportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    t.register_entity({"APP_A", "N1", EntityKind::application});
    t.register_entity({"vKMS_1", "N1", EntityKind::vkms});
    t.register_entity({"KMS_1b", "N1", EntityKind::kms});
    t.register_entity({"KMS_3b", "N3", EntityKind::kms});
    t.register_entity({"QuSeC", "", EntityKind::controller});
  }
  Transport t{1};
};

TEST_F(TransportTest, ChannelClasses) {
  EXPECT_EQ(t.classify("APP_A", "vKMS_1"), Channel::intra_node);
  EXPECT_EQ(t.classify("KMS_1b", "KMS_3b"), Channel::inter_node);
  EXPECT_EQ(t.classify("vKMS_1", "QuSeC"), Channel::control);
  EXPECT_EQ(t.classify("QuSeC", "KMS_3b"), Channel::control);
}

TEST_F(TransportTest, FifoAndSequence) {
  t.send("KMS_1b", "KMS_3b", RelayProcessRequest{"A", "B", "m1"}, 0);
  t.send("KMS_1b", "KMS_3b", RelayProcessRequest{"A", "B", "m2"}, 0);
  t.send("KMS_1b", "vKMS_1", KeyDelivery{}, 0);
  const auto first = t.deliver_next();
  const auto second = t.deliver_next();
  EXPECT_EQ(std::get<RelayProcessRequest>(first.payload).id_relay_key, "m1");
  EXPECT_EQ(std::get<RelayProcessRequest>(second.payload).id_relay_key, "m2");
  EXPECT_LT(first.seq, second.seq);
  EXPECT_EQ(t.deliver_next().seq, 3u);
  EXPECT_TRUE(t.idle());
  EXPECT_EQ(t.drain().size(), 3u);
  EXPECT_TRUE(t.drain().empty());
}

TEST_F(TransportTest, UnknownEntity) {
  EXPECT_THROW(t.send("APP_A", "vKMS_9", GetKey{}, 0), UnknownEntity);
  EXPECT_THROW(t.send("ghost", "vKMS_1", GetKey{}, 0), UnknownEntity);
}

TEST_F(TransportTest, DropNthOfType) {
  t.add_fault({FaultKind::drop, 2, std::string("RelayProcessRequest")});
  t.send("KMS_1b", "vKMS_1", KeyDelivery{}, 0);
  EXPECT_TRUE(t.send("KMS_1b", "KMS_3b", RelayProcessRequest{"A", "B", "m1"}, 0));
  EXPECT_FALSE(t.send("KMS_1b", "KMS_3b", RelayProcessRequest{"A", "B", "m2"}, 0));
  EXPECT_TRUE(t.send("KMS_1b", "KMS_3b", RelayProcessRequest{"A", "B", "m3"}, 0));
  EXPECT_EQ(t.dropped(), 1u);
  t.drain();
  std::vector<std::string> got;
  while (!t.idle()) {
    auto env = t.deliver_next();
    if (auto* r = std::get_if<RelayProcessRequest>(&env.payload)) got.push_back(r->id_relay_key);
  }
  EXPECT_EQ(got, (std::vector<std::string>{"m1", "m3"}));
}

TEST_F(TransportTest, CorruptFlipsOctets) {
  t.add_fault({FaultKind::corrupt, 1, std::string("KeyRelay")});
  const Octets k3{0x10, 0x20};
  t.send("KMS_1b", "KMS_3b", KeyRelay{k3, "k2", "k1", "A", "B", "x"}, 0);
  const auto env = t.deliver_next();
  EXPECT_NE(std::get<KeyRelay>(env.payload).encrypted_relay_key, k3);
  EXPECT_EQ(std::get<KeyRelay>(env.payload).encrypted_relay_key.size(), k3.size());
  EXPECT_EQ(t.corrupted(), 1u);
}

TEST(Status, WireNames) {
  for (int i = 0; i < 6; ++i) {
    const auto s = static_cast<Status>(i);
    EXPECT_EQ(parse_status(to_string(s)), s);
  }
  EXPECT_FALSE(parse_status("failed_cosmic_ray"));
}
