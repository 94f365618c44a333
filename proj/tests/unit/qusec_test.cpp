#include <gtest/gtest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>

#include "fixtures.hpp"
#include "qkdrelay/errors.hpp"
#include "qkdrelay/qusec.hpp"

using namespace qkdrelay;
using namespace qkdrelay::testing;

namespace {

std::vector<std::string> names(const RelayPath& p) { return p.kms_names(); }

const WeightPolicy kPolicies[] = {WeightPolicy::hop_count, WeightPolicy::inverse_key_rate,
                                  WeightPolicy::distance};

}  // namespace

TEST(Spf, Mesh4RelayPath) {
  const auto t = mesh4();
  const auto p = compute_relay_path(t, "N1", "N4", WeightPolicy::hop_count);
  EXPECT_EQ(names(p), (std::vector<std::string>{"KMS_1b", "KMS_3b", "KMS_3d", "KMS_4d"}));
  EXPECT_DOUBLE_EQ(p.cost, 2.0);
}

TEST(Spf, AdjacentNodesAnyPolicy) {
  const auto t = mesh4();
  for (auto policy : kPolicies) {
    EXPECT_EQ(names(compute_relay_path(t, "N3", "N4", policy)),
              (std::vector<std::string>{"KMS_3d", "KMS_4d"}));
  }
}

TEST(Spf, DistancePolicyPrefersShorterDetour) {
  auto d = mesh4_desc();
  d.links[1].distance_km = 100;  // b: N1-N3
  const auto t = Topology::build(d);
  const auto p = compute_relay_path(t, "N1", "N4", WeightPolicy::distance);
  EXPECT_EQ(p.nodes, (std::vector<std::string>{"N1", "N2", "N3", "N4"}));
  EXPECT_EQ(names(p).size(), 6u);
}

TEST(Spf, Errors) {
  const auto t = mesh4();
  EXPECT_THROW(compute_relay_path(t, "N1", "N1", WeightPolicy::hop_count), SameNode);
  EXPECT_THROW(compute_relay_path(t, "N1", "N9", WeightPolicy::hop_count), Error);
}

TEST(Spf, TieBreakSmallestNodeSequence) {
  // Square N1-N2-N4 and N1-N3-N4 with equal hop counts.
  TopologyDesc d;
  d.nodes = {"N1", "N2", "N3", "N4"};
  d.links = {{"w", "N1", "N3", 1, 1, 0}, {"x", "N3", "N4", 1, 1, 0},
             {"y", "N1", "N2", 1, 1, 0}, {"z", "N2", "N4", 1, 1, 0}};
  const auto t = Topology::build(d);
  const auto p = compute_relay_path(t, "N1", "N4", WeightPolicy::hop_count);
  EXPECT_EQ(p.nodes, (std::vector<std::string>{"N1", "N2", "N4"}));
}

TEST(Spf, ParallelLinksTieBreakOnLinkId) {
  auto d = mesh4_desc();
  d.links.push_back({"0", "N3", "N4", 10, 30, 0});
  const auto t = Topology::build(d);
  const auto p = compute_relay_path(t, "N3", "N4", WeightPolicy::hop_count);
  EXPECT_EQ(names(p), (std::vector<std::string>{"KMS_30", "KMS_40"}));
}

TEST(Spf, OptimalAgainstBruteForce) {
  std::mt19937_64 rng(2024);
  std::size_t cases = 0;
  for (int g = 0; g < 120; ++g) {
    const auto t = Topology::build(random_connected(rng, 2 + g % 7));
    for (auto policy : kPolicies) {
      const LinkWeight w = [policy](const Link& l) { return l.weight(policy); };
      for (const auto& s : t.nodes()) {
        for (const auto& d : t.nodes()) {
          if (s.id == d.id) continue;
          const auto p = compute_relay_path(t, s.id, d.id, policy);
          const auto oracle = brute_force_min(t, s.id, d.id, w);
          ASSERT_TRUE(oracle);
          ASSERT_NEAR(p.cost, oracle->cost, 1e-9 * std::max(1.0, oracle->cost));
          // Returned node path is one of the optimal ones, and the smallest.
          const auto smallest =
              *std::min_element(oracle->optimal_node_paths.begin(), oracle->optimal_node_paths.end());
          ASSERT_EQ(p.nodes, smallest);
          ++cases;
        }
      }
    }
  }
  EXPECT_GT(cases, 1000u);
}

TEST(Spf, KmsExpansionShape) {
  std::mt19937_64 rng(8);
  for (int g = 0; g < 50; ++g) {
    const auto t = Topology::build(random_connected(rng, 3 + g % 6));
    const auto p = compute_relay_path(t, t.nodes().front().id, t.nodes().back().id,
                                      WeightPolicy::inverse_key_rate);
    ASSERT_EQ(p.kms.size(), 2 * p.links.size());
    for (std::size_t i = 0; i < p.links.size(); ++i) {
      // Peers across link i, then an intra-node hop to link i+1.
      EXPECT_EQ(t.peer_of(p.kms[2 * i]), p.kms[2 * i + 1]);
      if (i + 1 < p.links.size()) EXPECT_EQ(p.kms[2 * i + 1].node, p.kms[2 * i + 2].node);
    }
  }
}

TEST(Spf, DeterministicAndScaleInvariant) {
  std::mt19937_64 rng(77);
  for (int g = 0; g < 100; ++g) {
    const auto t = Topology::build(random_connected(rng, 2 + g % 7));
    const auto& s = t.nodes().front().id;
    const auto& d = t.nodes().back().id;
    for (auto policy : kPolicies) {
      const auto a = compute_relay_path(t, s, d, policy);
      const auto b = compute_relay_path(t, s, d, policy);
      EXPECT_EQ(names(a), names(b));
      for (double k : {0.001, 3.0, 1e6}) {
        const auto scaled =
            compute_relay_path(t, s, d, [&](const Link& l) { return k * l.weight(policy); });
        EXPECT_EQ(names(scaled), names(a)) << "scale " << k;
      }
    }
  }
}

namespace {

class ControllerTest : public ::testing::Test {
 protected:
  KmsDiscoveryResponse discover(Controller& c, const AppId& src, const AppId& dst) {
    return c.handle_kms_discovery(KmsDiscoveryRequest{src, dst}, out);
  }
  std::vector<RelayPathInstall> installs() const {
    std::vector<RelayPathInstall> v;
    for (const auto& s : out.sent) {
      if (auto* m = std::get_if<RelayPathInstall>(&s.msg)) v.push_back(*m);
    }
    return v;
  }
  RecordingOutbox out;
};

}  // namespace

TEST_F(ControllerTest, DirectDomain) {
  const auto t = mesh4("N3", "N4");
  Controller c(t, {});
  const auto r = discover(c, "APP_A", "APP_B");
  EXPECT_EQ(r.id_kms, "KMS_3d");
  EXPECT_EQ(r.status, Status::ok);
  EXPECT_TRUE(out.sent.empty());
  EXPECT_EQ(discover(c, "APP_B", "APP_A").id_kms, "KMS_4d");
  ASSERT_EQ(c.sessions().size(), 2u);
  EXPECT_EQ(c.sessions()[0].kind, SessionKind::direct);
}

TEST_F(ControllerTest, RelayInstallsThenTargetReuses) {
  const auto t = mesh4();
  Controller c(t, {});
  const auto r = discover(c, "APP_A", "APP_B");
  EXPECT_EQ(r.id_kms, "KMS_1b");
  const auto inst = installs();
  ASSERT_EQ(inst.size(), 4u);
  // Sent last to first.
  std::vector<std::string> targets;
  for (const auto& s : out.sent) targets.push_back(s.to);
  EXPECT_EQ(targets, (std::vector<std::string>{"KMS_4d", "KMS_3d", "KMS_3b", "KMS_1b"}));
  EXPECT_FALSE(inst[0].next_hop);
  EXPECT_EQ(inst[0].prev_hop, "KMS_3d");
  EXPECT_EQ(inst[1].prev_hop, "KMS_3b");
  EXPECT_EQ(inst[1].next_hop, "KMS_4d");
  EXPECT_EQ(inst[2].prev_hop, "KMS_1b");
  EXPECT_EQ(inst[2].next_hop, "KMS_3d");
  EXPECT_FALSE(inst[3].prev_hop);
  EXPECT_EQ(inst[3].next_hop, "KMS_3b");
  for (const auto& i : inst) {
    EXPECT_EQ(i.id_association, inst[0].id_association);
    EXPECT_EQ(i.id_association.size(), 32u);
  }

  out.sent.clear();
  const auto back = discover(c, "APP_B", "APP_A");
  EXPECT_EQ(back.id_kms, "KMS_4d");
  EXPECT_TRUE(out.sent.empty());
  EXPECT_EQ(c.sessions().back().status, SessionStatus::completed);
  EXPECT_EQ(c.installs_sent(), 4u);
}

TEST_F(ControllerTest, InstallCompletenessOnChains) {
  for (std::size_t links : {2u, 3u, 7u}) {
    const auto t = Topology::build(chain_desc(links));
    Controller c(t, {});
    out.sent.clear();
    discover(c, "APP_A", "APP_B");
    const auto inst = installs();
    ASSERT_EQ(inst.size(), 2 * links);
    std::size_t initiators = 0, terminals = 0;
    for (const auto& i : inst) {
      initiators += !i.prev_hop;
      terminals += !i.next_hop;
    }
    EXPECT_EQ(initiators, 1u);
    EXPECT_EQ(terminals, 1u);
    // Each rule's next hop names the KMS whose rule points back at it.
    for (std::size_t k = 0; k < out.sent.size(); ++k) {
      const auto& rule = std::get<RelayPathInstall>(out.sent[k].msg);
      if (!rule.next_hop) continue;
      auto it = std::find_if(out.sent.begin(), out.sent.end(),
                             [&](const auto& s) { return s.to == *rule.next_hop; });
      ASSERT_NE(it, out.sent.end());
      EXPECT_EQ(std::get<RelayPathInstall>(it->msg).prev_hop, out.sent[k].to);
    }
  }
}

TEST_F(ControllerTest, FreshAssociationPerRequest) {
  const auto t = mesh4();
  Controller c(t, {});
  discover(c, "APP_A", "APP_B");
  const auto first = installs().front().id_association;
  out.sent.clear();
  discover(c, "APP_A", "APP_B");
  EXPECT_NE(installs().front().id_association, first);
}

TEST_F(ControllerTest, UnknownAppAndSameNode) {
  auto d = mesh4_desc();
  d.apps.push_back({"APP_C", "N1"});
  const auto t = Topology::build(d);
  Controller c(t, {});
  auto r = discover(c, "APP_A", "APP_Z");
  EXPECT_EQ(r.status, Status::failed_unknown_app);
  EXPECT_FALSE(r.id_kms);
  r = discover(c, "APP_A", "APP_C");
  EXPECT_EQ(r.status, Status::failed_no_rule);
  EXPECT_FALSE(r.id_kms);
  EXPECT_TRUE(out.sent.empty());
}

TEST_F(ControllerTest, PolicyOverride) {
  auto d = mesh4_desc();
  d.links[1].distance_km = 100;
  const auto t = Topology::build(d);
  Controller c(t, ControllerConfig{WeightPolicy::distance, std::nullopt, 0});
  EXPECT_EQ(discover(c, "APP_A", "APP_B").id_kms, "KMS_1a");
  EXPECT_EQ(installs().size(), 6u);
}

TEST_F(ControllerTest, SessionGc) {
  const auto t = mesh4();
  Controller forever(t, {});
  discover(forever, "APP_A", "APP_B");
  EXPECT_EQ(forever.session_gc(1'000'000'000), 0u);

  Controller c(t, ControllerConfig{std::nullopt, 10'000, 0});
  discover(c, "APP_A", "APP_B");
  EXPECT_EQ(c.session_gc(10'000), 0u);
  EXPECT_EQ(c.session_gc(11'000), 1u);
  EXPECT_EQ(c.sessions().back().status, SessionStatus::expired);

  out.now_ = 11'000;
  out.sent.clear();
  const auto r = discover(c, "APP_B", "APP_A");
  EXPECT_FALSE(r.id_kms);
  EXPECT_EQ(r.status, Status::failed_no_rule);
  EXPECT_TRUE(out.sent.empty());
}

TEST_F(ControllerTest, StateDump) {
  const auto t = mesh4();
  Controller c(t, {});
  discover(c, "APP_A", "APP_B");
  const auto doc = nlohmann::json::parse(c.dump_state());
  EXPECT_EQ(doc["installs_sent"], 4);
  ASSERT_EQ(doc["sessions"].size(), 1u);
  EXPECT_EQ(doc["sessions"][0]["kms_path"].size(), 4u);
  EXPECT_EQ(doc["sessions"][0]["status"], "installed");
}

TEST_F(ControllerTest, OnlyControlMessagesLeaveTheController) {
  const auto t = mesh4();
  Controller c(t, {});
  c.on_message(envelope("vKMS_1", "QuSeC", KmsDiscoveryRequest{"APP_A", "APP_B"}, 1, Channel::control),
               out);
  ASSERT_EQ(out.sent.size(), 5u);
  for (const auto& s : out.sent) EXPECT_FALSE(carries_key_material(s.msg));
  EXPECT_EQ(out.sent.back().to, "vKMS_1");
}
