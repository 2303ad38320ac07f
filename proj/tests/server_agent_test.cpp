#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "lbist/remote/agent.hpp"
#include "lbist/remote/server.hpp"
#include "oracle.hpp"

using namespace lbist;
using namespace lbist::remote;

namespace {

TestServer make_server(ServerConfig cfg = {}) { return TestServer(cfg, example_models()); }

void enroll(TestServer& server, std::uint32_t id) {
  auto out = server.on_message(id, Hello{id, kExampleModelId, 4}, 0);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_TRUE(std::holds_alternative<HelloAck>(out[0].message));
}

AgentConfig agent_config(std::uint32_t id, FaultSet faults = {}) {
  AgentConfig c;
  c.device_id = id;
  c.model_id = kExampleModelId;
  c.faults = std::move(faults);
  return c;
}

const TestInit& init_of(const TestServer::Issued& issued) {
  return std::get<TestInit>(issued.init.message);
}

}  // namespace

TEST(ServerRegister, EnrollsKnownModelIdle) {
  auto server = make_server();
  enroll(server, 7);
  const auto& dev = server.registry().at(7);
  EXPECT_EQ(dev.status, DeviceStatus::idle);
  EXPECT_EQ(dev.model_id, kExampleModelId);
  EXPECT_EQ(dev.last_seed_counter, 0u);
}

TEST(ServerRegister, UnknownModelGetsError01) {
  auto server = make_server();
  const auto out = server.on_message(7, Hello{7, 99, 4}, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<ErrorMsg>(out[0].message).code, errc::unknown_model);
  EXPECT_TRUE(server.registry().empty());
}

TEST(ServerRegister, WidthMismatchGetsError02) {
  auto server = make_server();
  const auto out = server.on_message(7, Hello{7, kExampleModelId, 5}, 0);
  EXPECT_EQ(std::get<ErrorMsg>(out.at(0).message).code, errc::width_mismatch);
}

TEST(ServerRegister, ReHelloKeepsCounter) {
  auto server = make_server();
  enroll(server, 7);
  ASSERT_TRUE(server.issue_test(7, Scenario::signature_report, 1));
  enroll(server, 7);
  EXPECT_EQ(server.registry().at(7).last_seed_counter, 1u);
  EXPECT_EQ(server.registry().size(), 1u);
}

TEST(IssueTest, ExpectedSignatureIsGoldenUnderFreshSeed) {
  auto server = make_server();
  enroll(server, 7);
  const auto issued = server.issue_test(7, Scenario::signature_report, 0);
  ASSERT_TRUE(issued);
  const auto& init = init_of(*issued);
  EXPECT_FALSE(init.seed.is_zero());
  EXPECT_EQ(init.seed, fresh_seed(server.config().secret, 7, 4, 1));
  EXPECT_EQ(init.pattern_count, 8u);
  EXPECT_FALSE(init.expected_signature.has_value());
  const auto* s = server.session(issued->session_id);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->expected_signature.to_uint(),
            oracle::example_signature(static_cast<std::uint32_t>(init.seed.to_uint()), {}));
  EXPECT_EQ(server.registry().at(7).status, DeviceStatus::testing);
}

TEST(IssueTest, LocalVerdictCarriesExpectedSignature) {
  auto server = make_server();
  enroll(server, 7);
  const auto issued = server.issue_test(7, Scenario::local_verdict, 0);
  ASSERT_TRUE(issued);
  EXPECT_EQ(init_of(*issued).expected_signature, server.session(issued->session_id)->expected_signature);
}

TEST(IssueTest, BusyDeviceIsRefusedWithoutTraffic) {
  auto server = make_server();
  enroll(server, 7);
  ASSERT_TRUE(server.issue_test(7, Scenario::signature_report, 0));
  EXPECT_FALSE(server.issue_test(7, Scenario::signature_report, 0));
  EXPECT_FALSE(server.issue_test(99, Scenario::signature_report, 0));
  EXPECT_EQ(server.sessions().size(), 1u);
}

TEST(IssueTest, ConsecutiveSessionsGetDistinctIdsAndSeeds) {
  auto server = make_server();
  enroll(server, 7);
  std::set<std::uint64_t> ids;
  std::set<BitVec> seeds;
  for (int k = 0; k < 15; ++k) {
    auto issued = server.issue_test(7, Scenario::signature_report, k);
    ASSERT_TRUE(issued);
    ids.insert(issued->session_id);
    seeds.insert(init_of(*issued).seed);
    const auto& s = *server.session(issued->session_id);
    server.on_message(7, SigReport{s.session_id, s.expected_signature}, k);
  }
  EXPECT_EQ(ids.size(), 15u);
  EXPECT_EQ(seeds.size(), 15u);  // whole nonzero 4-bit space, no repeats
}

TEST(FreshSeed, PermutesNonzeroSeedsInFixedOrder) {
  // Order for secret 0x5EED, device 7, recomputed by an independent script.
  const std::vector<std::string> expected = {"0011", "0001", "1110", "1100", "1010",
                                             "1000", "0110", "0100", "0010", "1111",
                                             "1101", "1011", "1001", "0111", "0101"};
  for (std::uint64_t c = 1; c <= 15; ++c) {
    EXPECT_EQ(fresh_seed(0x5EED, 7, 4, c).to_string(), expected[c - 1]) << c;
  }
  EXPECT_EQ(fresh_seed(0x5EED, 7, 4, 16), fresh_seed(0x5EED, 7, 4, 1));
  EXPECT_EQ(fresh_seed(0x5EED, 7, 4, 3), fresh_seed(0x5EED, 7, 4, 3));
}

TEST(FreshSeed, EveryDeviceAndWidthIsAPermutation) {
  for (std::size_t w = 1; w <= 10; ++w) {
    for (std::uint32_t dev = 0; dev < 20; ++dev) {
      SeedSchedule sched(42 + dev * 7, dev, w);
      std::set<std::uint64_t> seen;
      for (std::uint64_t c = 1; c <= sched.period(); ++c) {
        const auto s = sched.seed_for(c);
        ASSERT_FALSE(s.is_zero());
        seen.insert(s.to_uint());
      }
      EXPECT_EQ(seen.size(), sched.period()) << "w=" << w << " dev=" << dev;
      EXPECT_TRUE(sched.wraps_at(sched.period() + 1));
    }
  }
}

TEST(AgentExecute, FaultFreeAndTrojanedAgentsUnderTunedSeed) {
  TestInit init{1, Scenario::signature_report, 8, BitVec::from_string("1011"), std::nullopt};
  DeviceAgent clean(agent_config(1));
  DeviceAgent trojan(agent_config(2, FaultSet{{1, false}}));
  EXPECT_EQ(std::get<SigReport>(clean.execute(init)).signature, BitVec::from_string("0101"));
  EXPECT_EQ(std::get<SigReport>(trojan.execute(init)).signature, BitVec::from_string("0101"));
}

TEST(AgentExecute, TrojanedAgentPerSeedMatchesReferenceModel) {
  DeviceAgent trojan(agent_config(2, FaultSet{{1, false}}));
  std::size_t aliasing = 0;
  for (std::uint32_t s = 1; s < 16; ++s) {
    TestInit init{s, Scenario::signature_report, 8, BitVec::from_uint(s, 4), std::nullopt};
    const auto sig = std::get<SigReport>(trojan.execute(init)).signature.to_uint();
    EXPECT_EQ(sig, oracle::example_signature(s, {{1, 0}}));
    aliasing += sig == oracle::example_signature(s, {});
  }
  EXPECT_EQ(aliasing, 1u);
}

TEST(AgentExecute, LocalVerdict) {
  DeviceAgent trojan(agent_config(2, FaultSet{{1, false}}));
  TestInit init{1, Scenario::local_verdict, 8, BitVec::from_string("0001"), BitVec::from_string("0101")};
  EXPECT_EQ(std::get<VerdictReport>(trojan.execute(init)).verdict, Outcome::fail);
  init.seed = BitVec::from_string("1011");
  EXPECT_EQ(std::get<VerdictReport>(trojan.execute(init)).verdict, Outcome::pass);
}

TEST(AgentExecute, WidthMismatchIsError02) {
  DeviceAgent agent(agent_config(1));
  const auto out = agent.on_message(
      TestInit{5, Scenario::signature_report, 8, BitVec::from_string("10110"), std::nullopt}, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<ErrorMsg>(out[0]), (ErrorMsg{errc::width_mismatch, 5}));
  EXPECT_EQ(agent.executions(), 0u);
}

TEST(AgentExecute, DuplicateInitResendsCachedReplyWithoutRerun) {
  DeviceAgent agent(agent_config(1));
  const TestInit init{5, Scenario::signature_report, 8, BitVec::from_string("1011"), std::nullopt};
  const auto first = agent.on_message(init, 0);
  const auto second = agent.on_message(init, 1);
  EXPECT_EQ(first, second);
  EXPECT_EQ(agent.executions(), 1u);
}

TEST(AgentExecute, BusyWithDifferentSessionIsError03) {
  auto cfg = agent_config(1);
  cfg.execution_ticks = 3;
  DeviceAgent agent(cfg);
  EXPECT_TRUE(agent.on_message(TestInit{5, Scenario::signature_report, 8, BitVec::from_string("1011"), {}}, 0).empty());
  const auto out = agent.on_message(TestInit{6, Scenario::signature_report, 8, BitVec::from_string("0001"), {}}, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<ErrorMsg>(out[0]), (ErrorMsg{errc::busy, 6}));
  EXPECT_TRUE(agent.tick(2).empty());
  const auto done = agent.tick(3);
  ASSERT_EQ(done.size(), 1u);
  EXPECT_EQ(std::get<SigReport>(done[0]).session_id, 5u);
}

TEST(EvaluateReport, SignatureScenario) {
  auto server = make_server();
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::signature_report, 0);
  const auto expected = server.session(issued->session_id)->expected_signature;
  server.on_message(7, SigReport{issued->session_id, expected}, 1);
  EXPECT_EQ(server.session(issued->session_id)->outcome, SessionOutcome::pass);
  EXPECT_EQ(server.registry().at(7).status, DeviceStatus::idle);

  issued = server.issue_test(7, Scenario::signature_report, 2);
  server.on_message(7, SigReport{issued->session_id, BitVec(4)}, 3);
  EXPECT_EQ(server.session(issued->session_id)->outcome, SessionOutcome::fail);
}

TEST(EvaluateReport, ExampleSignatureComparisons) {
  // Drive the comparison with the example's seed directly.
  EXPECT_TRUE(decide(BitVec::from_string("0101"), BitVec::from_string("0101")).passed());
  EXPECT_FALSE(decide(BitVec::from_string("0000"), BitVec::from_string("0101")).passed());
}

TEST(EvaluateReport, DuplicateReportDoesNotReclose) {
  auto server = make_server();
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::signature_report, 0);
  const auto expected = server.session(issued->session_id)->expected_signature;
  server.on_message(7, SigReport{issued->session_id, expected}, 1);
  const auto out = server.on_message(7, SigReport{issued->session_id, BitVec(4)}, 2);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(server.session(issued->session_id)->outcome, SessionOutcome::pass);
  EXPECT_EQ(server.session_log().size(), 1u);
  EXPECT_EQ(server.duplicate_reports(), 1u);
}

TEST(EvaluateReport, UnknownSessionIsError04) {
  auto server = make_server();
  enroll(server, 7);
  const auto out = server.on_message(7, SigReport{1234, BitVec(4)}, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(std::get<ErrorMsg>(out[0].message), (ErrorMsg{errc::unknown_session, 1234}));
}

TEST(EvaluateReport, LocalVerdictOutcomeIsTheReportedVerdict) {
  auto server = make_server();
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::local_verdict, 0);
  server.on_message(7, VerdictReport{issued->session_id, Outcome::fail}, 1);
  EXPECT_EQ(server.session(issued->session_id)->outcome, SessionOutcome::fail);
}

TEST(EvaluateReport, VerdictForSignatureSessionIsIgnored) {
  auto server = make_server();
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::signature_report, 0);
  server.on_message(7, VerdictReport{issued->session_id, Outcome::pass}, 1);
  EXPECT_FALSE(server.session(issued->session_id)->closed());
}

TEST(Timeouts, RetransmitThenTimeoutThenLateReportDiscarded) {
  ServerConfig cfg;
  cfg.timeout = 5;
  cfg.retries = 2;
  auto server = make_server(cfg);
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::signature_report, 0);
  EXPECT_TRUE(server.tick(4).empty());
  EXPECT_EQ(server.tick(5).size(), 1u);
  EXPECT_EQ(server.tick(10).size(), 1u);
  EXPECT_TRUE(server.tick(15).empty());
  const auto* s = server.session(issued->session_id);
  EXPECT_EQ(s->outcome, SessionOutcome::timeout);
  EXPECT_EQ(s->retransmissions, 2u);
  EXPECT_EQ(server.registry().at(7).status, DeviceStatus::unreachable);

  server.on_message(7, SigReport{issued->session_id, s->expected_signature}, 16);
  EXPECT_EQ(server.session(issued->session_id)->outcome, SessionOutcome::timeout);
  EXPECT_EQ(server.late_reports(), 1u);

  // An unreachable device can be tested again.
  EXPECT_TRUE(server.issue_test(7, Scenario::signature_report, 20));
}

TEST(Triggers, IdleTargetIsScheduledWithReason) {
  auto server = make_server();
  enroll(server, 3);
  enroll(server, 7);
  const auto out = server.on_message(3, TriggerReq{3, 7, reason::comm_failure}, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].device_id, 7u);
  const auto& init = std::get<TestInit>(out[0].message);
  EXPECT_EQ(server.session(init.session_id)->trigger_reason, reason::comm_failure);
}

TEST(Triggers, UnknownTargetIsError05) {
  auto server = make_server();
  enroll(server, 3);
  const auto out = server.on_message(3, TriggerReq{3, 99, reason::operator_request}, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].device_id, 3u);
  EXPECT_EQ(std::get<ErrorMsg>(out[0].message).code, errc::unknown_target);
}

TEST(Triggers, UnenrolledRequesterIsRejected) {
  auto server = make_server();
  enroll(server, 7);
  const auto out = server.on_message(4, TriggerReq{4, 7, 0}, 0);
  EXPECT_EQ(std::get<ErrorMsg>(out.at(0).message).code, errc::not_enrolled);
}

TEST(Triggers, BusyTargetQueuesUntilIdle) {
  auto server = make_server();
  enroll(server, 3);
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::signature_report, 0);
  EXPECT_TRUE(server.on_message(3, TriggerReq{3, 7, reason::environmental}, 1).empty());
  EXPECT_EQ(server.registry().at(7).pending_triggers.size(), 1u);

  const auto expected = server.session(issued->session_id)->expected_signature;
  const auto out = server.on_message(7, SigReport{issued->session_id, expected}, 2);
  ASSERT_EQ(out.size(), 1u);
  const auto& init = std::get<TestInit>(out[0].message);
  EXPECT_EQ(server.session(init.session_id)->trigger_reason, reason::environmental);
  EXPECT_TRUE(server.registry().at(7).pending_triggers.empty());
}

TEST(SessionLog, LineFormat) {
  auto server = make_server();
  enroll(server, 7);
  auto issued = server.issue_test(7, Scenario::signature_report, 0);
  const auto* s = server.session(issued->session_id);
  server.on_message(7, SigReport{issued->session_id, s->expected_signature}, 12);
  ASSERT_EQ(server.session_log().size(), 1u);
  EXPECT_EQ(server.session_log()[0],
            "12 7 1 SIGNATURE_REPORT " + s->seed.to_hex() + " 8 PASS");
}

TEST(Registry, PersistAndRestoreCounters) {
  const auto path = std::filesystem::temp_directory_path() / "lbist_registry_test.txt";
  {
    auto server = make_server();
    enroll(server, 7);
    enroll(server, 9);
    server.issue_test(7, Scenario::signature_report, 0);
    server.issue_test(9, Scenario::signature_report, 0);
    server.tick(100);
    server.tick(200);
    server.tick(300);
    server.issue_test(7, Scenario::signature_report, 400);
    server.save_registry(path);
  }
  auto restored = make_server();
  restored.load_registry(path);
  ASSERT_EQ(restored.registry().size(), 2u);
  EXPECT_EQ(restored.registry().at(7).last_seed_counter, 2u);
  EXPECT_EQ(restored.registry().at(9).last_seed_counter, 1u);
  auto issued = restored.issue_test(7, Scenario::signature_report, 0);
  EXPECT_EQ(std::get<TestInit>(issued->init.message).seed, fresh_seed(restored.config().secret, 7, 4, 3));
}

TEST(SignatureSource, PrecomputedMatchesOnTheFly) {
  ServerConfig pre;
  pre.signatures = SignatureSource::precomputed;
  auto a = make_server();
  auto b = make_server(pre);
  enroll(a, 7);
  enroll(b, 7);
  for (int k = 0; k < 20; ++k) {
    auto ia = a.issue_test(7, Scenario::signature_report, k);
    auto ib = b.issue_test(7, Scenario::signature_report, k);
    const auto& sa = *a.session(ia->session_id);
    const auto& sb = *b.session(ib->session_id);
    EXPECT_EQ(sa.seed, sb.seed);
    EXPECT_EQ(sa.expected_signature, sb.expected_signature);
    a.on_message(7, SigReport{sa.session_id, sa.expected_signature}, k);
    b.on_message(7, SigReport{sb.session_id, sb.expected_signature}, k);
  }
}

TEST(ScenarioEquivalence, SameOutcomeForBothScenarios) {
  for (const FaultSet& faults : {FaultSet{}, FaultSet{{1, false}}, FaultSet{{0, true}, {3, false}}}) {
    DeviceAgent agent(agent_config(7, faults));
    for (std::uint32_t seed = 1; seed < 16; ++seed) {
      const auto s = BitVec::from_uint(seed, 4);
      const auto expected = golden_signature(example_nlfsr4(), example_config4().with_seed(s));
      const auto sig = std::get<SigReport>(
          agent.execute(TestInit{seed, Scenario::signature_report, 8, s, std::nullopt}));
      const auto verdict = std::get<VerdictReport>(
          agent.execute(TestInit{seed, Scenario::local_verdict, 8, s, expected}));
      EXPECT_EQ(sig.signature == expected, verdict.verdict == Outcome::pass);
    }
  }
}
