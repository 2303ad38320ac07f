#include <gtest/gtest.h>

#include <algorithm>

#include "lbist/remote/simnet.hpp"

using namespace lbist;
using namespace lbist::remote;

namespace {

AgentConfig agent(std::uint32_t id, FaultSet faults = {}) {
  AgentConfig c;
  c.device_id = id;
  c.model_id = kExampleModelId;
  c.faults = std::move(faults);
  return c;
}

Script one_test(std::uint32_t device, std::uint64_t at = 10) {
  Script s;
  s.manual.push_back({at, device, Scenario::signature_report});
  return s;
}

bool trace_has(const SimResult& r, const std::string& needle) {
  return std::any_of(r.trace.begin(), r.trace.end(),
                     [&](const std::string& l) { return l.find(needle) != std::string::npos; });
}

}  // namespace

TEST(SimNet, LosslessSingleCyclePasses) {
  Topology topo;
  topo.agents = {agent(1)};
  const auto r = simnet_run(topo, {}, one_test(1));
  ASSERT_EQ(r.sessions.size(), 1u);
  EXPECT_EQ(r.sessions[0].outcome, SessionOutcome::pass);
  EXPECT_EQ(r.session_log.size(), 1u);
  EXPECT_EQ(r.frames_dropped, 0u);
  EXPECT_EQ(r.trace.front(), "0 send d1->server HELLO device=1 model=1 width=4");
}

TEST(SimNet, LocalVerdictScenarioPasses) {
  Topology topo;
  topo.agents = {agent(1)};
  Script s;
  s.manual.push_back({10, 1, Scenario::local_verdict});
  const auto r = simnet_run(topo, {}, s);
  ASSERT_EQ(r.sessions.size(), 1u);
  EXPECT_EQ(r.sessions[0].outcome, SessionOutcome::pass);
}

TEST(SimNet, DroppedInitIsRetransmitted) {
  // Search for a seed whose first TEST_INIT is dropped; the session must still
  // finish through a retransmission.
  Topology topo;
  topo.agents = {agent(1)};
  bool found = false;
  for (std::uint64_t seed = 1; seed < 200 && !found; ++seed) {
    NetConditions net;
    net.drop_probability = 0.3;
    net.rng_seed = seed;
    const auto r = simnet_run(topo, net, one_test(1, 40));
    if (r.sessions.size() != 1 || !trace_has(r, "drop server->d1 TEST_INIT")) continue;
    if (r.sessions[0].outcome != SessionOutcome::pass) continue;
    found = true;
    EXPECT_GE(r.sessions[0].retransmissions, 1u);
  }
  EXPECT_TRUE(found);
}

TEST(SimNet, DuplicateReportIsDiscarded) {
  Topology topo;
  auto a = agent(1);
  a.report_repeats = 2;
  topo.agents = {a};
  const auto r = simnet_run(topo, {}, one_test(1));
  ASSERT_EQ(r.sessions.size(), 1u);
  EXPECT_EQ(r.sessions[0].outcome, SessionOutcome::pass);
  EXPECT_EQ(r.duplicate_reports, 2u);
  EXPECT_EQ(r.session_log.size(), 1u);
}

TEST(SimNet, DuplicatedFramesNeverDoubleClose) {
  Topology topo;
  topo.agents = {agent(1), agent(2)};
  NetConditions net;
  net.duplicate_probability = 0.5;
  net.delay_max = 3;
  net.rng_seed = 17;
  Script s;
  s.periodic = {{1, 20, 20, 10, Scenario::signature_report}, {2, 25, 20, 10, Scenario::local_verdict}};
  const auto r = simnet_run(topo, net, s);
  EXPECT_GT(r.frames_duplicated, 0u);
  EXPECT_EQ(r.session_log.size(), r.sessions.size());
  EXPECT_EQ(r.count(SessionOutcome::pass), 20u);
}

TEST(SimNet, RunsAreDeterministic) {
  Topology topo;
  topo.agents = {agent(1), agent(2, FaultSet{{1, false}})};
  NetConditions net;
  net.drop_probability = 0.2;
  net.duplicate_probability = 0.1;
  net.delay_max = 4;
  net.rng_seed = 1234;
  Script s;
  s.periodic = {{1, 30, 25, 8, Scenario::signature_report}, {2, 30, 25, 8, Scenario::signature_report}};
  const auto a = simnet_run(topo, net, s);
  const auto b = simnet_run(topo, net, s);
  EXPECT_EQ(a.trace_text(), b.trace_text());
  EXPECT_EQ(a.session_log, b.session_log);

  net.rng_seed = 4321;
  EXPECT_NE(simnet_run(topo, net, s).trace_text(), a.trace_text());
}

TEST(SimNet, WidthMismatchedAgentIsRejected) {
  Topology topo;
  auto a = agent(1);
  a.dut = Nlfsr({AnfFunction::parse("x1"), AnfFunction::parse("x2"), AnfFunction::parse("x0")});
  topo.agents = {a};
  const auto r = simnet_run(topo, {}, Script{});
  EXPECT_TRUE(trace_has(r, "recv server->d1 ERROR code=0x02"));
  EXPECT_TRUE(r.sessions.empty());
}

TEST(SimNet, TrojanPassesOnlyUnderItsTunedSeed) {
  Topology topo;
  topo.agents = {agent(7, FaultSet{{1, false}})};
  Script s;
  s.periodic = {{7, 10, 20, 15, Scenario::signature_report}};
  const auto r = simnet_run(topo, {}, s);
  ASSERT_EQ(r.sessions.size(), 15u);
  // Exactly one nonzero seed (1011) aliases for this Trojan.
  EXPECT_EQ(r.count(SessionOutcome::pass), 1u);
  EXPECT_EQ(r.count(SessionOutcome::fail), 14u);
  for (const auto& sess : r.sessions) {
    EXPECT_EQ(sess.outcome == SessionOutcome::pass, sess.seed == BitVec::from_string("1011"));
  }
}

TEST(SimNet, TriggerSchedulesTargetTest) {
  Topology topo;
  topo.agents = {agent(1), agent(2)};
  Script s;
  s.triggers.push_back({20, 1, 2, reason::environmental});
  const auto r = simnet_run(topo, {}, s);
  ASSERT_EQ(r.sessions.size(), 1u);
  EXPECT_EQ(r.sessions[0].device_id, 2u);
  EXPECT_EQ(r.sessions[0].trigger_reason, reason::environmental);
  EXPECT_EQ(r.sessions[0].outcome, SessionOutcome::pass);
}

TEST(SimNet, UnreachableDeviceTimesOut) {
  Topology topo;
  topo.agents = {agent(1)};
  NetConditions net;
  net.drop_probability = 1.0;
  Script s = one_test(1);
  const auto r = simnet_run(topo, net, s);
  EXPECT_TRUE(r.sessions.empty());  // never enrolled, so nothing to issue
  EXPECT_TRUE(trace_has(r, "refused test of d1"));
}

TEST(SimNet, RejectsBadConditions) {
  NetConditions net;
  net.drop_probability = 1.5;
  EXPECT_THROW(simnet_run({}, net, {}), validation_error);
  net.drop_probability = 0;
  net.delay_min = 3;
  net.delay_max = 2;
  EXPECT_THROW(simnet_run({}, net, {}), validation_error);
}
