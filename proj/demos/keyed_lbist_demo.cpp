// Walks through the attack on the 4-bit example and both countermeasures.

#include <iostream>

#include "lbist/attack.hpp"
#include "lbist/keyed.hpp"
#include "lbist/remote/simnet.hpp"

using namespace lbist;

int main() {
  const Nlfsr dut = example_nlfsr4();
  const LbistConfig public_cfg = example_config4();  // seed 1011 is known to the attacker

  // 1. The attacker searches for a stuck-at fault that keeps the signature.
  const auto report = enumerate_aliasing_faults(dut, public_cfg, AttackConstraints::all_stages(4, 1));
  std::cout << "attack under the public seed " << public_cfg.prpg_seed << ":\n"
            << render_report_table(report) << "\n";
  const FaultSet trojan = report.aliasing_sets.at(0);

  // 2. Keyed LBIST: the seed comes from a key the attacker does not know.
  MemorySlot fuses;
  for (const char* key : {"1011", "0110", "110010"}) {
    provision(dut, public_cfg, TestKey::parse(key), fuses);
    const Verdict v = keyed_selftest(dut, public_cfg, fuses, trojan);
    std::cout << "key " << key << " -> seed " << derive_seed(TestKey::parse(key), 4) << ": Trojan "
              << (v.passed() ? "passes" : "is detected") << " (signature " << v.computed_signature
              << ", expected " << v.expected_signature << ")\n";
  }

  // 3. Remote test management: a fresh seed per session.
  remote::Topology topo;
  remote::AgentConfig clean;
  clean.device_id = 1;
  clean.model_id = remote::kExampleModelId;
  remote::AgentConfig bad = clean;
  bad.device_id = 2;
  bad.faults = trojan;
  topo.agents = {clean, bad};
  remote::Script script;
  script.periodic = {{1, 10, 20, 5, remote::Scenario::signature_report},
                     {2, 10, 20, 5, remote::Scenario::signature_report}};
  const auto r = remote::simnet_run(topo, {}, script);
  std::cout << "\nremote sessions (time device session scenario seed count outcome):\n";
  for (const auto& line : r.session_log) std::cout << "  " << line << "\n";
  return 0;
}
