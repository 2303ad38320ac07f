// lbist: command-line front end for simulation, attack search, keyed
// self-test and remote test management.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lbist/attack.hpp"
#include "lbist/keyed.hpp"
#include "lbist/manifest.hpp"
#include "lbist/remote/socket.hpp"

namespace {

using namespace lbist;

// Exit codes shared by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitNoFusebox = 2;
constexpr int kExitNoAlias = 3;
constexpr int kExitCapExceeded = 4;
constexpr int kExitIncomplete = 5;
constexpr int kExitUsage = 64;
constexpr int kExitIo = 74;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

// Manifest fields settable from the command line; a flag wins over the file.
struct ManifestFlags {
  std::string manifest;
  std::optional<std::string> dut, prpg_poly, seed, misr_poly, misr_init, faults, mode, format;
  std::optional<long long> count;

  void attach(CLI::App* cmd, bool with_faults = true) {
    cmd->add_option("-m,--manifest", manifest, "JSON run manifest");
    cmd->add_option("--dut", dut, "DUT model file or builtin:nlfsr4");
    cmd->add_option("--prpg-poly", prpg_poly, "PRPG feedback polynomial, e.g. 1+x+x^4");
    cmd->add_option("--seed", seed, "PRPG seed, MSB first");
    cmd->add_option("--misr-poly", misr_poly, "MISR feedback polynomial");
    cmd->add_option("--misr-init", misr_init, "MISR initial state");
    cmd->add_option("--count", count, "number of test patterns");
    if (with_faults) {
      cmd->add_option("--faults", faults, "stuck-at faults, e.g. s1:=0,s3:=1");
      cmd->add_option("--mode", mode, "capture-only | read-and-capture");
    }
    cmd->add_option("--format", format, "table | lines");
  }

  RunManifest resolve() const {
    RunManifest m = manifest.empty() ? RunManifest{} : RunManifest::load(manifest);
    if (dut) m.dut_path = *dut;
    if (prpg_poly) m.prpg_poly = *prpg_poly;
    if (seed) m.prpg_seed = *seed;
    if (misr_poly) m.misr_poly = *misr_poly;
    if (misr_init) m.misr_init = *misr_init;
    if (count) m.pattern_count = *count;
    if (faults) m.faults = *faults;
    if (mode) m.mode = *mode;
    if (format) m.format = *format;
    return m;
  }
};

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

int cmd_simulate(const ManifestFlags& flags) {
  const RunManifest m = flags.resolve();
  const Nlfsr dut = m.dut();
  const LbistConfig cfg = m.config();
  const FaultSet faults = m.fault_set();
  const FaultMode mode = m.fault_mode();
  const auto clean = trace_lbist(dut, cfg);
  const bool faulty = !faults.empty();
  const auto bad = faulty ? trace_lbist(dut, cfg, faults, mode) : clean;
  const BitVec& golden = clean.back().misr;
  const BitVec& observed = bad.back().misr;

  if (m.output_format() == OutputFormat::lines) {
    for (std::size_t k = 0; k < clean.size(); ++k) {
      std::cout << "cycle=" << k + 1 << " pattern=" << clean[k].pattern
                << " response=" << clean[k].response << " misr=" << clean[k].misr;
      if (faulty) std::cout << " faulty_response=" << bad[k].response << " faulty_misr=" << bad[k].misr;
      std::cout << "\n";
    }
    std::cout << "signature=" << golden;
    if (faulty) {
      std::cout << " faulty_signature=" << observed << " faults=" << faults.to_string()
                << " mode=" << to_string(mode) << " aliasing=" << (observed == golden ? 1 : 0);
    }
    std::cout << "\n";
    return kExitOk;
  }

  const std::size_t w = std::max<std::size_t>(dut.width(), 10) + 2;
  std::cout << pad("pattern", w) << pad("response", w) << pad("misr", w);
  if (faulty) std::cout << "| " << pad("f.response", w) << "f.misr";
  std::cout << "\n";
  for (std::size_t k = 0; k < clean.size(); ++k) {
    std::cout << pad(clean[k].pattern.to_string(), w) << pad(clean[k].response.to_string(), w)
              << pad(clean[k].misr.to_string(), w);
    if (faulty) std::cout << "| " << pad(bad[k].response.to_string(), w) << bad[k].misr;
    std::cout << "\n";
  }
  std::cout << "\nsignature " << golden << "\n";
  if (faulty) {
    std::cout << "faulty signature " << observed << " (" << faults.to_string() << ", "
              << to_string(mode) << ")" << (observed == golden ? " aliases the golden signature" : "")
              << "\n";
  }
  return kExitOk;
}

std::vector<std::size_t> parse_stage_list(const std::string& text, std::size_t width) {
  std::vector<std::size_t> stages;
  if (text == "all") {
    for (std::size_t i = 0; i < width; ++i) stages.push_back(i);
    return stages;
  }
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = detail::trim(tok);
    if (tok.empty()) continue;
    if (tok.front() == 's') tok.erase(0, 1);
    stages.push_back(detail::parse_index(tok, "stage"));
  }
  return stages;
}

struct AttackFlags {
  std::string stages = "all";
  std::size_t max_faults = 1;
  std::uint64_t cap = AttackOptions{}.max_assignments;
  unsigned threads = 1;
};

int cmd_attack(const ManifestFlags& flags, const AttackFlags& a) {
  const RunManifest m = flags.resolve();
  const Nlfsr dut = m.dut();
  AttackConstraints c;
  c.candidate_stages = parse_stage_list(a.stages, dut.width());
  c.max_faults = a.max_faults;
  c.mode = m.fault_mode();
  AttackReport report;
  try {
    report = enumerate_aliasing_faults(dut, m.config(), c, AttackOptions{a.cap, a.threads});
  } catch (const search_space_exceeded& e) {
    std::cerr << "lbist attack: " << e.what() << "\n";
    return kExitCapExceeded;
  }
  std::cout << (m.output_format() == OutputFormat::lines ? render_report_lines(report)
                                                         : render_report_table(report));
  return report.aliasing_sets.empty() ? kExitNoAlias : kExitOk;
}

int cmd_provision(const ManifestFlags& flags, const std::string& key, const std::string& fusebox) {
  const RunManifest m = flags.resolve();
  FuseboxFile slot(fusebox);
  const NvmRecord r = provision(m.dut(), m.config(), TestKey::parse(key), slot);
  std::cout << "provisioned version=" << r.version << " key=" << r.key.bits
            << " signature=" << r.expected_signature << "\n";
  return kExitOk;
}

int cmd_selftest(const ManifestFlags& flags, const std::string& fusebox) {
  const RunManifest m = flags.resolve();
  FuseboxFile slot(fusebox);
  const auto record = slot.read();
  if (!record) {
    std::cerr << "lbist selftest: no provisioned record in " << fusebox << "\n";
    return kExitNoFusebox;
  }
  const Verdict v = keyed_selftest(m.dut(), m.config(), *record, m.fault_set(), m.fault_mode());
  std::cout << to_string(v.outcome) << " computed=" << v.computed_signature
            << " expected=" << v.expected_signature << "\n";
  return v.passed() ? kExitOk : kExitFail;
}

// "ID=MANIFEST" entries adding device models next to the builtin one.
remote::ModelStore load_models(const std::vector<std::string>& entries) {
  remote::ModelStore store = remote::example_models();
  for (const auto& entry : entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw parse_error("model must be ID=MANIFEST, got \"" + entry + "\"");
    const auto id = static_cast<std::uint32_t>(detail::parse_index(entry.substr(0, eq), "model id"));
    const RunManifest m = RunManifest::load(entry.substr(eq + 1));
    store.add(id, {entry.substr(eq + 1), m.dut(), m.config()});
  }
  return store;
}

struct ServeFlags {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7400;
  std::string policy = "periodic";
  std::uint64_t interval = 10;
  std::string scenario = "sig";
  std::size_t max_sessions = 0;
  long tick_ms = 1000;
  std::uint64_t secret = remote::ServerConfig{}.secret;
  std::uint64_t timeout = remote::ServerConfig{}.timeout;
  unsigned retries = remote::ServerConfig{}.retries;
  bool precompute = false;
  std::vector<std::string> models;
  std::string registry;
  std::string session_log;
  bool verbose = false;
};

int cmd_serve(const ServeFlags& f) {
  remote::ServerConfig cfg;
  cfg.secret = f.secret;
  cfg.timeout = f.timeout;
  cfg.retries = f.retries;
  cfg.signatures = f.precompute ? remote::SignatureSource::precomputed : remote::SignatureSource::on_the_fly;
  cfg.trigger_scenario = remote::parse_scenario(f.scenario);
  remote::TestServer server(cfg, load_models(f.models));
  if (!f.registry.empty() && std::filesystem::exists(f.registry)) server.load_registry(f.registry);

  remote::net::ServeOptions opt;
  opt.policy = remote::net::parse_schedule_policy(f.policy);
  opt.interval = f.interval;
  opt.scenario = cfg.trigger_scenario;
  opt.max_sessions = f.max_sessions;
  opt.tick = std::chrono::milliseconds(f.tick_ms);
  opt.read_commands = opt.policy == remote::net::SchedulePolicy::manual;

  auto listener = remote::net::listen_tcp(f.host, f.port);
  std::cerr << "listening on " << f.host << ":" << listener.local_port() << std::endl;
  remote::net::run_server(server, listener, opt, g_stop, [&](const std::string& line) {
    if (f.verbose) std::cerr << line << std::endl;
  });

  for (const auto& line : server.session_log()) std::cout << line << "\n";
  if (!f.registry.empty()) server.save_registry(f.registry);
  if (!f.session_log.empty()) server.append_session_log(f.session_log);
  for (const auto& [id, s] : server.sessions()) {
    if (s.outcome == remote::SessionOutcome::fail) return kExitFail;
  }
  return kExitOk;
}

struct AgentFlags {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7400;
  std::uint32_t device_id = 0;
  std::uint32_t model_id = remote::kExampleModelId;
  std::size_t max_sessions = 0;
  long tick_ms = 1000;
  std::uint64_t execution_ticks = 0;
  unsigned report_repeats = 0;
  bool verbose = false;
};

int cmd_agent(const ManifestFlags& flags, const AgentFlags& f) {
  const RunManifest m = flags.resolve();
  remote::AgentConfig cfg;
  cfg.device_id = f.device_id;
  cfg.model_id = f.model_id;
  cfg.dut = m.dut();
  cfg.cfg_template = m.config();
  cfg.faults = m.fault_set();
  cfg.mode = m.fault_mode();
  cfg.execution_ticks = f.execution_ticks;
  cfg.report_repeats = f.report_repeats;
  cfg.faults.check_width(cfg.dut.width());
  remote::DeviceAgent agent(cfg);
  const auto summary = remote::net::run_agent(
      agent, f.host, f.port, f.max_sessions, g_stop, std::chrono::milliseconds(f.tick_ms),
      [&](const std::string& line) {
        if (f.verbose) std::cerr << "d" << f.device_id << " " << line << std::endl;
      });
  std::cout << "device=" << f.device_id << " executions=" << agent.executions()
            << " reports=" << summary.reports_sent << (agent.rejected() ? " rejected" : "") << "\n";
  for (const auto& n : agent.notes()) std::cerr << n << "\n";
  return agent.rejected() ? kExitFail : kExitOk;
}

int cmd_simnet(const std::string& path, bool quiet, std::optional<std::uint64_t> rng_seed) {
  auto sc = remote::SimScenario::load(path);
  if (rng_seed) sc.conditions.rng_seed = *rng_seed;
  const auto r = remote::simnet_run(sc.topology, sc.conditions, sc.script);
  if (!quiet) std::cout << r.trace_text() << "\n";
  for (const auto& line : r.session_log) std::cout << "session " << line << "\n";
  const std::size_t pass = r.count(remote::SessionOutcome::pass);
  const std::size_t fail = r.count(remote::SessionOutcome::fail);
  const std::size_t timeout = r.count(remote::SessionOutcome::timeout);
  const std::size_t open = r.count(remote::SessionOutcome::open);
  std::cout << "summary sessions=" << r.sessions.size() << " pass=" << pass << " fail=" << fail
            << " timeout=" << timeout << " open=" << open << " sent=" << r.frames_sent
            << " dropped=" << r.frames_dropped << " duplicated=" << r.frames_duplicated
            << " duplicate_reports=" << r.duplicate_reports << " late_reports=" << r.late_reports
            << " end=" << r.end_time << "\n";
  if (fail > 0) return kExitFail;
  if (timeout > 0 || open > 0) return kExitIncomplete;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LBIST simulation, Trojan attack search and keyed/remote test management"};
  app.require_subcommand(1);

  ManifestFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "replay an LBIST session cycle by cycle");
  sim_flags.attach(simulate);

  ManifestFlags atk_flags;
  AttackFlags atk;
  auto* attack = app.add_subcommand("attack", "search stuck-at assignments whose signature aliases");
  atk_flags.attach(attack);
  attack->add_option("--stages", atk.stages, "candidate stages: all | comma list, e.g. 0,1,3");
  attack->add_option("--max-faults", atk.max_faults, "largest fault set tried");
  attack->add_option("--cap", atk.cap, "refuse searches larger than this many assignments");
  attack->add_option("--threads", atk.threads, "worker threads")->check(CLI::Range(1u, 256u));

  ManifestFlags prov_flags;
  std::string prov_key, prov_fusebox;
  auto* prov = app.add_subcommand("provision", "derive the seed from a key and store key and signature");
  prov_flags.attach(prov, false);
  prov->add_option("--key", prov_key, "test key, MSB first")->required();
  prov->add_option("--fusebox", prov_fusebox, "fusebox file")->required();

  ManifestFlags st_flags;
  std::string st_fusebox;
  auto* selftest = app.add_subcommand("selftest", "run the keyed self-test against a fusebox");
  st_flags.attach(selftest);
  selftest->add_option("--fusebox", st_fusebox, "fusebox file")->required();

  ServeFlags sv;
  auto* serve = app.add_subcommand("serve", "run the remote test-management server");
  serve->add_option("--host", sv.host);
  serve->add_option("--port", sv.port, "TCP port; 0 picks one");
  serve->add_option("--policy", sv.policy, "periodic | on-trigger | manual");
  serve->add_option("--interval", sv.interval, "ticks between periodic tests of a device");
  serve->add_option("--scenario", sv.scenario, "sig | verdict");
  serve->add_option("--max-sessions", sv.max_sessions, "exit after this many closed sessions");
  serve->add_option("--tick-ms", sv.tick_ms, "tick length in milliseconds")->check(CLI::PositiveNumber);
  serve->add_option("--secret", sv.secret, "seed schedule secret");
  serve->add_option("--timeout", sv.timeout, "ticks before a TEST_INIT is resent");
  serve->add_option("--retries", sv.retries, "resends before a session times out");
  serve->add_flag("--precompute", sv.precompute, "precompute expected signatures per device");
  serve->add_option("--model", sv.models, "extra device model as ID=MANIFEST");
  serve->add_option("--registry", sv.registry, "device registry file, loaded and saved");
  serve->add_option("--session-log", sv.session_log, "append closed sessions to this file");
  serve->add_flag("-v,--verbose", sv.verbose);

  ManifestFlags ag_flags;
  AgentFlags ag;
  auto* agent = app.add_subcommand("agent", "run a device agent");
  ag_flags.attach(agent);
  agent->add_option("--host", ag.host);
  agent->add_option("--port", ag.port);
  agent->add_option("--device-id", ag.device_id)->required();
  agent->add_option("--model-id", ag.model_id);
  agent->add_option("--max-sessions", ag.max_sessions, "exit after running this many tests");
  agent->add_option("--tick-ms", ag.tick_ms)->check(CLI::PositiveNumber);
  agent->add_option("--execution-ticks", ag.execution_ticks, "simulated LBIST run time");
  agent->add_option("--report-repeats", ag.report_repeats, "extra unsolicited report copies");
  agent->add_flag("-v,--verbose", ag.verbose);

  std::string sn_path;
  bool sn_quiet = false;
  std::optional<std::uint64_t> sn_seed;
  auto* simnet = app.add_subcommand("simnet", "run a scripted simulated-network scenario");
  simnet->add_option("scenario", sn_path, "scenario JSON file")->required();
  simnet->add_flag("-q,--quiet", sn_quiet, "omit the event trace");
  simnet->add_option("--rng-seed", sn_seed, "override the scenario's network RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*simulate) return cmd_simulate(sim_flags);
    if (*attack) return cmd_attack(atk_flags, atk);
    if (*prov) return cmd_provision(prov_flags, prov_key, prov_fusebox);
    if (*selftest) return cmd_selftest(st_flags, st_fusebox);
    if (*serve) return cmd_serve(sv);
    if (*agent) return cmd_agent(ag_flags, ag);
    if (*simnet) return cmd_simnet(sn_path, sn_quiet, sn_seed);
  } catch (const storage_error& e) {
    std::cerr << "lbist: " << e.what() << "\n";
    return kExitIo;
  } catch (const remote::net::socket_error& e) {
    std::cerr << "lbist: " << e.what() << "\n";
    return kExitIo;
  } catch (const lbist::error& e) {
    std::cerr << "lbist: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
