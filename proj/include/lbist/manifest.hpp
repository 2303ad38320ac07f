#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lbist/dut.hpp"
#include "lbist/engine.hpp"
#include "lbist/error.hpp"
#include "lbist/remote/simnet.hpp"

namespace lbist {

enum class OutputFormat { table, lines };

inline OutputFormat parse_output_format(const std::string& s) {
  if (s == "table") return OutputFormat::table;
  if (s == "lines") return OutputFormat::lines;
  throw parse_error("unknown output format \"" + s + "\"");
}

// Everything one batch run needs. Defaults reproduce the 4-bit worked example.
struct RunManifest {
  std::string dut_path = "builtin:nlfsr4";
  std::string prpg_poly = "1+x+x^2+x^3+x^4";
  std::string prpg_seed = "1011";
  std::string misr_poly = "1+x^3+x^4";
  std::string misr_init;  // empty = all zero
  long long pattern_count = 8;
  std::string faults;
  std::string mode = "capture-only";
  std::string format = "table";

  // Fields present in `j` override the current values.
  void merge_json(const nlohmann::json& j) {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("dut", dut_path);
    get("prpg_poly", prpg_poly);
    get("prpg_seed", prpg_seed);
    get("misr_poly", misr_poly);
    get("misr_init", misr_init);
    get("pattern_count", pattern_count);
    get("faults", faults);
    get("mode", mode);
    get("format", format);
  }

  static RunManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw storage_error("cannot open manifest " + path);
    RunManifest m;
    try {
      m.merge_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("manifest " + path + ": " + e.what());
    }
    m.rebase(std::filesystem::path(path).parent_path());
    return m;
  }

  // Makes a relative DUT path relative to `dir` instead of the working directory.
  void rebase(const std::filesystem::path& dir) {
    if (!dut_path.starts_with("builtin:") && std::filesystem::path(dut_path).is_relative()) {
      dut_path = (dir / dut_path).string();
    }
  }

  Nlfsr dut() const { return load_dut_model(dut_path); }

  LbistConfig config() const {
    if (pattern_count < 1) throw validation_error("pattern count must be >= 1");
    const Gf2Poly misr = Gf2Poly::parse(misr_poly);
    LbistConfig cfg{Gf2Poly::parse(prpg_poly), BitVec::from_string(prpg_seed), misr,
                    misr_init.empty() ? BitVec(misr.degree()) : BitVec::from_string(misr_init),
                    static_cast<std::size_t>(pattern_count)};
    cfg.validate();
    return cfg;
  }

  FaultSet fault_set() const { return FaultSet::parse(faults); }
  FaultMode fault_mode() const { return parse_fault_mode(mode); }
  OutputFormat output_format() const { return parse_output_format(format); }
};

namespace remote {

inline Scenario parse_scenario(const std::string& s) {
  if (s == "sig" || s == "signature" || s == "SIGNATURE_REPORT") return Scenario::signature_report;
  if (s == "verdict" || s == "LOCAL_VERDICT") return Scenario::local_verdict;
  throw parse_error("unknown scenario \"" + s + "\"");
}

// Simulated-network scenario file: topology, network conditions and script.
struct SimScenario {
  Topology topology;
  NetConditions conditions;
  Script script;

  // Relative DUT paths inside `j` resolve against `base_dir`.
  static SimScenario from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    SimScenario sc;
    if (j.contains("conditions")) {
      const auto& c = j.at("conditions");
      sc.conditions.drop_probability = c.value("drop", 0.0);
      sc.conditions.duplicate_probability = c.value("duplicate", 0.0);
      sc.conditions.delay_min = c.value("delay_min", std::uint64_t{1});
      sc.conditions.delay_max = c.value("delay_max", sc.conditions.delay_min);
      sc.conditions.rng_seed = c.value("rng_seed", std::uint64_t{1});
    }
    if (j.contains("server")) {
      const auto& s = j.at("server");
      auto& cfg = sc.topology.server;
      cfg.secret = s.value("secret", cfg.secret);
      cfg.timeout = s.value("timeout", cfg.timeout);
      cfg.retries = s.value("retries", cfg.retries);
      const std::string sig = s.value("signatures", std::string("on-the-fly"));
      if (sig == "precomputed") {
        cfg.signatures = SignatureSource::precomputed;
      } else if (sig != "on-the-fly") {
        throw parse_error("unknown signature source \"" + sig + "\"");
      }
      cfg.trigger_scenario = parse_scenario(s.value("trigger_scenario", std::string("sig")));
    }
    if (j.contains("models")) {
      for (const auto& m : j.at("models")) {
        RunManifest mf;
        mf.merge_json(m);
        mf.rebase(base_dir);
        sc.topology.models.add(m.at("id").get<std::uint32_t>(),
                               {m.value("name", std::string()), mf.dut(), mf.config()});
      }
    }
    for (const auto& a : j.value("agents", nlohmann::json::array())) {
      AgentConfig cfg;
      cfg.device_id = a.at("device_id").get<std::uint32_t>();
      cfg.model_id = a.value("model_id", kExampleModelId);
      RunManifest mf;
      if (const auto* model = sc.topology.models.find(cfg.model_id)) {
        cfg.dut = model->dut;
        cfg.cfg_template = model->cfg_template;
      }
      if (a.contains("dut")) {
        mf.merge_json(a);
        mf.rebase(base_dir);
        cfg.dut = mf.dut();
      }
      cfg.faults = FaultSet::parse(a.value("faults", std::string()));
      cfg.mode = parse_fault_mode(a.value("mode", std::string("capture-only")));
      cfg.execution_ticks = a.value("execution_ticks", cfg.execution_ticks);
      cfg.report_repeats = a.value("report_repeats", cfg.report_repeats);
      cfg.repeat_interval = a.value("repeat_interval", cfg.repeat_interval);
      cfg.hello_interval = a.value("hello_interval", cfg.hello_interval);
      sc.topology.agents.push_back(std::move(cfg));
    }
    for (const auto& p : j.value("periodic", nlohmann::json::array())) {
      sc.script.periodic.push_back({p.at("device").get<std::uint32_t>(), p.value("start", std::uint64_t{0}),
                                    p.value("interval", std::uint64_t{20}),
                                    p.value("cycles", std::size_t{1}),
                                    parse_scenario(p.value("scenario", std::string("sig")))});
    }
    for (const auto& m : j.value("manual", nlohmann::json::array())) {
      sc.script.manual.push_back({m.at("at").get<std::uint64_t>(), m.at("device").get<std::uint32_t>(),
                                  parse_scenario(m.value("scenario", std::string("sig")))});
    }
    for (const auto& t : j.value("triggers", nlohmann::json::array())) {
      sc.script.triggers.push_back({t.at("at").get<std::uint64_t>(),
                                    t.at("requester").get<std::uint32_t>(),
                                    t.at("target").get<std::uint32_t>(),
                                    t.value("reason", std::uint8_t{reason::comm_failure})});
    }
    sc.script.horizon = j.value("horizon", sc.script.horizon);
    sc.conditions.validate();
    return sc;
  }

  static SimScenario load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw storage_error("cannot open scenario " + path);
    try {
      return from_json(nlohmann::json::parse(in), std::filesystem::path(path).parent_path());
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("scenario " + path + ": " + e.what());
    }
  }
};

}  // namespace remote
}  // namespace lbist
