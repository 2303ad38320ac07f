#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "lbist/bitvec.hpp"
#include "lbist/dut.hpp"
#include "lbist/engine.hpp"
#include "lbist/error.hpp"

namespace lbist {

// Test key programmed after manufacturing; the PRPG seed is derived from it.
struct TestKey {
  BitVec bits;

  static TestKey parse(std::string_view text) { return {BitVec::from_string(text)}; }
  friend bool operator==(const TestKey&, const TestKey&) = default;
};

// XOR-fold the key into `width` bits, chunk j covering key bits
// [j*width, (j+1)*width), last chunk zero-padded. An all-zero fold becomes
// the unit vector so the PRPG never starts in its fixed point.
inline BitVec derive_seed(const TestKey& key, std::size_t width) {
  if (key.bits.empty()) throw validation_error("empty test key");
  if (width == 0) throw validation_error("seed width must be >= 1");
  BitVec seed(width);
  for (std::size_t i = 0; i < key.bits.width(); ++i) {
    if (key.bits[i]) seed.set(i % width, !seed[i % width]);
  }
  if (seed.is_zero()) seed = BitVec::unit(width);
  return seed;
}

struct NvmRecord {
  TestKey key;
  BitVec expected_signature;
  std::uint64_t version = 0;

  friend bool operator==(const NvmRecord&, const NvmRecord&) = default;
};

// One-record non-volatile slot.
class NvmSlot {
 public:
  virtual ~NvmSlot() = default;
  virtual std::optional<NvmRecord> read() const = 0;
  virtual void write(const NvmRecord& record) = 0;
};

class MemorySlot final : public NvmSlot {
 public:
  std::optional<NvmRecord> read() const override { return record_; }
  void write(const NvmRecord& record) override { record_ = record; }

 private:
  std::optional<NvmRecord> record_;
};

// Text file emulating the on-chip fusebox:
//
//   version 2
//   key 0001
//   signature 0110
//
// Updates write a sibling temp file and rename it over the old one.
class FuseboxFile final : public NvmSlot {
 public:
  explicit FuseboxFile(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const noexcept { return path_; }

  std::optional<NvmRecord> read() const override {
    std::ifstream in(path_);
    if (!in) return std::nullopt;
    std::optional<std::uint64_t> version;
    std::optional<BitVec> key, signature;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string field, value;
      if (!(ls >> field)) continue;
      if (field[0] == '#') continue;
      if (!(ls >> value)) throw parse_error("fusebox field \"" + field + "\" has no value");
      if (field == "version") {
        try {
          version = std::stoull(value);
        } catch (const std::exception&) {
          throw parse_error("bad fusebox version \"" + value + "\"");
        }
      } else if (field == "key") {
        key = BitVec::from_string(value);
      } else if (field == "signature") {
        signature = BitVec::from_string(value);
      } else {
        throw parse_error("unknown fusebox field \"" + field + "\"");
      }
    }
    if (!version || !key || !signature) {
      throw parse_error("fusebox " + path_.string() + " is incomplete");
    }
    return NvmRecord{TestKey{*key}, *signature, *version};
  }

  void write(const NvmRecord& record) override {
    auto tmp = path_;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw storage_error("cannot write " + tmp.string());
      out << "version " << record.version << "\n"
          << "key " << record.key.bits.to_string() << "\n"
          << "signature " << record.expected_signature.to_string() << "\n";
      out.flush();
      if (!out) throw storage_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path_, ec);
    if (ec) throw storage_error("cannot replace " + path_.string() + ": " + ec.message());
  }

 private:
  std::filesystem::path path_;
};

// Post-manufacturing personalization: derive the seed, simulate the golden
// signature under it and store key and signature together.
inline NvmRecord provision(const Nlfsr& dut, const LbistConfig& cfg_template,
                           const TestKey& key, NvmSlot& slot) {
  const LbistConfig cfg = cfg_template.with_seed(derive_seed(key, cfg_template.width()));
  const auto previous = slot.read();
  NvmRecord record{key, golden_signature(dut, cfg), previous ? previous->version + 1 : 1};
  slot.write(record);
  return record;
}

inline Verdict keyed_selftest(const Nlfsr& dut, const LbistConfig& cfg_template,
                              const NvmRecord& record, const FaultSet& faults = {},
                              FaultMode mode = FaultMode::capture_only) {
  const LbistConfig cfg = cfg_template.with_seed(derive_seed(record.key, cfg_template.width()));
  return decide(run_lbist(dut, cfg, faults, mode), record.expected_signature);
}

inline Verdict keyed_selftest(const Nlfsr& dut, const LbistConfig& cfg_template,
                              const NvmSlot& slot, const FaultSet& faults = {},
                              FaultMode mode = FaultMode::capture_only) {
  const auto record = slot.read();
  if (!record) throw storage_error("no provisioned test key");
  return keyed_selftest(dut, cfg_template, *record, faults, mode);
}

}  // namespace lbist
