#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "lbist/keyed.hpp"
#include "oracle.hpp"

using namespace lbist;

namespace {

BitVec bits(const char* s) { return BitVec::from_string(s); }

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "lbist_keyed_test";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(DeriveSeed, FoldExamples) {
  EXPECT_EQ(derive_seed(TestKey::parse("1011"), 4), bits("1011"));
  EXPECT_EQ(derive_seed(TestKey::parse("10111011"), 4), bits("0001"));
  EXPECT_EQ(derive_seed(TestKey::parse("01011101"), 4), bits("1000"));
  // Short final chunk is zero-padded: 11 | 0110 -> 0110 ^ 0011.
  EXPECT_EQ(derive_seed(TestKey::parse("110110"), 4), bits("0101"));
  EXPECT_THROW(derive_seed(TestKey{}, 4), validation_error);
}

TEST(DeriveSeed, NeverZeroProperty) {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t key_width = 1 + rng() % 96;
    const std::size_t width = 1 + rng() % 20;
    BitVec key(key_width);
    for (std::size_t b = 0; b < key_width; ++b) key.set(b, rng() % 4 == 0);
    const auto seed = derive_seed(TestKey{key}, width);
    ASSERT_EQ(seed.width(), width);
    ASSERT_FALSE(seed.is_zero());
  }
}

TEST(Provision, StoresKeyAndGoldenSignatureWithIncreasingVersion) {
  MemorySlot slot;
  const auto r1 = provision(example_nlfsr4(), example_config4(), TestKey::parse("1011"), slot);
  EXPECT_EQ(r1.expected_signature, bits("0101"));
  EXPECT_EQ(r1.version, 1u);

  const auto r2 = provision(example_nlfsr4(), example_config4(), TestKey::parse("0001"), slot);
  EXPECT_EQ(r2.version, 2u);
  EXPECT_EQ(r2.key, TestKey::parse("0001"));
  EXPECT_EQ(r2.expected_signature.to_uint(), oracle::example_signature(0b0001, {}));
  EXPECT_EQ(r2.expected_signature, bits("0101"));

  const auto r3 = provision(example_nlfsr4(), example_config4(), TestKey::parse("0001"), slot);
  EXPECT_EQ(r3.expected_signature, r2.expected_signature);
  EXPECT_EQ(r3.version, 3u);
  EXPECT_EQ(slot.read(), r3);
}

TEST(Fusebox, FileRoundTripAndAtomicReplace) {
  const auto path = temp_path("fusebox.txt");
  FuseboxFile fuse(path);
  EXPECT_FALSE(fuse.read().has_value());
  provision(example_nlfsr4(), example_config4(), TestKey::parse("1011"), fuse);
  provision(example_nlfsr4(), example_config4(), TestKey::parse("0110"), fuse);
  const auto rec = FuseboxFile(path).read();
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->version, 2u);
  EXPECT_EQ(rec->key.bits, bits("0110"));
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));

  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(text.find("version 2\n"), std::string::npos);
  EXPECT_NE(text.find("key 0110\n"), std::string::npos);
}

TEST(Fusebox, CorruptFileIsAParseError) {
  const auto path = temp_path("corrupt.txt");
  std::ofstream(path) << "version 1\nkey 1011\n";
  EXPECT_THROW(FuseboxFile(path).read(), parse_error);
  std::ofstream(path) << "version x\nkey 1011\nsignature 0101\n";
  EXPECT_THROW(FuseboxFile(path).read(), parse_error);
}

TEST(Fusebox, WriteToMissingDirectoryFails) {
  FuseboxFile fuse("/nonexistent-dir/for/fusebox.txt");
  EXPECT_THROW(provision(example_nlfsr4(), example_config4(), TestKey::parse("1011"), fuse),
               storage_error);
}

TEST(KeyedSelftest, ExampleTunedKey) {
  MemorySlot slot;
  provision(example_nlfsr4(), example_config4(), TestKey::parse("1011"), slot);
  EXPECT_TRUE(keyed_selftest(example_nlfsr4(), example_config4(), slot).passed());
  EXPECT_TRUE(
      keyed_selftest(example_nlfsr4(), example_config4(), slot, FaultSet{{1, false}}).passed());
}

TEST(KeyedSelftest, MissingRecord) {
  MemorySlot slot;
  EXPECT_THROW(keyed_selftest(example_nlfsr4(), example_config4(), slot), storage_error);
}

TEST(KeyedSelftest, FaultFreePassesForEveryKeyUpToWidth8) {
  for (std::size_t kw = 1; kw <= 8; ++kw) {
    for (std::uint64_t k = 0; k < (1u << kw); ++k) {
      MemorySlot slot;
      const TestKey key{BitVec::from_uint(k, kw)};
      provision(example_nlfsr4(), example_config4(), key, slot);
      ASSERT_TRUE(keyed_selftest(example_nlfsr4(), example_config4(), slot).passed())
          << key.bits.to_string();
    }
  }
}

TEST(KeyedSelftest, TunedTrojanVerdictPerKeyMatchesReferenceModel) {
  const FaultSet trojan{{1, false}};
  std::size_t passes = 0;
  for (std::uint32_t k = 1; k < 16; ++k) {
    MemorySlot slot;
    provision(example_nlfsr4(), example_config4(), TestKey{BitVec::from_uint(k, 4)}, slot);
    const bool pass = keyed_selftest(example_nlfsr4(), example_config4(), slot, trojan).passed();
    EXPECT_EQ(pass, oracle::example_signature(k, {{1, 0}}) == oracle::example_signature(k, {})) << k;
    passes += pass;
  }
  // Only the key the Trojan was tuned for lets it through.
  EXPECT_EQ(passes, 1u);
}

TEST(KeyedSelftest, DifferentKeysGiveDifferentExpectedSignatures) {
  std::set<BitVec> signatures;
  for (std::uint64_t k = 1; k < 16; ++k) {
    MemorySlot slot;
    signatures.insert(
        provision(example_nlfsr4(), example_config4(), TestKey{BitVec::from_uint(k, 4)}, slot)
            .expected_signature);
  }
  EXPECT_GT(signatures.size(), 1u);
}
