#include <gtest/gtest.h>

#include <random>

#include "lbist/bitvec.hpp"
#include "lbist/gf2poly.hpp"

using lbist::BitVec;
using lbist::Gf2Poly;

TEST(BitVec, TextIsMostSignificantFirst) {
  const auto v = BitVec::from_string("1011");
  ASSERT_EQ(v.width(), 4u);
  EXPECT_TRUE(v[0]);
  EXPECT_TRUE(v[1]);
  EXPECT_FALSE(v[2]);
  EXPECT_TRUE(v[3]);
  EXPECT_EQ(v.to_string(), "1011");
  EXPECT_EQ(v.to_uint(), 0b1011u);
  EXPECT_EQ(v.to_hex(), "b");
}

TEST(BitVec, RejectsBadCharacters) {
  EXPECT_THROW(BitVec::from_string("10a1"), lbist::parse_error);
  EXPECT_THROW(BitVec::from_string(""), lbist::parse_error);
}

TEST(BitVec, XorRequiresEqualWidth) {
  EXPECT_EQ((BitVec::from_string("1100") ^ BitVec::from_string("1010")).to_string(), "0110");
  EXPECT_THROW(BitVec::from_string("11") ^ BitVec::from_string("101"), lbist::width_mismatch);
}

TEST(BitVec, PackingPutsBitIInByteIOver8) {
  const auto v = BitVec::from_string("1" "00000000" "1");  // bits 0 and 9
  const auto bytes = v.pack();
  ASSERT_EQ(bytes.size(), 2u);
  EXPECT_EQ(bytes[0], 0x01);
  EXPECT_EQ(bytes[1], 0x02);
}

TEST(BitVec, UnpackRejectsNonzeroPadAndWrongLength) {
  const std::uint8_t pad[] = {0x10};
  EXPECT_THROW(BitVec::unpack(pad, 4), lbist::parse_error);
  const std::uint8_t two[] = {0x01, 0x00};
  EXPECT_THROW(BitVec::unpack(two, 4), lbist::parse_error);
}

TEST(BitVec, PackUnpackRoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const std::size_t width = 1 + rng() % 40;
    BitVec v(width);
    for (std::size_t b = 0; b < width; ++b) v.set(b, rng() & 1);
    EXPECT_EQ(BitVec::unpack(v.pack(), width), v);
    EXPECT_EQ(BitVec::from_string(v.to_string()), v);
  }
}

TEST(Gf2Poly, ParsesExampleConnectionPolynomials) {
  const auto prpg = Gf2Poly::parse("1+x+x^2+x^3+x^4");
  EXPECT_EQ(prpg.degree(), 4u);
  EXPECT_EQ(prpg.coeffs(), (std::vector<std::uint8_t>{1, 1, 1, 1, 1}));

  const auto misr = Gf2Poly::parse("1 + x^3 + x^4");
  EXPECT_EQ(misr.degree(), 4u);
  EXPECT_EQ(misr.coeffs(), (std::vector<std::uint8_t>{1, 0, 0, 1, 1}));
  EXPECT_EQ(misr.to_string(), "1+x^3+x^4");
}

TEST(Gf2Poly, TermsMayAppearInAnyOrder) {
  EXPECT_EQ(Gf2Poly::parse("x^4+x^3+1"), Gf2Poly::parse("1+x^3+x^4"));
}

TEST(Gf2Poly, DuplicateExponentIsAParseError) {
  EXPECT_THROW(Gf2Poly::parse("x^4+x^4"), lbist::parse_error);
  EXPECT_THROW(Gf2Poly::parse("1+x+x^1+x^3"), lbist::parse_error);
}

TEST(Gf2Poly, MalformedTerms) {
  EXPECT_THROW(Gf2Poly::parse("1+y^3"), lbist::parse_error);
  EXPECT_THROW(Gf2Poly::parse("1++x^3"), lbist::parse_error);
  EXPECT_THROW(Gf2Poly::parse("1+x^"), lbist::parse_error);
  EXPECT_THROW(Gf2Poly::parse("2+x^3"), lbist::parse_error);
  EXPECT_THROW(Gf2Poly::parse(""), lbist::parse_error);
}

TEST(Gf2Poly, ConnectionPolynomialInvariants) {
  EXPECT_THROW(Gf2Poly::parse("x+x^4"), lbist::validation_error);  // c_0 = 0
  EXPECT_THROW(Gf2Poly::parse("1+x"), lbist::validation_error);    // degree 1
  EXPECT_THROW(Gf2Poly({1, 1, 0}), lbist::validation_error);        // c_n = 0
}
