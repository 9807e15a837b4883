#include <gtest/gtest.h>

#include <random>

#include "csk/colorspace.hpp"
#include "csk/error.hpp"
#include "csk/phy_tx.hpp"

using namespace csk;

namespace {

// Cramer's rule on M P = [x, y, 1].
Rgb cramer(ChromaticityPoint s, const Vertices& v) {
  auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h, double i) {
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  };
  const double d = det3(v[0].x, v[1].x, v[2].x, v[0].y, v[1].y, v[2].y, 1, 1, 1);
  return {det3(s.x, v[1].x, v[2].x, s.y, v[1].y, v[2].y, 1, 1, 1) / d,
          det3(v[0].x, s.x, v[2].x, v[0].y, s.y, v[2].y, 1, 1, 1) / d,
          det3(v[0].x, v[1].x, s.x, v[0].y, v[1].y, s.y, 1, 1, 1) / d};
}

std::vector<std::size_t> kinds_to_symbols(const Packet& p, SlotKind kind) {
  std::vector<std::size_t> out;
  for (const auto& s : p.slots)
    if (s.kind == kind) out.push_back(s.symbol);
  return out;
}

}  // namespace

TEST(Bits, HelloIsFortyBits) {
  const BitVector h = hello_bits();
  ASSERT_EQ(h.size(), 40u);
  EXPECT_EQ(bits_to_string(h).substr(0, 16), "0110100001100101");
  EXPECT_EQ(bits_to_hex(h), "68656c6c6f");
}

TEST(Bits, HexRoundTrip) {
  EXPECT_EQ(bits_to_hex(bits_from_hex("a5F0")), "a5f0");
  EXPECT_THROW(bits_from_hex("zz"), Error);
  EXPECT_THROW(bits_from_string("0120"), Error);
}

TEST(BitsToSymbols, FirstHelloByteIn4Csk) {
  const Constellation c = make_constellation(4, default_vertices());
  const SymbolStream s = bits_to_symbols(bits_from_string("01101000"), c);
  EXPECT_EQ(s.symbols, (std::vector<std::size_t>{1, 2, 2, 0}));
  EXPECT_EQ(s.pad_count, 0);
}

TEST(BitsToSymbols, NibbleIn16Csk) {
  const Constellation c = make_constellation(16, default_vertices());
  EXPECT_EQ(bits_to_symbols(bits_from_string("0110"), c).symbols, (std::vector<std::size_t>{6}));
}

TEST(BitsToSymbols, PadsTrailingBits) {
  const Constellation c = make_constellation(4, default_vertices());
  const SymbolStream s = bits_to_symbols(bits_from_string("011"), c);
  EXPECT_EQ(s.symbols, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(s.pad_count, 1);
}

TEST(SymbolsToBits, InverseExamples) {
  const Constellation c4 = make_constellation(4, default_vertices());
  const Constellation c16 = make_constellation(16, default_vertices());
  EXPECT_EQ(bits_to_string(symbols_to_bits({1, 2, 2, 0}, c4, 0)), "01101000");
  EXPECT_EQ(bits_to_string(symbols_to_bits({6}, c16, 0)), "0110");
  EXPECT_EQ(bits_to_string(symbols_to_bits({1, 2}, c4, 1)), "011");
}

TEST(SymbolsToBits, RoundTripRandomLengths) {
  std::mt19937_64 rng(3);
  for (int order : {4, 8, 16}) {
    const Constellation c = make_constellation(order, default_vertices());
    for (std::size_t n = 1; n <= 512; n += 7) {
      BitVector b(n);
      for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1U);
      const SymbolStream s = bits_to_symbols(b, c);
      ASSERT_EQ(symbols_to_bits(s.symbols, c, s.pad_count), b) << "order " << order << " n " << n;
    }
  }
}

TEST(SymbolPowers, CentroidAndVertex) {
  const Vertices v = default_vertices();
  const ChromaticityPoint centroid{(v[0].x + v[1].x + v[2].x) / 3, (v[0].y + v[1].y + v[2].y) / 3};
  for (double p : symbol_powers(centroid, v)) EXPECT_NEAR(p, 1.0 / 3, 1e-12);
  const Rgb g = symbol_powers(v[1], v);
  EXPECT_NEAR(g[0], 0.0, 1e-12);
  EXPECT_NEAR(g[1], 1.0, 1e-12);
  EXPECT_NEAR(g[2], 0.0, 1e-12);
}

TEST(SymbolPowers, MatchesCramerOracle) {
  const Vertices v = default_vertices();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1 - a;
      b = 1 - b;
    }
    const ChromaticityPoint s = mix_chromaticity({a, b, 1 - a - b}, v);
    const Rgb p = symbol_powers(s, v);
    const Rgb q = cramer(s, v);
    for (int k = 0; k < 3; ++k) ASSERT_NEAR(p[static_cast<std::size_t>(k)], q[static_cast<std::size_t>(k)], 1e-9);
    const auto back = mix_chromaticity(p, v);
    ASSERT_NEAR(back.x, s.x, 1e-9);
    ASSERT_NEAR(back.y, s.y, 1e-9);
    ASSERT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-9);
  }
}

TEST(SymbolPowers, Errors) {
  const Vertices v = default_vertices();
  const Vertices line{ChromaticityPoint{0.1, 0.1}, ChromaticityPoint{0.2, 0.2}, ChromaticityPoint{0.3, 0.3}};
  try {
    symbol_powers({0.2, 0.2}, line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularMatrix);
  }
  try {
    symbol_powers({0.9, 0.9}, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfGamut);
  }
}

TEST(Efficiency, DefaultsScaleDuty) {
  const EfficiencyTriple e;
  const Rgb d = apply_efficiency({1.0 / 3, 1.0 / 3, 1.0 / 3}, e);
  EXPECT_NEAR(d[0], 0.3333, 1e-4);
  EXPECT_NEAR(d[1], 0.1500, 1e-12);
  EXPECT_NEAR(d[2], 0.2500, 1e-12);
  EXPECT_EQ(apply_efficiency({1, 0, 0}, e), (Rgb{1, 0, 0}));
  EXPECT_EQ(apply_efficiency({0, 0, 1}, e), (Rgb{0, 0, 0.75}));
}

TEST(Efficiency, OutOfRangeRejected) {
  EfficiencyTriple e;
  e.green = 0.0;
  EXPECT_THROW(e.validate(), Error);
  e.green = 1.5;
  EXPECT_THROW(e.validate(), Error);
}

TEST(FramePacket, DefaultLayoutSlotCounts) {
  const Constellation c = make_constellation(4, default_vertices());
  const std::vector<std::size_t> payload(20, 1);
  const Packet p = frame_packet(payload, FrameLayout{}, c);
  EXPECT_EQ(p.slots.size(), 48u);
  EXPECT_EQ(kinds_to_symbols(p, SlotKind::Preamble), (std::vector<std::size_t>{0, 2, 0, 2, 0, 2, 0, 2, 0, 2}));
  EXPECT_EQ(kinds_to_symbols(p, SlotKind::Etb), (std::vector<std::size_t>{0, 0, 2, 2, 0, 0, 2, 2, 0, 0}));
  EXPECT_EQ(kinds_to_symbols(p, SlotKind::Anchor), (std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 3, 3}));
  EXPECT_EQ(kinds_to_symbols(p, SlotKind::Payload), payload);
}

TEST(FramePacket, SlotSequenceOrder) {
  const Constellation c = make_constellation(8, default_vertices());
  FrameLayout layout;
  layout.anchor_order = 8;
  layout.anchor_ids = {7, 3, 5};
  const Packet p = frame_packet({4, 6}, layout, c);
  ASSERT_EQ(p.slots.size(), layout.total_slots(2));
  EXPECT_EQ(p.slots[10].kind, SlotKind::Anchor);
  EXPECT_EQ(p.slots[10].symbol, 7u);
  EXPECT_EQ(p.slots[12].symbol, 3u);
  EXPECT_EQ(p.slots[16].kind, SlotKind::Payload);
  EXPECT_EQ(p.slots[17].symbol, 6u);
  EXPECT_EQ(p.slots[18].kind, SlotKind::Etb);
  // Anchor power comes from the anchor constellation.
  EXPECT_EQ(p.slots[10].power, c.powers[7]);
}

TEST(FramePacket, LayoutValidation) {
  const Constellation c = make_constellation(4, default_vertices());
  FrameLayout odd;
  odd.preamble_slots = 9;
  EXPECT_THROW(frame_packet({0}, odd, c), Error);
  FrameLayout dup;
  dup.anchor_ids = {0, 0};
  EXPECT_THROW(frame_packet({0}, dup, c), Error);
  FrameLayout none;
  none.anchor_ids.clear();
  EXPECT_THROW(frame_packet({0}, none, c), Error);
  EXPECT_THROW(frame_packet({}, FrameLayout{}, c), Error);
}

TEST(Waveform, DurationAndCalibration) {
  const Constellation c = make_constellation(4, default_vertices());
  const Packet p = frame_packet(std::vector<std::size_t>(20, 0), FrameLayout{}, c);
  const PowerWaveform w = packet_to_waveform(p, 500.0, EfficiencyTriple{});
  ASSERT_EQ(w.size(), 48u);
  EXPECT_NEAR(w.duration_s(), 0.096, 1e-15);
  for (std::size_t i = 18; i < 38; ++i) EXPECT_EQ(w.duty[i], (Rgb{1, 0, 0}));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Rgb o = w.optical_power(i);
    EXPECT_NEAR(o[0] + o[1] + o[2], 1.0, 1e-12);
    EXPECT_EQ(o, p.slots[i].power);
  }
}
