#pragma once

// Transmitter: bits -> symbols -> framed packet -> per-slot LED drive.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "csk/colorspace.hpp"

namespace csk {

/// One bit per element, values 0 or 1.
using BitVector = std::vector<std::uint8_t>;

BitVector bits_from_string(std::string_view s);  // "0110..." (spaces ignored)
std::string bits_to_string(const BitVector& bits);
BitVector bits_from_bytes(std::string_view bytes);  // MSB first per byte
BitVector bits_from_hex(std::string_view hex);
std::string bits_to_hex(const BitVector& bits);

/// ASCII "hello", 40 bits.
BitVector hello_bits();

/// Per-channel LED efficiency relative to the strongest channel.
struct EfficiencyTriple {
  double red = 1.00;
  double green = 0.45;
  double blue = 0.75;

  Rgb as_rgb() const { return {red, green, blue}; }
  void validate() const;
};

enum class SlotKind { Preamble, Anchor, Payload, Etb };

std::string_view to_string(SlotKind kind);
SlotKind slot_kind_from_string(std::string_view s);

struct FrameLayout {
  int preamble_slots = 10;
  /// Indices into the anchor constellation (order anchor_order).
  std::vector<std::size_t> anchor_ids{0, 1, 2, 3};
  int anchor_order = 4;
  int slots_per_anchor = 2;
  int etb_state_slots = 10;

  std::size_t anchor_slots() const { return anchor_ids.size() * static_cast<std::size_t>(slots_per_anchor); }
  std::size_t payload_offset() const { return static_cast<std::size_t>(preamble_slots) + anchor_slots(); }
  std::size_t total_slots(std::size_t payload_len) const {
    return payload_offset() + payload_len + static_cast<std::size_t>(etb_state_slots);
  }
  void validate() const;
};

struct Slot {
  SlotKind kind = SlotKind::Payload;
  /// Preamble/ETB index into 4-CSK, anchors into the anchor constellation,
  /// payload into the payload constellation.
  std::size_t symbol = 0;
  /// Pre-calibration optical power triple, sums to 1.
  Rgb power{};
};

struct Packet {
  FrameLayout layout;
  std::vector<std::size_t> payload_symbols;
  std::vector<Slot> slots;
};

/// Symbols plus the number of zero bits appended to fill the last symbol.
struct SymbolStream {
  std::vector<std::size_t> symbols;
  int pad_count = 0;
};

SymbolStream bits_to_symbols(const BitVector& bits, const Constellation& c);

/// Inverse of bits_to_symbols; the last pad_count bits are dropped.
BitVector symbols_to_bits(const std::vector<std::size_t>& symbols, const Constellation& c, int pad_count);

/// Solves the 3x3 mixture system for the power triple producing `sym`.
/// Components in [-1e-9, 0] are clamped to zero; anything below -1e-9 is
/// out of gamut.
Rgb symbol_powers(ChromaticityPoint sym, const Vertices& vertices);

/// Commanded PWM duty: component-wise p * e.
Rgb apply_efficiency(const Rgb& p, const EfficiencyTriple& e);

/// Red and blue vertex indices in 4-CSK, used by the preamble and ETB.
inline constexpr std::size_t kRedSymbol = 0;
inline constexpr std::size_t kBlueSymbol = 2;

Packet frame_packet(const std::vector<std::size_t>& payload, const FrameLayout& layout, const Constellation& c);

struct PowerWaveform {
  double baud_hz = 0.0;
  EfficiencyTriple efficiency;
  /// Calibrated duty triple per slot, in slot order.
  std::vector<Rgb> duty;

  std::size_t size() const { return duty.size(); }
  double duration_s() const { return static_cast<double>(duty.size()) / baud_hz; }
  /// Optical power the ideally calibrated LED emits for slot i (duty / e).
  Rgb optical_power(std::size_t i) const;
};

PowerWaveform packet_to_waveform(const Packet& pkt, double baud_hz, const EfficiencyTriple& e);

}  // namespace csk
