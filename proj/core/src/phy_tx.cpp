#include "csk/phy_tx.hpp"

#include <Eigen/Dense>
#include <cctype>
#include <cmath>

#include "csk/error.hpp"

namespace csk {

BitVector bits_from_string(std::string_view s) {
  BitVector bits;
  for (char ch : s) {
    if (ch == '0' || ch == '1') {
      bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    } else if (!std::isspace(static_cast<unsigned char>(ch)) && ch != '_') {
      throw Error(ErrorCode::InvalidArgument, std::string("not a bit: ") + ch);
    }
  }
  return bits;
}

std::string bits_to_string(const BitVector& bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

BitVector bits_from_bytes(std::string_view bytes) {
  BitVector bits;
  bits.reserve(bytes.size() * 8);
  for (unsigned char byte : bytes) {
    for (int k = 7; k >= 0; --k) bits.push_back(static_cast<std::uint8_t>((byte >> k) & 1U));
  }
  return bits;
}

BitVector bits_from_hex(std::string_view hex) {
  BitVector bits;
  for (char ch : hex) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    int v = 0;
    if (ch >= '0' && ch <= '9') {
      v = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      v = ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      v = ch - 'A' + 10;
    } else {
      throw Error(ErrorCode::InvalidArgument, std::string("not a hex digit: ") + ch);
    }
    for (int k = 3; k >= 0; --k) bits.push_back(static_cast<std::uint8_t>((v >> k) & 1));
  }
  return bits;
}

std::string bits_to_hex(const BitVector& bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    int v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      v = (v << 1) | (i + k < bits.size() ? bits[i + k] : 0);
    }
    s.push_back(kDigits[v]);
  }
  return s;
}

BitVector hello_bits() { return bits_from_bytes("hello"); }

void EfficiencyTriple::validate() const {
  for (double e : {red, green, blue}) {
    if (!(e > 0.0 && e <= 1.0)) throw Error(ErrorCode::InvalidArgument, "efficiency must be in (0, 1]");
  }
}

std::string_view to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::Preamble: return "PREAMBLE";
    case SlotKind::Anchor: return "ANCHOR";
    case SlotKind::Payload: return "PAYLOAD";
    case SlotKind::Etb: return "ETB";
  }
  return "?";
}

SlotKind slot_kind_from_string(std::string_view s) {
  if (s == "PREAMBLE") return SlotKind::Preamble;
  if (s == "ANCHOR") return SlotKind::Anchor;
  if (s == "PAYLOAD") return SlotKind::Payload;
  if (s == "ETB") return SlotKind::Etb;
  throw Error(ErrorCode::InvalidArgument, "unknown slot kind " + std::string(s));
}

void FrameLayout::validate() const {
  if (preamble_slots < 2 || preamble_slots % 2 != 0) {
    throw Error(ErrorCode::Config, "preamble_slots must be even and >= 2");
  }
  if (anchor_ids.empty()) throw Error(ErrorCode::Config, "anchor_ids must be non-empty");
  for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
    if (anchor_ids[i] >= static_cast<std::size_t>(anchor_order)) {
      throw Error(ErrorCode::Config, "anchor id outside anchor constellation");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (anchor_ids[i] == anchor_ids[j]) throw Error(ErrorCode::Config, "anchor ids must be distinct");
    }
  }
  if (slots_per_anchor < 1) throw Error(ErrorCode::Config, "slots_per_anchor must be >= 1");
  if (etb_state_slots < 0) throw Error(ErrorCode::Config, "etb_state_slots must be >= 0");
}

SymbolStream bits_to_symbols(const BitVector& bits, const Constellation& c) {
  const auto k = static_cast<std::size_t>(c.bits_per_symbol);
  SymbolStream out;
  const std::size_t rem = bits.size() % k;
  out.pad_count = rem == 0 ? 0 : static_cast<int>(k - rem);
  const std::size_t n_symbols = (bits.size() + k - 1) / k;
  out.symbols.reserve(n_symbols);
  for (std::size_t s = 0; s < n_symbols; ++s) {
    std::uint32_t pattern = 0;
    for (std::size_t b = 0; b < k; ++b) {
      const std::size_t idx = s * k + b;
      pattern = (pattern << 1) | (idx < bits.size() ? (bits[idx] & 1U) : 0U);
    }
    out.symbols.push_back(c.symbol_for_bits(pattern));
  }
  return out;
}

BitVector symbols_to_bits(const std::vector<std::size_t>& symbols, const Constellation& c, int pad_count) {
  const int k = c.bits_per_symbol;
  if (pad_count < 0 || pad_count >= k) throw Error(ErrorCode::InvalidArgument, "pad_count must be < bits_per_symbol");
  BitVector bits;
  bits.reserve(symbols.size() * static_cast<std::size_t>(k));
  for (std::size_t s : symbols) {
    if (s >= c.bit_map.size()) throw Error(ErrorCode::OutOfBounds, "symbol index outside constellation");
    const std::uint32_t pattern = c.bit_map[s];
    for (int b = k - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((pattern >> b) & 1U));
  }
  if (!symbols.empty()) bits.resize(bits.size() - static_cast<std::size_t>(pad_count));
  return bits;
}

Rgb symbol_powers(ChromaticityPoint sym, const Vertices& v) {
  Eigen::Matrix3d m;
  m << v[0].x, v[1].x, v[2].x,
       v[0].y, v[1].y, v[2].y,
       1.0, 1.0, 1.0;
  // det(m) is twice the signed triangle area.
  if (std::abs(m.determinant()) < 2e-12) throw Error(ErrorCode::SingularMatrix, "vertex matrix is singular");
  const Eigen::Vector3d p = m.partialPivLu().solve(Eigen::Vector3d(sym.x, sym.y, 1.0));
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    if (p[c] < -1e-9) throw Error(ErrorCode::OutOfGamut, "chromaticity outside the LED triangle");
    out[static_cast<std::size_t>(c)] = p[c] <= 0.0 ? 0.0 : p[c];
  }
  return out;
}

Rgb apply_efficiency(const Rgb& p, const EfficiencyTriple& e) {
  return {p[0] * e.red, p[1] * e.green, p[2] * e.blue};
}

Packet frame_packet(const std::vector<std::size_t>& payload, const FrameLayout& layout, const Constellation& c) {
  if (payload.empty()) throw Error(ErrorCode::InvalidArgument, "payload must be non-empty");
  layout.validate();
  const Constellation base = c.order == 4 ? c : make_constellation(4, c.vertices);
  const Constellation anchors = layout.anchor_order == c.order ? c : make_constellation(layout.anchor_order, c.vertices);

  Packet pkt;
  pkt.layout = layout;
  pkt.payload_symbols = payload;
  pkt.slots.reserve(layout.total_slots(payload.size()));

  for (int i = 0; i < layout.preamble_slots; ++i) {
    const std::size_t s = i % 2 == 0 ? kRedSymbol : kBlueSymbol;
    pkt.slots.push_back({SlotKind::Preamble, s, base.powers[s]});
  }
  for (std::size_t id : layout.anchor_ids) {
    for (int r = 0; r < layout.slots_per_anchor; ++r) {
      pkt.slots.push_back({SlotKind::Anchor, id, anchors.powers[id]});
    }
  }
  for (std::size_t s : payload) {
    if (s >= c.size()) throw Error(ErrorCode::OutOfBounds, "payload symbol outside constellation");
    pkt.slots.push_back({SlotKind::Payload, s, c.powers[s]});
  }
  for (int i = 0; i < layout.etb_state_slots; ++i) {
    const std::size_t s = (i / 2) % 2 == 0 ? kRedSymbol : kBlueSymbol;
    pkt.slots.push_back({SlotKind::Etb, s, base.powers[s]});
  }
  return pkt;
}

Rgb PowerWaveform::optical_power(std::size_t i) const {
  const Rgb& d = duty.at(i);
  return {d[0] / efficiency.red, d[1] / efficiency.green, d[2] / efficiency.blue};
}

PowerWaveform packet_to_waveform(const Packet& pkt, double baud_hz, const EfficiencyTriple& e) {
  if (!(baud_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "baud must be positive");
  e.validate();
  PowerWaveform w;
  w.baud_hz = baud_hz;
  w.efficiency = e;
  w.duty.reserve(pkt.slots.size());
  for (const Slot& s : pkt.slots) w.duty.push_back(apply_efficiency(s.power, e));
  return w;
}

}  // namespace csk
