#pragma once

// Digital modulation layer: M-PSK constellations with a fixed Gray labeling,
// bit<->symbol mapping, and BER scoring.
//
// Labeling convention (fixed so golden values are reproducible): the point at
// circle position i (angle 2*pi*i/M) carries the binary-reflected Gray label
// i ^ (i >> 1). Bits are consumed most-significant-first per symbol. For BPSK
// this reduces to bit 0 -> +1, bit 1 -> -1.

#include "tmadm/types.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmadm {

struct Constellation {
  int M = 2;                    // order, a power of two >= 2
  int bits_per_symbol = 1;      // log2(M)
  std::vector<cxd> points;      // circle position i -> point exp(j*2*pi*i/M)
  std::vector<std::uint32_t> label_of_point;  // Gray label of position i
  std::vector<std::uint32_t> point_of_label;  // inverse map

  // Every M-PSK point has modulus exactly 1 (constant-modulus property) and
  // the set has unit average power by construction.
};

inline Constellation make_psk(int M) {
  if (M < 2 || (M & (M - 1)) != 0)
    throw std::invalid_argument("PSK order must be a power of two >= 2");
  Constellation c;
  c.M = M;
  c.bits_per_symbol = 0;
  for (int v = M; v > 1; v >>= 1) ++c.bits_per_symbol;
  c.points.resize(static_cast<std::size_t>(M));
  c.label_of_point.resize(static_cast<std::size_t>(M));
  c.point_of_label.resize(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) {
    const double ang = 2.0 * kPi * i / M;
    c.points[static_cast<std::size_t>(i)] = cxd(std::cos(ang), std::sin(ang));
    const auto g = static_cast<std::uint32_t>(i ^ (i >> 1));
    c.label_of_point[static_cast<std::size_t>(i)] = g;
    c.point_of_label[g] = static_cast<std::uint32_t>(i);
  }
  // Snap the axis-aligned points so BPSK/QPSK are exact (+1, -1, +j, -j).
  for (int i = 0; i < M; ++i) {
    auto& p = c.points[static_cast<std::size_t>(i)];
    if (std::abs(p.real()) < 1e-15) p.real(0.0);
    if (std::abs(p.imag()) < 1e-15) p.imag(0.0);
  }
  return c;
}

// Map a bit sequence to constellation symbols, log2(M) bits per symbol,
// most-significant bit first.
inline std::vector<cxd> modulate(const std::vector<int>& bits,
                                 const Constellation& c) {
  if (bits.size() % static_cast<std::size_t>(c.bits_per_symbol) != 0)
    throw std::invalid_argument("ragged bitstream");
  std::vector<cxd> out;
  out.reserve(bits.size() / static_cast<std::size_t>(c.bits_per_symbol));
  for (std::size_t i = 0; i < bits.size();
       i += static_cast<std::size_t>(c.bits_per_symbol)) {
    std::uint32_t label = 0;
    for (int b = 0; b < c.bits_per_symbol; ++b)
      label = (label << 1) | static_cast<std::uint32_t>(bits[i + static_cast<std::size_t>(b)] & 1);
    out.push_back(c.points[c.point_of_label[label]]);
  }
  return out;
}

// Nearest-point decision in Euclidean distance; ties break toward the lowest
// constellation index (point at the smallest circle position).
inline std::vector<int> demodulate(const std::vector<cxd>& symbols,
                                   const Constellation& c) {
  std::vector<int> bits;
  bits.reserve(symbols.size() * static_cast<std::size_t>(c.bits_per_symbol));
  for (const cxd& s : symbols) {
    int best = 0;
    double best_d = std::norm(s - c.points[0]);
    for (int i = 1; i < c.M; ++i) {
      const double d = std::norm(s - c.points[static_cast<std::size_t>(i)]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const std::uint32_t label = c.label_of_point[static_cast<std::size_t>(best)];
    for (int b = c.bits_per_symbol - 1; b >= 0; --b)
      bits.push_back(static_cast<int>((label >> b) & 1u));
  }
  return bits;
}

// Fraction of differing positions.
inline double ber(const std::vector<int>& tx_bits,
                  const std::vector<int>& rx_bits) {
  if (tx_bits.size() != rx_bits.size())
    throw std::invalid_argument("bit stream length mismatch");
  if (tx_bits.empty()) return 0.0;
  std::size_t errs = 0;
  for (std::size_t i = 0; i < tx_bits.size(); ++i)
    if ((tx_bits[i] & 1) != (rx_bits[i] & 1)) ++errs;
  return static_cast<double>(errs) / static_cast<double>(tx_bits.size());
}

}  // namespace tmadm
