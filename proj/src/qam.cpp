#include <algorithm>
#include <cmath>
#include <string>

#include "fdsic/ofdm_phy.hpp"

namespace fdsic {

namespace {

int levels_per_axis(int qam_order) {
  switch (qam_order) {
    case 4: return 2;
    case 16: return 4;
    case 64: return 8;
    default: throw Error("unsupported QAM order " + std::to_string(qam_order));
  }
}

int gray_to_index(int g) {
  int i = 0;
  for (; g; g >>= 1) i ^= g;
  return i;
}

double axis_scale(int qam_order) { return 1.0 / std::sqrt(2.0 * (qam_order - 1) / 3.0); }

}  // namespace

int bits_per_qam_symbol(int qam_order) {
  const int levels = levels_per_axis(qam_order);
  int bits = 0;
  while ((1 << bits) < levels) ++bits;
  return 2 * bits;
}

// Each axis carries half the bits: the first half drives I, the second Q.
// A gray word g sits at PAM level (L-1) - 2*index(g), so bit 0 maps to +.
ComplexVector map_bits(std::span<const std::uint8_t> bits, int qam_order) {
  const int levels = levels_per_axis(qam_order);
  const int bps = bits_per_qam_symbol(qam_order);
  const int half = bps / 2;
  if (bits.size() % static_cast<std::size_t>(bps) != 0)
    throw Error("bit count is not a multiple of the QAM symbol size");

  const double scale = axis_scale(qam_order);
  auto axis_value = [&](std::size_t offset) {
    int g = 0;
    for (int b = 0; b < half; ++b) g = (g << 1) | (bits[offset + static_cast<std::size_t>(b)] & 1);
    return (levels - 1 - 2 * gray_to_index(g)) * scale;
  };

  ComplexVector out(bits.size() / static_cast<std::size_t>(bps));
  for (std::size_t s = 0; s < out.size(); ++s) {
    const std::size_t base = s * static_cast<std::size_t>(bps);
    out[s] = {axis_value(base), axis_value(base + static_cast<std::size_t>(half))};
  }
  return out;
}

Bits demap_symbols(std::span<const Complex> symbols, int qam_order) {
  const int levels = levels_per_axis(qam_order);
  const int bps = bits_per_qam_symbol(qam_order);
  const int half = bps / 2;
  const double scale = axis_scale(qam_order);

  auto push_axis = [&](double v, Bits& out) {
    // Invert level = (L-1) - 2i and round to the nearest valid index.
    const double idx = ((levels - 1) - v / scale) / 2.0;
    int i = static_cast<int>(std::lround(idx));
    i = std::clamp(i, 0, levels - 1);
    const int g = i ^ (i >> 1);
    for (int b = half - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((g >> b) & 1));
  };

  Bits out;
  out.reserve(symbols.size() * static_cast<std::size_t>(bps));
  for (const Complex& s : symbols) {
    push_axis(s.real(), out);
    push_axis(s.imag(), out);
  }
  return out;
}

}  // namespace fdsic
