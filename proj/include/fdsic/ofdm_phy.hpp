#pragma once

#include <span>
#include <vector>

#include "fdsic/common.hpp"

namespace fdsic {

enum class NodeId { A, B };
enum class PreambleMode { Overlapped, Nonoverlapped };
enum class SubcarrierRole { Null, Data, PilotA, PilotB };

const char* to_string(NodeId node);
const char* to_string(PreambleMode mode);

/// Physical durations from which a FrameSpec can be dimensioned.
struct FrameTiming {
  int n_fft = 64;
  double sample_rate = 5e6;
  double cp_duration = 3.2e-6;
  double lp_duration = 32e-6;
  double sp_duration = 16e-6;
};

/// OFDM and frame dimensioning shared by both nodes of the link.
///
/// Frame layout in time: short preamble region (sp_len samples), long
/// preamble region, then n_symbols data symbols each carrying a cyclic prefix.
/// In nonoverlapped mode the LP region holds two back-to-back slots, node A
/// first; each node transmits its training only in its own slot and is silent
/// in the other. The SP region is split the same way. In overlapped mode both
/// nodes share one LP slot and the whole SP region.
struct FrameSpec {
  int n_fft = 64;
  int n_data = 52;
  int n_pilot = 0;
  int cp_len = 16;
  int n_symbols = 100;
  int lp_symbols = 2;
  int sp_len = 80;
  double sample_rate = 5e6;
  PreambleMode preamble_mode = PreambleMode::Nonoverlapped;
  std::vector<SubcarrierRole> subcarrier_map;

  /// 802.11a-style layout on 64 bins: 52 active subcarriers (-26..26, DC
  /// null). n_pilot = 0 gives 52 data bins; n_pilot = 8 gives 44 data bins
  /// and pilots at logical {-26,-21,-14,-7,7,14,21,26}, alternating nodes.
  static FrameSpec wifi(int n_pilot, int n_symbols,
                        PreambleMode mode = PreambleMode::Nonoverlapped);
  static FrameSpec from_timing(const FrameTiming& timing, int n_pilot, int n_symbols,
                               PreambleMode mode = PreambleMode::Nonoverlapped);

  void validate() const;

  int samples_per_symbol() const { return cp_len + n_fft; }
  int lp_slot_len() const { return lp_symbols * samples_per_symbol(); }
  int lp_region_len() const;
  int data_offset() const { return sp_len + lp_region_len(); }
  int frame_len() const { return data_offset() + n_symbols * samples_per_symbol(); }
  /// Start of the node's LP slot within the frame.
  int lp_slot_offset(NodeId node) const;

  int logical_index(int bin) const { return bin < n_fft / 2 ? bin : bin - n_fft; }

  // Bin lists are ordered by increasing logical frequency.
  std::vector<int> active_bins() const;
  std::vector<int> data_bins() const;
  std::vector<int> pilot_bins(NodeId node) const;
  /// Bins a node transmits on during data symbols (data plus own pilots).
  std::vector<int> occupied_bins(NodeId node) const;

  bool operator==(const FrameSpec&) const = default;
};

/// Per-slot and data grids of one frame. lp_b is empty in overlapped mode.
struct FrameGrids {
  ComplexGrid lp_a;
  ComplexGrid lp_b;
  ComplexGrid data;
};

struct NodeFrame {
  NodeId node = NodeId::A;
  int qam_order = 4;
  ComplexVector time_samples;
  /// Transmitted frequency-domain truth.
  FrameGrids ref_grid;
  Bits payload_bits;
};

// Unitary DFT pair (1/sqrt(N) in both directions).
ComplexVector fft_unitary(std::span<const Complex> x);
ComplexVector ifft_unitary(std::span<const Complex> x);

/// Unitary IDFT per column with cyclic prefix prepended.
ComplexVector modulate_ofdm(const ComplexGrid& grid, const FrameSpec& spec);
/// Inverse of modulate_ofdm; sample count must be a multiple of the symbol length.
ComplexGrid demodulate_ofdm(std::span<const Complex> samples, const FrameSpec& spec);

/// Splits a full received frame into LP slot grids and the data grid.
/// Perfect timing is assumed.
FrameGrids demodulate_frame(std::span<const Complex> samples, const FrameSpec& spec);

/// Node's known training symbols T_l(k) on all active bins.
/// Symbol l is symbol 0 rotated by j^l, so consecutive LP symbols are
/// orthogonal when read as real 2-vectors.
ComplexGrid training_grid(const FrameSpec& spec, NodeId node);
/// Node's known pilot symbols on its own pilot bins, zero elsewhere.
ComplexGrid pilot_grid(const FrameSpec& spec, NodeId node);
/// Short-preamble waveform for the node's SP slot. Inert: synchronization is
/// assumed perfect, the waveform only occupies its place in the frame.
ComplexVector short_preamble(const FrameSpec& spec, NodeId node);

NodeFrame build_frame(std::span<const std::uint8_t> bits, const FrameSpec& spec, NodeId node,
                      int qam_order = 4);
/// A frame that transmits nothing (all-zero samples and grids).
NodeFrame silent_frame(const FrameSpec& spec, NodeId node);

int payload_bit_count(const FrameSpec& spec, int qam_order);

// Gray-coded square QAM with unit average energy. Supported orders: 4, 16, 64.
int bits_per_qam_symbol(int qam_order);
ComplexVector map_bits(std::span<const std::uint8_t> bits, int qam_order);
/// Hard-decision nearest-neighbour demapping.
Bits demap_symbols(std::span<const Complex> symbols, int qam_order);

}  // namespace fdsic
