#include "fdsic/ofdm_phy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/FFT>

namespace fdsic {

namespace {

constexpr std::uint32_t kTrainingSeedA = 0x7A11CEu;
constexpr std::uint32_t kTrainingSeedB = 0x7B0B00u;
constexpr std::uint32_t kPilotSeedA = 0x91A0Au;
constexpr std::uint32_t kPilotSeedB = 0x91B0Bu;
constexpr std::uint32_t kShortSeedA = 0x5A5A01u;
constexpr std::uint32_t kShortSeedB = 0x5A5A02u;

// Raw engine output is specified by the standard, distributions are not, so
// the known sequences are drawn straight from engine bits.
Complex qpsk_from_engine(std::mt19937& engine) {
  const std::uint32_t word = engine();
  const double re = (word & 1u) ? -1.0 : 1.0;
  const double im = (word & 2u) ? -1.0 : 1.0;
  return {re * M_SQRT1_2, im * M_SQRT1_2};
}

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

void require_spec(const FrameSpec& spec) { spec.validate(); }

}  // namespace

const char* to_string(NodeId node) { return node == NodeId::A ? "A" : "B"; }

const char* to_string(PreambleMode mode) {
  return mode == PreambleMode::Overlapped ? "overlapped" : "nonoverlapped";
}

FrameSpec FrameSpec::wifi(int n_pilot, int n_symbols, PreambleMode mode) {
  if (n_pilot != 0 && n_pilot != 8) throw Error("wifi layout supports 0 or 8 pilots");
  FrameSpec spec;
  spec.n_fft = 64;
  spec.n_pilot = n_pilot;
  spec.n_data = 52 - n_pilot;
  spec.n_symbols = n_symbols;
  spec.preamble_mode = mode;
  spec.subcarrier_map.assign(64, SubcarrierRole::Null);
  for (int f = -26; f <= 26; ++f) {
    if (f == 0) continue;
    spec.subcarrier_map[static_cast<std::size_t>((f + 64) % 64)] = SubcarrierRole::Data;
  }
  if (n_pilot == 8) {
    // Alternating assignment so each node's four pilots span the band.
    const int pilots_a[] = {-26, -14, 7, 21};
    const int pilots_b[] = {-21, -7, 14, 26};
    for (int f : pilots_a) spec.subcarrier_map[static_cast<std::size_t>((f + 64) % 64)] = SubcarrierRole::PilotA;
    for (int f : pilots_b) spec.subcarrier_map[static_cast<std::size_t>((f + 64) % 64)] = SubcarrierRole::PilotB;
  }
  spec.validate();
  return spec;
}

FrameSpec FrameSpec::from_timing(const FrameTiming& timing, int n_pilot, int n_symbols,
                                 PreambleMode mode) {
  if (timing.n_fft != 64) throw Error("only the 64-bin wifi layout is provided");
  FrameSpec spec = wifi(n_pilot, n_symbols, mode);
  spec.sample_rate = timing.sample_rate;
  spec.cp_len = static_cast<int>(std::lround(timing.cp_duration * timing.sample_rate));
  spec.sp_len = static_cast<int>(std::lround(timing.sp_duration * timing.sample_rate));
  const long lp_samples = std::lround(timing.lp_duration * timing.sample_rate);
  if (lp_samples % spec.samples_per_symbol() != 0)
    throw Error("LP duration is not a whole number of OFDM symbols");
  spec.lp_symbols = static_cast<int>(lp_samples / spec.samples_per_symbol());
  spec.validate();
  return spec;
}

void FrameSpec::validate() const {
  if (n_fft < 8) throw Error("n_fft too small");
  if (cp_len < 0 || cp_len > n_fft) throw Error("cyclic prefix must lie in [0, n_fft]");
  if (n_symbols < 1) throw Error("frame needs at least one data symbol");
  if (lp_symbols < 1) throw Error("frame needs at least one LP symbol");
  if (sp_len < 0) throw Error("negative short-preamble length");
  if (preamble_mode == PreambleMode::Nonoverlapped && sp_len % 2 != 0)
    throw Error("nonoverlapped short preamble needs an even length");
  if (static_cast<int>(subcarrier_map.size()) != n_fft)
    throw Error("subcarrier map size differs from n_fft");
  if (subcarrier_map[0] != SubcarrierRole::Null) throw Error("DC bin must be null");

  int data = 0, pilot_a = 0, pilot_b = 0;
  for (auto role : subcarrier_map) {
    data += role == SubcarrierRole::Data;
    pilot_a += role == SubcarrierRole::PilotA;
    pilot_b += role == SubcarrierRole::PilotB;
  }
  if (data != n_data) throw Error("subcarrier map holds " + std::to_string(data) +
                                  " data bins, spec says " + std::to_string(n_data));
  if (pilot_a + pilot_b != n_pilot) throw Error("pilot count differs from subcarrier map");
  if (n_pilot > 0 && pilot_a != pilot_b) throw Error("pilots must be split evenly between nodes");
  if (n_data + n_pilot > n_fft) throw Error("more active bins than FFT size");
}

int FrameSpec::lp_region_len() const {
  return preamble_mode == PreambleMode::Nonoverlapped ? 2 * lp_slot_len() : lp_slot_len();
}

int FrameSpec::lp_slot_offset(NodeId node) const {
  if (preamble_mode == PreambleMode::Overlapped || node == NodeId::A) return sp_len;
  return sp_len + lp_slot_len();
}

namespace {

std::vector<int> bins_where(const FrameSpec& spec, auto predicate) {
  std::vector<int> out;
  for (int f = -spec.n_fft / 2; f < spec.n_fft / 2; ++f) {
    const int bin = (f + spec.n_fft) % spec.n_fft;
    if (predicate(spec.subcarrier_map[static_cast<std::size_t>(bin)])) out.push_back(bin);
  }
  return out;
}

}  // namespace

std::vector<int> FrameSpec::active_bins() const {
  return bins_where(*this, [](SubcarrierRole r) { return r != SubcarrierRole::Null; });
}

std::vector<int> FrameSpec::data_bins() const {
  return bins_where(*this, [](SubcarrierRole r) { return r == SubcarrierRole::Data; });
}

std::vector<int> FrameSpec::pilot_bins(NodeId node) const {
  const auto want = node == NodeId::A ? SubcarrierRole::PilotA : SubcarrierRole::PilotB;
  return bins_where(*this, [want](SubcarrierRole r) { return r == want; });
}

std::vector<int> FrameSpec::occupied_bins(NodeId node) const {
  const auto own = node == NodeId::A ? SubcarrierRole::PilotA : SubcarrierRole::PilotB;
  return bins_where(*this, [own](SubcarrierRole r) { return r == SubcarrierRole::Data || r == own; });
}

ComplexVector fft_unitary(std::span<const Complex> x) {
  ComplexVector in(x.begin(), x.end()), out;
  fft_engine().fwd(out, in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  for (auto& v : out) v *= scale;
  return out;
}

ComplexVector ifft_unitary(std::span<const Complex> x) {
  ComplexVector in(x.begin(), x.end()), out;
  fft_engine().inv(out, in);  // includes 1/N
  const double scale = std::sqrt(static_cast<double>(x.size()));
  for (auto& v : out) v *= scale;
  return out;
}

ComplexVector modulate_ofdm(const ComplexGrid& grid, const FrameSpec& spec) {
  if (grid.subcarriers() != spec.n_fft)
    throw Error("grid has " + std::to_string(grid.subcarriers()) + " subcarriers, spec needs " +
                std::to_string(spec.n_fft));
  const int sps = spec.samples_per_symbol();
  ComplexVector out(static_cast<std::size_t>(grid.symbols() * sps));
  ComplexVector column(static_cast<std::size_t>(spec.n_fft));
  for (int n = 0; n < grid.symbols(); ++n) {
    for (int k = 0; k < spec.n_fft; ++k) column[static_cast<std::size_t>(k)] = grid(k, n);
    const ComplexVector body = ifft_unitary(column);
    auto dst = out.begin() + static_cast<std::ptrdiff_t>(n) * sps;
    std::copy(body.end() - spec.cp_len, body.end(), dst);
    std::copy(body.begin(), body.end(), dst + spec.cp_len);
  }
  return out;
}

ComplexGrid demodulate_ofdm(std::span<const Complex> samples, const FrameSpec& spec) {
  const int sps = spec.samples_per_symbol();
  if (samples.size() % static_cast<std::size_t>(sps) != 0)
    throw Error("sample count " + std::to_string(samples.size()) +
                " is not a multiple of the symbol length");
  const int n_sym = static_cast<int>(samples.size()) / sps;
  ComplexGrid grid(spec.n_fft, n_sym);
  for (int n = 0; n < n_sym; ++n) {
    auto body = samples.subspan(static_cast<std::size_t>(n * sps + spec.cp_len),
                                static_cast<std::size_t>(spec.n_fft));
    const ComplexVector spectrum = fft_unitary(body);
    for (int k = 0; k < spec.n_fft; ++k) grid(k, n) = spectrum[static_cast<std::size_t>(k)];
  }
  return grid;
}

FrameGrids demodulate_frame(std::span<const Complex> samples, const FrameSpec& spec) {
  require_spec(spec);
  if (static_cast<int>(samples.size()) != spec.frame_len())
    throw Error("frame has " + std::to_string(samples.size()) + " samples, layout needs " +
                std::to_string(spec.frame_len()));
  const auto slot = static_cast<std::size_t>(spec.lp_slot_len());
  FrameGrids out;
  out.lp_a = demodulate_ofdm(samples.subspan(static_cast<std::size_t>(spec.lp_slot_offset(NodeId::A)), slot), spec);
  if (spec.preamble_mode == PreambleMode::Nonoverlapped)
    out.lp_b = demodulate_ofdm(samples.subspan(static_cast<std::size_t>(spec.lp_slot_offset(NodeId::B)), slot), spec);
  out.data = demodulate_ofdm(samples.subspan(static_cast<std::size_t>(spec.data_offset())), spec);
  return out;
}

ComplexGrid training_grid(const FrameSpec& spec, NodeId node) {
  std::mt19937 engine(node == NodeId::A ? kTrainingSeedA : kTrainingSeedB);
  ComplexGrid grid(spec.n_fft, spec.lp_symbols);
  for (int bin : spec.active_bins()) {
    const Complex t0 = qpsk_from_engine(engine);
    Complex rot{1.0, 0.0};
    for (int l = 0; l < spec.lp_symbols; ++l) {
      grid(bin, l) = t0 * rot;
      rot *= Complex{0.0, 1.0};
    }
  }
  return grid;
}

ComplexGrid pilot_grid(const FrameSpec& spec, NodeId node) {
  std::mt19937 engine(node == NodeId::A ? kPilotSeedA : kPilotSeedB);
  ComplexGrid grid(spec.n_fft, spec.n_symbols);
  const auto bins = spec.pilot_bins(node);
  for (int n = 0; n < spec.n_symbols; ++n)
    for (int bin : bins) grid(bin, n) = qpsk_from_engine(engine);
  return grid;
}

ComplexVector short_preamble(const FrameSpec& spec, NodeId node) {
  const int slot = spec.preamble_mode == PreambleMode::Nonoverlapped ? spec.sp_len / 2 : spec.sp_len;
  std::mt19937 engine(node == NodeId::A ? kShortSeedA : kShortSeedB);
  // Every fourth active subcarrier, giving a 16-sample periodic waveform.
  ComplexVector spectrum(static_cast<std::size_t>(spec.n_fft));
  const auto active = spec.active_bins();
  int used = 0;
  for (int bin : active) {
    if (spec.logical_index(bin) % 4 != 0) continue;
    spectrum[static_cast<std::size_t>(bin)] = qpsk_from_engine(engine);
    ++used;
  }
  if (used > 0) {
    const double boost = std::sqrt(static_cast<double>(active.size()) / used);
    for (auto& v : spectrum) v *= boost;
  }
  const ComplexVector period = ifft_unitary(spectrum);
  ComplexVector out(static_cast<std::size_t>(slot));
  for (int i = 0; i < slot; ++i) out[static_cast<std::size_t>(i)] = period[static_cast<std::size_t>(i % spec.n_fft)];
  return out;
}

int payload_bit_count(const FrameSpec& spec, int qam_order) {
  return spec.n_data * spec.n_symbols * bits_per_qam_symbol(qam_order);
}

NodeFrame build_frame(std::span<const std::uint8_t> bits, const FrameSpec& spec, NodeId node,
                      int qam_order) {
  require_spec(spec);
  if (node != NodeId::A && node != NodeId::B) throw Error("unknown node id");
  const int expected = payload_bit_count(spec, qam_order);
  if (static_cast<int>(bits.size()) != expected)
    throw Error("payload has " + std::to_string(bits.size()) + " bits, frame needs " +
                std::to_string(expected));

  NodeFrame frame;
  frame.node = node;
  frame.qam_order = qam_order;
  frame.payload_bits.assign(bits.begin(), bits.end());

  const ComplexVector symbols = map_bits(bits, qam_order);
  const auto data_bins = spec.data_bins();
  ComplexGrid data = pilot_grid(spec, node);
  std::size_t s = 0;
  for (int n = 0; n < spec.n_symbols; ++n)
    for (int bin : data_bins) data(bin, n) = symbols[s++];

  const ComplexGrid training = training_grid(spec, node);
  const ComplexGrid silence(spec.n_fft, spec.lp_symbols);
  if (spec.preamble_mode == PreambleMode::Nonoverlapped) {
    frame.ref_grid.lp_a = node == NodeId::A ? training : silence;
    frame.ref_grid.lp_b = node == NodeId::B ? training : silence;
  } else {
    frame.ref_grid.lp_a = training;
  }
  frame.ref_grid.data = data;

  frame.time_samples.assign(static_cast<std::size_t>(spec.frame_len()), Complex{});
  const ComplexVector sp = short_preamble(spec, node);
  const int sp_offset =
      spec.preamble_mode == PreambleMode::Nonoverlapped && node == NodeId::B ? spec.sp_len / 2 : 0;
  std::copy(sp.begin(), sp.end(), frame.time_samples.begin() + sp_offset);

  const ComplexVector lp = modulate_ofdm(training, spec);
  std::copy(lp.begin(), lp.end(), frame.time_samples.begin() + spec.lp_slot_offset(node));

  const ComplexVector body = modulate_ofdm(data, spec);
  std::copy(body.begin(), body.end(), frame.time_samples.begin() + spec.data_offset());
  return frame;
}

NodeFrame silent_frame(const FrameSpec& spec, NodeId node) {
  require_spec(spec);
  NodeFrame frame;
  frame.node = node;
  frame.time_samples.assign(static_cast<std::size_t>(spec.frame_len()), Complex{});
  frame.ref_grid.lp_a = ComplexGrid(spec.n_fft, spec.lp_symbols);
  if (spec.preamble_mode == PreambleMode::Nonoverlapped)
    frame.ref_grid.lp_b = ComplexGrid(spec.n_fft, spec.lp_symbols);
  frame.ref_grid.data = ComplexGrid(spec.n_fft, spec.n_symbols);
  frame.payload_bits.assign(static_cast<std::size_t>(payload_bit_count(spec, frame.qam_order)), 0);
  return frame;
}

}  // namespace fdsic
