#pragma once

#include <limits>
#include <optional>
#include <span>

#include "fdsic/common.hpp"
#include "fdsic/ofdm_phy.hpp"

namespace fdsic {

enum class ChannelModel { Flat, Multipath };

/// Per-bin complex gains of the SI path (alpha1) and the SOI path (alpha2).
///
/// Multipath gains are the (non-normalised) DFT of the tap vectors, so with
/// taps no longer than the cyclic prefix the per-subcarrier scalar model
/// R(k) = alpha1(k) S_si(k) + alpha2(k) S_soi(k) + N(k) holds exactly.
struct ChannelRealization {
  ChannelModel model = ChannelModel::Flat;
  ComplexVector alpha1;
  ComplexVector alpha2;
  ComplexVector taps1;
  ComplexVector taps2;

  static ChannelRealization flat(Complex alpha1, Complex alpha2, int n_fft);
  static ChannelRealization multipath(ComplexVector taps1, ComplexVector taps2,
                                      const FrameSpec& spec);
};

/// Random channel draw: unit-magnitude flat gains with uniform phase, or an
/// exponentially decaying Rayleigh tap profile normalised to unit energy.
struct ChannelDraw {
  ChannelModel model = ChannelModel::Flat;
  int n_taps = 4;
  double decay_per_tap_db = 3.0;
};

ChannelRealization draw_channel(const ChannelDraw& draw, const FrameSpec& spec, Rng& rng);

struct IqImbalance {
  double gain_mismatch_db = 0.0;
  double phase_mismatch_deg = 0.0;
};

struct ImpairmentConfig {
  /// Variance of the complex AWGN per time sample; equals the per-bin
  /// variance after the unitary DFT.
  double noise_power = 0.0;
  /// Third-harmonic power ratio; 200 dB is effectively linear.
  double hpr3_db = 200.0;
  bool pa_on_si = true;
  bool pa_on_soi = true;
  std::optional<IqImbalance> iqi_si;
  std::optional<IqImbalance> iqi_soi;
  double si_tx_power_db = 0.0;
  double soi_tx_power_db = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Genie view of one transmission, used only for metrics and tests.
struct GenieRecord {
  ComplexVector alpha1_eff;  ///< alpha1 scaled by the SI transmit amplitude
  ComplexVector alpha2_eff;  ///< alpha2 scaled by the SOI transmit amplitude
  FrameGrids si_component;   ///< noise-free received SI (distortion included)
  FrameGrids soi_component;  ///< noise-free received SOI
  FrameGrids noise;          ///< demodulated AWGN
  double noise_power = 0.0;
};

struct Transmission {
  FrameGrids x1;  ///< direct-feed SI reference: the clean known SI grid
  FrameGrids x2;  ///< received mixture R(k)
  GenieRecord truth;
};

/// Cubic gain c3 such that, for circular Gaussian input of power ref_power,
/// the cubic term sits hpr3_db below the linear term. Returns 0 for +inf.
double cubic_coefficient(double hpr3_db, double ref_power);

/// y = x + c3 x |x|^2.
ComplexVector apply_pa_nonlinearity(std::span<const Complex> x, double hpr3_db, double ref_power);

/// Widely-linear IQ imbalance: y = mu x + nu conj(x).
ComplexVector apply_iq_imbalance(std::span<const Complex> x, double gain_mismatch_db,
                                 double phase_mismatch_deg);
/// The (mu, nu) pair used by apply_iq_imbalance.
std::pair<Complex, Complex> iq_imbalance_coefficients(double gain_mismatch_db,
                                                      double phase_mismatch_deg);

/// Applies per-node Tx power, PA, IQI, the two channels, sums and adds AWGN,
/// then demodulates. Node A of frame_si is the local transmitter. Both PAs use
/// the cubic coefficient calibrated at the nominal SI transmit power.
Transmission transmit_through(const NodeFrame& frame_si, const NodeFrame& frame_soi,
                              const ChannelRealization& chan, const ImpairmentConfig& cfg,
                              const FrameSpec& spec);

/// Nominal per-sample power of a node's data symbols at unit transmit power.
double nominal_sample_power(const FrameSpec& spec, NodeId node);

}  // namespace fdsic
