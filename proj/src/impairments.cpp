#include "fdsic/impairments.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fdsic {

namespace {

ComplexVector taps_to_gains(const ComplexVector& taps, int n_fft) {
  ComplexVector gains(static_cast<std::size_t>(n_fft));
  for (int k = 0; k < n_fft; ++k) {
    Complex acc{};
    for (std::size_t l = 0; l < taps.size(); ++l)
      acc += taps[l] * std::polar(1.0, -2.0 * std::numbers::pi * k * static_cast<double>(l) / n_fft);
    gains[static_cast<std::size_t>(k)] = acc;
  }
  return gains;
}

ComplexVector apply_channel(const ComplexVector& x, const ChannelRealization& chan,
                            const ComplexVector& taps, Complex flat_gain) {
  ComplexVector y(x.size());
  if (chan.model == ChannelModel::Flat) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = flat_gain * x[i];
    return y;
  }
  // Causal convolution truncated to the frame; the CP absorbs the tail.
  for (std::size_t i = 0; i < x.size(); ++i) {
    Complex acc{};
    for (std::size_t l = 0; l < taps.size() && l <= i; ++l) acc += taps[l] * x[i - l];
    y[i] = acc;
  }
  return y;
}

// Both PAs share one cubic model calibrated at the nominal SI transmit
// power; a silent SI falls back to the node's own power.
ComplexVector transmit_chain(const NodeFrame& frame, double tx_db, bool pa_on, double hpr3_db,
                             const std::optional<IqImbalance>& iqi, double pa_ref_power,
                             const FrameSpec& spec) {
  const double amp = db_to_amplitude(tx_db);
  ComplexVector x(frame.time_samples.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * frame.time_samples[i];
  if (pa_on && amp > 0.0) {
    const double ref_power =
        pa_ref_power > 0.0 ? pa_ref_power : amp * amp * nominal_sample_power(spec, frame.node);
    x = apply_pa_nonlinearity(x, hpr3_db, ref_power);
  }
  if (iqi) x = apply_iq_imbalance(x, iqi->gain_mismatch_db, iqi->phase_mismatch_deg);
  return x;
}

void check_frame(const NodeFrame& frame, const FrameSpec& spec, const char* which) {
  if (static_cast<int>(frame.time_samples.size()) != spec.frame_len() ||
      frame.ref_grid.data.subcarriers() != spec.n_fft ||
      frame.ref_grid.data.symbols() != spec.n_symbols)
    throw Error(std::string(which) + " frame does not match the frame spec");
}

}  // namespace

ChannelRealization ChannelRealization::flat(Complex alpha1, Complex alpha2, int n_fft) {
  ChannelRealization chan;
  chan.model = ChannelModel::Flat;
  chan.alpha1.assign(static_cast<std::size_t>(n_fft), alpha1);
  chan.alpha2.assign(static_cast<std::size_t>(n_fft), alpha2);
  chan.taps1 = {alpha1};
  chan.taps2 = {alpha2};
  return chan;
}

ChannelRealization ChannelRealization::multipath(ComplexVector taps1, ComplexVector taps2,
                                                 const FrameSpec& spec) {
  if (taps1.empty() || taps2.empty()) throw Error("channel needs at least one tap");
  if (static_cast<int>(taps1.size()) > spec.cp_len + 1 ||
      static_cast<int>(taps2.size()) > spec.cp_len + 1)
    throw Error("channel impulse response exceeds the cyclic prefix");
  ChannelRealization chan;
  chan.model = ChannelModel::Multipath;
  chan.alpha1 = taps_to_gains(taps1, spec.n_fft);
  chan.alpha2 = taps_to_gains(taps2, spec.n_fft);
  chan.taps1 = std::move(taps1);
  chan.taps2 = std::move(taps2);
  return chan;
}

ChannelRealization draw_channel(const ChannelDraw& draw, const FrameSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  if (draw.model == ChannelModel::Flat) {
    const Complex a1 = std::polar(1.0, phase(rng));
    const Complex a2 = std::polar(1.0, phase(rng));
    return ChannelRealization::flat(a1, a2, spec.n_fft);
  }
  if (draw.n_taps < 1 || draw.n_taps > spec.cp_len + 1) throw Error("invalid tap count");
  std::normal_distribution<double> gauss(0.0, M_SQRT1_2);
  auto profile = [&] {
    ComplexVector taps(static_cast<std::size_t>(draw.n_taps));
    double energy = 0.0;
    for (int l = 0; l < draw.n_taps; ++l) {
      const double amp = db_to_amplitude(-draw.decay_per_tap_db * l);
      taps[static_cast<std::size_t>(l)] = amp * Complex{gauss(rng), gauss(rng)};
      energy += std::norm(taps[static_cast<std::size_t>(l)]);
    }
    for (auto& t : taps) t /= std::sqrt(energy);
    return taps;
  };
  ComplexVector taps1 = profile();
  ComplexVector taps2 = profile();
  return ChannelRealization::multipath(std::move(taps1), std::move(taps2), spec);
}

void ImpairmentConfig::validate() const {
  if (!(noise_power >= 0.0)) throw Error("noise power must be non-negative");
  if (!(hpr3_db >= 0.0 && (hpr3_db <= 200.0 || std::isinf(hpr3_db))))
    throw Error("hpr3_db must lie in [0, 200] dB");
  // -inf dB is allowed and silences a node.
  auto bad_power = [](double db) { return std::isnan(db) || (std::isinf(db) && db > 0); };
  if (bad_power(si_tx_power_db)) throw Error("invalid SI tx power");
  if (bad_power(soi_tx_power_db)) throw Error("invalid SOI tx power");
}

double cubic_coefficient(double hpr3_db, double ref_power) {
  if (!(ref_power > 0.0)) throw Error("reference power must be positive");
  if (std::isinf(hpr3_db) && hpr3_db > 0) return 0.0;
  // c3^2 E|x|^6 / E|x|^2 = 10^(-hpr/10), Gaussian: E|x|^6 = 6 P^3, E|x|^2 = P.
  return std::sqrt(db_to_power(-hpr3_db) / (6.0 * ref_power * ref_power));
}

ComplexVector apply_pa_nonlinearity(std::span<const Complex> x, double hpr3_db, double ref_power) {
  const double c3 = cubic_coefficient(hpr3_db, ref_power);
  ComplexVector y(x.begin(), x.end());
  if (c3 == 0.0) return y;
  for (auto& v : y) v += c3 * v * std::norm(v);
  return y;
}

std::pair<Complex, Complex> iq_imbalance_coefficients(double gain_mismatch_db,
                                                      double phase_mismatch_deg) {
  const Complex ge = db_to_amplitude(gain_mismatch_db) *
                     std::polar(1.0, phase_mismatch_deg * std::numbers::pi / 180.0);
  return {(1.0 + ge) / 2.0, (1.0 - ge) / 2.0};
}

ComplexVector apply_iq_imbalance(std::span<const Complex> x, double gain_mismatch_db,
                                 double phase_mismatch_deg) {
  ComplexVector y(x.begin(), x.end());
  if (gain_mismatch_db == 0.0 && phase_mismatch_deg == 0.0) return y;
  const auto [mu, nu] = iq_imbalance_coefficients(gain_mismatch_db, phase_mismatch_deg);
  for (auto& v : y) v = mu * v + nu * std::conj(v);
  return y;
}

double nominal_sample_power(const FrameSpec& spec, NodeId node) {
  return static_cast<double>(spec.occupied_bins(node).size()) / spec.n_fft;
}

Transmission transmit_through(const NodeFrame& frame_si, const NodeFrame& frame_soi,
                              const ChannelRealization& chan, const ImpairmentConfig& cfg,
                              const FrameSpec& spec) {
  spec.validate();
  cfg.validate();
  check_frame(frame_si, spec, "SI");
  check_frame(frame_soi, spec, "SOI");
  if (static_cast<int>(chan.alpha1.size()) != spec.n_fft ||
      static_cast<int>(chan.alpha2.size()) != spec.n_fft)
    throw Error("channel realization does not match n_fft");

  const double pa_ref = db_to_power(cfg.si_tx_power_db) * nominal_sample_power(spec, NodeId::A);
  const ComplexVector si_tx = transmit_chain(frame_si, cfg.si_tx_power_db, cfg.pa_on_si,
                                             cfg.hpr3_db, cfg.iqi_si, pa_ref, spec);
  const ComplexVector soi_tx = transmit_chain(frame_soi, cfg.soi_tx_power_db, cfg.pa_on_soi,
                                              cfg.hpr3_db, cfg.iqi_soi, pa_ref, spec);
  const ComplexVector si_rx = apply_channel(si_tx, chan, chan.taps1, chan.alpha1[0]);
  const ComplexVector soi_rx = apply_channel(soi_tx, chan, chan.taps2, chan.alpha2[0]);

  Rng rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(cfg.noise_power / 2.0));
  ComplexVector noise(si_rx.size());
  if (cfg.noise_power > 0.0)
    for (auto& v : noise) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      v = {re, im};
    }

  ComplexVector rx(si_rx.size());
  for (std::size_t i = 0; i < rx.size(); ++i) rx[i] = si_rx[i] + soi_rx[i] + noise[i];

  Transmission out;
  out.x1 = frame_si.ref_grid;
  out.x2 = demodulate_frame(rx, spec);
  out.truth.si_component = demodulate_frame(si_rx, spec);
  out.truth.soi_component = demodulate_frame(soi_rx, spec);
  out.truth.noise = demodulate_frame(noise, spec);
  out.truth.noise_power = cfg.noise_power;
  const double amp_si = db_to_amplitude(cfg.si_tx_power_db);
  const double amp_soi = db_to_amplitude(cfg.soi_tx_power_db);
  out.truth.alpha1_eff.resize(chan.alpha1.size());
  out.truth.alpha2_eff.resize(chan.alpha2.size());
  for (std::size_t k = 0; k < chan.alpha1.size(); ++k) {
    out.truth.alpha1_eff[k] = amp_si * chan.alpha1[k];
    out.truth.alpha2_eff[k] = amp_soi * chan.alpha2[k];
  }
  return out;
}

}  // namespace fdsic
