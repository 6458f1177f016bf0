#include "fdsic/ls_sic.hpp"

#include <cmath>
#include <string>

namespace fdsic {

namespace {

constexpr double kMinAlpha = 1e-12;

// Linear interpolation over logical frequency, held flat past the end pilots.
void interpolate_corrections(const FrameSpec& spec, const std::vector<int>& pilots,
                             const std::vector<Complex>& at_pilots, Eigen::MatrixXcd& corr, int n) {
  for (int bin : spec.active_bins()) {
    const int f = spec.logical_index(bin);
    Complex value;
    if (f <= spec.logical_index(pilots.front())) {
      value = at_pilots.front();
    } else if (f >= spec.logical_index(pilots.back())) {
      value = at_pilots.back();
    } else {
      std::size_t i = 0;
      while (spec.logical_index(pilots[i + 1]) < f) ++i;
      const double f0 = spec.logical_index(pilots[i]);
      const double f1 = spec.logical_index(pilots[i + 1]);
      const double w = (f - f0) / (f1 - f0);
      value = (1.0 - w) * at_pilots[i] + w * at_pilots[i + 1];
    }
    corr(bin, n) = value;
  }
}

}  // namespace

Complex ls_estimate(std::span<const Complex> r_lp, std::span<const Complex> t_lp) {
  if (r_lp.size() != t_lp.size() || r_lp.empty())
    throw Error("LS estimate needs equal, non-empty received and training sequences");
  Complex acc{};
  for (std::size_t l = 0; l < r_lp.size(); ++l) {
    if (std::abs(t_lp[l]) == 0.0) throw Error("training symbol is zero");
    acc += r_lp[l] / t_lp[l];
  }
  return acc / static_cast<double>(r_lp.size());
}

ComplexVector ls_estimate_bins(const ComplexGrid& r_lp, const ComplexGrid& t_lp,
                               const std::vector<int>& bins) {
  if (r_lp.subcarriers() != t_lp.subcarriers() || r_lp.symbols() != t_lp.symbols())
    throw Error("LP grids differ in shape");
  ComplexVector out(static_cast<std::size_t>(r_lp.subcarriers()));
  for (int bin : bins) {
    const ComplexVector r = r_lp.row(bin);
    const ComplexVector t = t_lp.row(bin);
    out[static_cast<std::size_t>(bin)] = ls_estimate(r, t);
  }
  return out;
}

LsChannelEstimate ls_initial_estimate(const FrameGrids& x1, const FrameGrids& x2,
                                      const FrameSpec& spec) {
  if (spec.preamble_mode != PreambleMode::Nonoverlapped || x2.lp_b.empty())
    throw Error("LS estimation needs the nonoverlapped long preamble");
  const auto bins = spec.active_bins();
  LsChannelEstimate est;
  est.alpha1_hat = ls_estimate_bins(x2.lp_a, x1.lp_a, bins);
  est.alpha2_hat = ls_estimate_bins(x2.lp_b, training_grid(spec, NodeId::B), bins);
  est.correction1 = Eigen::MatrixXcd::Ones(spec.n_fft, spec.n_symbols);
  est.correction2 = Eigen::MatrixXcd::Ones(spec.n_fft, spec.n_symbols);
  return est;
}

LsChannelEstimate pilot_track(const ComplexGrid& rx_data, LsChannelEstimate est,
                              const FrameSpec& spec) {
  if (rx_data.subcarriers() != spec.n_fft || rx_data.symbols() != spec.n_symbols)
    throw Error("received grid does not match the frame spec");
  est.correction1 = Eigen::MatrixXcd::Ones(spec.n_fft, spec.n_symbols);
  est.correction2 = Eigen::MatrixXcd::Ones(spec.n_fft, spec.n_symbols);
  const auto pilots_a = spec.pilot_bins(NodeId::A);
  const auto pilots_b = spec.pilot_bins(NodeId::B);
  if (pilots_a.empty() || pilots_b.empty()) {
    est.warning = "no pilots configured; LP estimates used without tracking";
    return est;
  }

  const ComplexGrid known_a = pilot_grid(spec, NodeId::A);
  const ComplexGrid known_b = pilot_grid(spec, NodeId::B);
  auto residuals = [&](const std::vector<int>& pilots, const ComplexGrid& known,
                       const ComplexVector& alpha, int n) {
    std::vector<Complex> out;
    for (int bin : pilots) {
      const Complex ref = alpha[static_cast<std::size_t>(bin)] * known(bin, n);
      out.push_back(std::abs(ref) > kMinAlpha ? rx_data(bin, n) / ref : Complex{1.0, 0.0});
    }
    return out;
  };

  for (int n = 0; n < spec.n_symbols; ++n) {
    interpolate_corrections(spec, pilots_a, residuals(pilots_a, known_a, est.alpha1_hat, n),
                            est.correction1, n);
    interpolate_corrections(spec, pilots_b, residuals(pilots_b, known_b, est.alpha2_hat, n),
                            est.correction2, n);
  }
  return est;
}

SicResult ls_cancel(const ComplexGrid& x2_data, const ComplexGrid& si_data,
                    const LsChannelEstimate& est, const FrameSpec& spec) {
  if (x2_data.subcarriers() != spec.n_fft || x2_data.symbols() != spec.n_symbols ||
      si_data.subcarriers() != spec.n_fft || si_data.symbols() != spec.n_symbols)
    throw Error("grids do not match the frame spec");
  if (static_cast<int>(est.alpha1_hat.size()) != spec.n_fft ||
      static_cast<int>(est.alpha2_hat.size()) != spec.n_fft)
    throw Error("channel estimates do not cover all bins");

  SicResult out;
  out.method = SicMethod::Ls;
  out.soi_grid = ComplexGrid(spec.n_fft, spec.n_symbols);
  out.bins = spec.data_bins();
  for (int bin : out.bins) {
    SubcarrierDiag diag;
    diag.bin = bin;
    bool ok = true;
    for (int n = 0; n < spec.n_symbols && ok; ++n) ok = std::abs(est.alpha2(bin, n)) >= kMinAlpha;
    if (!ok) {
      diag.status = SubcarrierStatus::Unrecoverable;
      diag.note = "SOI channel estimate below 1e-12";
      out.diag.push_back(diag);
      continue;
    }
    for (int n = 0; n < spec.n_symbols; ++n)
      out.soi_grid(bin, n) = (x2_data(bin, n) - est.alpha1(bin, n) * si_data(bin, n)) / est.alpha2(bin, n);
    out.diag.push_back(diag);
  }
  return out;
}

SicResult ls_sic(const FrameGrids& x1, const FrameGrids& x2, const FrameSpec& spec) {
  LsChannelEstimate est = ls_initial_estimate(x1, x2, spec);
  if (spec.n_pilot > 0) est = pilot_track(x2.data, std::move(est), spec);
  return ls_cancel(x2.data, x1.data, est, spec);
}

}  // namespace fdsic
