#pragma once

#include <span>
#include <string>

#include "fdsic/common.hpp"
#include "fdsic/ofdm_phy.hpp"
#include "fdsic/sic_result.hpp"

namespace fdsic {

/// Least-squares channel estimates for the SI (alpha1) and SOI (alpha2)
/// paths with per-symbol multiplicative corrections from pilots.
struct LsChannelEstimate {
  ComplexVector alpha1_hat;       ///< per bin, from the LP
  ComplexVector alpha2_hat;
  Eigen::MatrixXcd correction1;   ///< n_fft x n_symbols, ones when untracked
  Eigen::MatrixXcd correction2;
  std::string warning;

  Complex alpha1(int k, int n) const { return alpha1_hat[static_cast<std::size_t>(k)] * correction1(k, n); }
  Complex alpha2(int k, int n) const { return alpha2_hat[static_cast<std::size_t>(k)] * correction2(k, n); }
};

/// Sample mean of R_l / T_l over the L training symbols.
Complex ls_estimate(std::span<const Complex> r_lp, std::span<const Complex> t_lp);

/// ls_estimate applied per bin over the columns of the LP grids.
ComplexVector ls_estimate_bins(const ComplexGrid& r_lp, const ComplexGrid& t_lp,
                               const std::vector<int>& bins);

/// Initial estimates from the nonoverlapped LP: alpha1 from node A's slot
/// against the known SI training, alpha2 from node B's slot.
LsChannelEstimate ls_initial_estimate(const FrameGrids& x1, const FrameGrids& x2,
                                      const FrameSpec& spec);

/// Per-symbol correction from each node's pilots, linearly interpolated
/// across subcarriers and held beyond the outermost pilots. Without pilots
/// the estimate is returned unchanged with a warning.
LsChannelEstimate pilot_track(const ComplexGrid& rx_data, LsChannelEstimate est,
                              const FrameSpec& spec);

/// S_soi = (R - alpha1 S_si) / alpha2 on every data bin.
SicResult ls_cancel(const ComplexGrid& x2_data, const ComplexGrid& si_data,
                    const LsChannelEstimate& est, const FrameSpec& spec);

/// Full LS baseline: LP estimate, pilot tracking, cancellation.
SicResult ls_sic(const FrameGrids& x1, const FrameGrids& x2, const FrameSpec& spec);

}  // namespace fdsic
