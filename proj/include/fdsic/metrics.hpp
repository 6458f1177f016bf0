#pragma once

#include <span>
#include <vector>

#include "fdsic/common.hpp"
#include "fdsic/impairments.hpp"
#include "fdsic/ofdm_phy.hpp"
#include "fdsic/sic_result.hpp"

namespace fdsic {

/// Ratios are clamped to +/- this value so perfect rows stay finite.
inline constexpr double kSinrCapDb = 80.0;

/// Mean over data bins of 10 log10(P_soi / (P_si + sigma^2)), powers taken
/// from the genie's noise-free components at the demodulator input.
double compute_isinr(const GenieRecord& genie, const FrameSpec& spec);

/// 10 log10(E|S|^2 / E|S_hat - S|^2) pooled over the given bins and all
/// symbols, capped at +80 dB.
double compute_osinr(const ComplexGrid& soi_hat, const ComplexGrid& truth, const std::vector<int>& bins);

/// Hamming distance over length.
double compute_ber(std::span<const std::uint8_t> bits_hat, std::span<const std::uint8_t> bits_true);

/// 10 log10(E|e|^2 / E|S|^2).
double compute_evm_db(const ComplexGrid& soi_hat, const ComplexGrid& truth, const std::vector<int>& bins);

/// Hard decisions on the data bins in payload order (symbol-major).
Bits detect_bits(const SicResult& result, const FrameSpec& spec, int qam_order);

/// Data-subcarrier throughput of FICA relative to LS.
struct SpectralEfficiency {
  int fica_data_subcarriers = 0;
  int ls_data_subcarriers = 0;
  double ratio() const { return static_cast<double>(fica_data_subcarriers) / ls_data_subcarriers; }
};
SpectralEfficiency spectral_efficiency(const FrameSpec& fica_spec, const FrameSpec& ls_spec);

/// Gaussian tail probability.
double q_function(double x);

}  // namespace fdsic
