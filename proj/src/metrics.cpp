#include "fdsic/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace fdsic {

namespace {

double clamp_db(double db) {
  if (std::isnan(db)) return -kSinrCapDb;
  return std::clamp(db, -kSinrCapDb, kSinrCapDb);
}

double ratio_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kSinrCapDb : -kSinrCapDb;
  if (num <= 0.0) return -kSinrCapDb;
  return clamp_db(10.0 * std::log10(num / den));
}

}  // namespace

double compute_isinr(const GenieRecord& genie, const FrameSpec& spec) {
  const auto bins = spec.data_bins();
  if (bins.empty()) throw Error("no data subcarriers");
  const auto& si = genie.si_component.data;
  const auto& soi = genie.soi_component.data;
  double acc = 0.0;
  for (int bin : bins) {
    double p_si = 0.0, p_soi = 0.0;
    for (int n = 0; n < si.symbols(); ++n) {
      p_si += std::norm(si(bin, n));
      p_soi += std::norm(soi(bin, n));
    }
    p_si /= si.symbols();
    p_soi /= soi.symbols();
    acc += ratio_db(p_soi, p_si + genie.noise_power);
  }
  return acc / static_cast<double>(bins.size());
}

double compute_osinr(const ComplexGrid& soi_hat, const ComplexGrid& truth, const std::vector<int>& bins) {
  if (bins.empty() || truth.symbols() == 0) throw Error("empty data region");
  if (soi_hat.subcarriers() != truth.subcarriers() || soi_hat.symbols() != truth.symbols())
    throw Error("estimate and truth grids differ in shape");
  double signal = 0.0, error = 0.0;
  for (int bin : bins)
    for (int n = 0; n < truth.symbols(); ++n) {
      signal += std::norm(truth(bin, n));
      error += std::norm(soi_hat(bin, n) - truth(bin, n));
    }
  return ratio_db(signal, error);
}

double compute_ber(std::span<const std::uint8_t> bits_hat, std::span<const std::uint8_t> bits_true) {
  if (bits_hat.size() != bits_true.size()) throw Error("bit streams differ in length");
  if (bits_true.empty()) throw Error("empty bit stream");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < bits_true.size(); ++i) errors += (bits_hat[i] & 1) != (bits_true[i] & 1);
  return static_cast<double>(errors) / static_cast<double>(bits_true.size());
}

double compute_evm_db(const ComplexGrid& soi_hat, const ComplexGrid& truth, const std::vector<int>& bins) {
  return -compute_osinr(soi_hat, truth, bins);
}

Bits detect_bits(const SicResult& result, const FrameSpec& spec, int qam_order) {
  ComplexVector symbols;
  const auto bins = spec.data_bins();
  symbols.reserve(bins.size() * static_cast<std::size_t>(spec.n_symbols));
  for (int n = 0; n < spec.n_symbols; ++n)
    for (int bin : bins) symbols.push_back(result.soi_grid(bin, n));
  return demap_symbols(symbols, qam_order);
}

SpectralEfficiency spectral_efficiency(const FrameSpec& fica_spec, const FrameSpec& ls_spec) {
  return {fica_spec.n_data, ls_spec.n_data};
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace fdsic
