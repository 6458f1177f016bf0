#include "fdsic/selftest.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "fdsic/bss_sic.hpp"
#include "fdsic/fica_core.hpp"
#include "fdsic/ls_sic.hpp"
#include "fdsic/metrics.hpp"
#include "fdsic/ofdm_phy.hpp"

namespace fdsic {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

SelftestCheck check_dft(Rng& rng) {
  std::normal_distribution<double> g;
  const int n = 64;
  ComplexVector x(n);
  for (auto& v : x) v = {g(rng), g(rng)};
  const ComplexVector fast = fft_unitary(x);
  double err = 0.0;
  for (int k = 0; k < n; ++k) {
    Complex acc{};
    for (int t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * k * t / n);
    err = std::max(err, std::abs(acc / std::sqrt(static_cast<double>(n)) - fast[k]));
  }
  return {"unitary FFT matches naive DFT", err <= 1e-12, "max error " + fmt(err)};
}

SelftestCheck check_lifting(Rng& rng) {
  std::normal_distribution<double> g;
  double err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Complex a1{g(rng), g(rng)}, a2{g(rng), g(rng)}, s1{g(rng), g(rng)}, s2{g(rng), g(rng)};
    const Complex r = a1 * s1 + a2 * s2;
    const Eigen::Vector4d lifted = lifted_mixing(a1, a2) * Eigen::Vector4d(s1.real(), s1.imag(), s2.real(), s2.imag());
    err = std::max({err, std::abs(lifted(0) - s1.real()), std::abs(lifted(1) - s1.imag()),
                    std::abs(lifted(2) - r.real()), std::abs(lifted(3) - r.imag())});
  }
  return {"lifted mixing matches complex mixing", err <= 1e-12, "max error " + fmt(err)};
}

SelftestCheck check_whitening(Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(4, 500);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
  Eigen::Matrix4d mix;
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix(i) = g(rng);
  const WhitenedData w = center_and_whiten(mix * x);
  const double err = whiteness_error(w.z);
  return {"whitened covariance is identity", err <= 1e-8, "max deviation " + fmt(err)};
}

SelftestCheck check_ls(Rng& rng) {
  std::normal_distribution<double> g;
  const Complex alpha{0.6, -0.8};
  const double sigma2 = 0.1;
  const int trials = 4000;
  const ComplexVector t{{1.0, 0.0}, {0.0, 1.0}};
  Complex mean{};
  double var = 0.0;
  std::vector<Complex> est;
  for (int i = 0; i < trials; ++i) {
    ComplexVector r(2);
    for (int l = 0; l < 2; ++l)
      r[l] = alpha * t[l] + std::sqrt(sigma2 / 2.0) * Complex{g(rng), g(rng)};
    est.push_back(ls_estimate(r, t));
    mean += est.back();
  }
  mean /= static_cast<double>(trials);
  for (const auto& e : est) var += std::norm(e - mean);
  var /= trials - 1;
  const double expected = sigma2 / 2.0;
  const double rel = std::abs(var / expected - 1.0);
  const double bias = std::abs(mean - alpha);
  const bool ok = rel < 0.1 && bias < 4.0 * std::sqrt(expected / trials);
  return {"LS estimate unbiased with predicted variance", ok,
          "variance ratio " + fmt(var / expected) + ", bias " + fmt(bias)};
}

SelftestCheck check_accounting() {
  const FrameSpec fica = FrameSpec::wifi(0, 100);
  const FrameSpec ls = FrameSpec::wifi(8, 100);
  const SpectralEfficiency se = spectral_efficiency(fica, ls);
  const bool ok = se.fica_data_subcarriers == 52 && se.ls_data_subcarriers == 44 &&
                  fica.frame_len() == ls.frame_len();
  return {"data subcarriers 52 vs 44", ok,
          std::to_string(se.fica_data_subcarriers) + "/" + std::to_string(se.ls_data_subcarriers)};
}

}  // namespace

std::vector<SelftestCheck> run_selftest() {
  Rng rng(20240601);
  std::vector<SelftestCheck> out;
  auto guarded = [&](auto&& fn, const char* name) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  };
  guarded([&] { return check_dft(rng); }, "unitary FFT matches naive DFT");
  guarded([&] { return check_lifting(rng); }, "lifted mixing matches complex mixing");
  guarded([&] { return check_whitening(rng); }, "whitened covariance is identity");
  guarded([&] { return check_ls(rng); }, "LS estimate unbiased with predicted variance");
  guarded([] { return check_accounting(); }, "data subcarriers 52 vs 44");
  return out;
}

}  // namespace fdsic
