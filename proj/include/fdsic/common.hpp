#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fdsic {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using Bits = std::vector<std::uint8_t>;
using Rng = std::mt19937_64;

/// Raised for contract violations and unrecoverable processing failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frequency-domain symbols indexed (FFT bin, OFDM symbol).
///
/// Bins follow FFT order: bin b carries logical subcarrier b for b < n/2 and
/// b - n otherwise.
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(int subcarriers, int symbols)
      : values_(Eigen::MatrixXcd::Zero(subcarriers, symbols)) {}
  explicit ComplexGrid(Eigen::MatrixXcd values) : values_(std::move(values)) {}

  int subcarriers() const { return static_cast<int>(values_.rows()); }
  int symbols() const { return static_cast<int>(values_.cols()); }
  bool empty() const { return values_.size() == 0; }

  Complex& operator()(int k, int n) { return values_(k, n); }
  const Complex& operator()(int k, int n) const { return values_(k, n); }

  Eigen::MatrixXcd& values() { return values_; }
  const Eigen::MatrixXcd& values() const { return values_; }

  /// Copy of one subcarrier across all symbols.
  ComplexVector row(int k) const {
    ComplexVector out(static_cast<std::size_t>(symbols()));
    for (int n = 0; n < symbols(); ++n) out[static_cast<std::size_t>(n)] = values_(k, n);
    return out;
  }

 private:
  Eigen::MatrixXcd values_;
};

/// splitmix64 finaliser; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x5851F42D4C957F2Dull));
}

inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace fdsic
