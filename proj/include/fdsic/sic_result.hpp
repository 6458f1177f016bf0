#pragma once

#include <string>
#include <vector>

#include "fdsic/common.hpp"

namespace fdsic {

enum class SicMethod { Fica, Ls };
const char* to_string(SicMethod method);

enum class SubcarrierStatus {
  Ok,
  FallbackLs,     ///< FICA failed on this bin; the LS estimate was used
  Unrecoverable,  ///< no usable estimate; output held at zero
};
const char* to_string(SubcarrierStatus status);

struct SubcarrierDiag {
  int bin = 0;
  SubcarrierStatus status = SubcarrierStatus::Ok;
  bool converged = true;
  int iterations = 0;
  double condition_number = 1.0;
  double complexness = 0.0;
  double si_leak_correlation = 0.0;
  std::string note;
};

/// Estimated SOI on the data region; bins outside `bins` hold zero.
struct SicResult {
  SicMethod method = SicMethod::Ls;
  ComplexGrid soi_grid;
  std::vector<int> bins;
  std::vector<SubcarrierDiag> diag;  ///< one entry per processed bin, same order as `bins`

  int count(SubcarrierStatus status) const;
};

}  // namespace fdsic
