#pragma once

#include <string>
#include <vector>

namespace fdsic {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast oracle checks run by the CLI: DFT against a naive sum, lifted
/// mixing against complex arithmetic, whitening, LS unbiasedness and the
/// subcarrier accounting. Each finishes well under a second.
std::vector<SelftestCheck> run_selftest();

}  // namespace fdsic
