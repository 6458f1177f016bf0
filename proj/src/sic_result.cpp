#include "fdsic/sic_result.hpp"

#include <algorithm>

namespace fdsic {

const char* to_string(SicMethod method) { return method == SicMethod::Fica ? "FICA" : "LS"; }

const char* to_string(SubcarrierStatus status) {
  switch (status) {
    case SubcarrierStatus::Ok: return "ok";
    case SubcarrierStatus::FallbackLs: return "fallback-ls";
    case SubcarrierStatus::Unrecoverable: return "unrecoverable";
  }
  return "?";
}

int SicResult::count(SubcarrierStatus status) const {
  return static_cast<int>(
      std::count_if(diag.begin(), diag.end(), [status](const SubcarrierDiag& d) { return d.status == status; }));
}

}  // namespace fdsic
