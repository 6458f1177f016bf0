#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fdsic/bss_sic.hpp"
#include "fdsic/impairments.hpp"
#include "fdsic/ofdm_phy.hpp"
#include "fdsic/sic_result.hpp"

namespace fdsic {

/// One CSV row: one method on one trial of one sweep point.
struct SinrReport {
  SicMethod method = SicMethod::Fica;
  double soi_tx_db = 0.0;
  double si_tx_db = 0.0;
  double hpr3_db = 200.0;
  int frame_len = 0;  ///< data symbols per frame (N)
  int trial = 0;
  std::uint64_t trial_seed = 0;
  double isinr_db = 0.0;
  double osinr_db = 0.0;
  double sic_db = 0.0;  ///< osinr_db - isinr_db
  double ber = 0.0;
  double evm_db = 0.0;
  long long n_bits = 0;
  int data_subcarriers = 0;
  int fallback_subcarriers = 0;
};

/// Power axis of a sweep: either SOI transmit power directly, or a target
/// ISINR from which the SOI transmit power is solved per trial.
enum class PowerAxis { SoiTxDb, IsinrDb };

struct SweepConfig {
  PowerAxis axis = PowerAxis::IsinrDb;
  std::vector<double> power_values{-10.0};
  std::vector<double> hpr3_db{200.0};
  std::vector<int> frame_len{100};

  double si_tx_db = 0.0;
  /// AWGN power per bin relative to a unit-power symbol.
  double noise_db = -20.0;
  ChannelDraw channel;
  int qam_order = 4;
  bool pa_on_si = true;
  bool pa_on_soi = true;
  std::optional<IqImbalance> iqi_si;
  std::optional<IqImbalance> iqi_soi;

  int fica_pilots = 0;
  int ls_pilots = 8;
  FicaSicOptions fica;

  int trials = 1;
  std::uint64_t base_seed = 1;
  std::string output_path;
  int jobs = 1;

  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Lists are comma
/// separated. Unknown keys and malformed values throw Error.
SweepConfig parse_config(std::istream& in);
SweepConfig load_config(const std::string& path);

/// Everything computed for one trial at one sweep point.
struct TrialOutcome {
  SinrReport fica;
  SinrReport ls;
  SicResult fica_result;
  SicResult ls_result;
  ChannelRealization channel;
};

/// Runs both methods on one trial. The trial seed depends only on the base
/// seed and trial index, so every sweep point sees the same channel and noise
/// realisations.
TrialOutcome run_trial(const SweepConfig& cfg, double power_value, double hpr3_db, int frame_len,
                       int trial);

/// All points x trials, both methods, rows ordered by (power, hpr3, N,
/// method [FICA, LS], trial). `jobs` <= 0 uses cfg.jobs.
std::vector<SinrReport> run_sweep(const SweepConfig& cfg, int jobs = 0);

/// Column order used by write_csv.
const std::vector<std::string>& csv_columns();
void write_csv(std::ostream& out, const std::vector<SinrReport>& rows);
/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);

}  // namespace fdsic
