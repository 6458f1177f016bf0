// fdsic: sweep, single-trial diagnostics and self-test front end.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fdsic/metrics.hpp"
#include "fdsic/selftest.hpp"
#include "fdsic/sweep.hpp"

namespace fs = std::filesystem;
using namespace fdsic;

namespace {

// FDSIC_OUTPUT_DIR replaces the directory part of the output path.
std::string resolve_output(const std::string& path) {
  const char* dir = std::getenv("FDSIC_OUTPUT_DIR");
  if (!dir || !*dir) return path;
  return (fs::path(dir) / fs::path(path).filename()).string();
}

int cmd_sweep(const std::string& config_path, std::string output, int jobs) {
  SweepConfig cfg = load_config(config_path);
  if (!output.empty()) cfg.output_path = output;
  if (jobs > 0) cfg.jobs = jobs;
  const auto rows = run_sweep(cfg);
  if (cfg.output_path.empty() || cfg.output_path == "-") {
    write_csv(std::cout, rows);
    return 0;
  }
  const std::string path = resolve_output(cfg.output_path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write output file '" + path + "'");
  write_csv(out, rows);
  out.close();
  if (!out) throw Error("failed writing '" + path + "'");
  std::cerr << "wrote " << rows.size() << " rows to " << path << "\n";
  return 0;
}

void print_diag(const char* label, const SicResult& result) {
  std::printf("%s per-subcarrier diagnostics\n", label);
  std::printf("  %4s %6s %-13s %5s %5s %10s %10s %8s  %s\n", "bin", "freq", "status", "conv", "iter",
              "cond", "complexity", "si_leak", "note");
  for (const auto& d : result.diag) {
    const int f = d.bin < 32 ? d.bin : d.bin - 64;
    std::printf("  %4d %6d %-13s %5s %5d %10.3g %10.3g %8.4f  %s\n", d.bin, f, to_string(d.status),
                d.converged ? "yes" : "no", d.iterations, d.condition_number, d.complexness,
                d.si_leak_correlation, d.note.c_str());
  }
}

void print_report(const SinrReport& r) {
  std::printf("%-4s ISINR %8.3f dB  OSINR %8.3f dB  SIC %8.3f dB  BER %.3e  EVM %8.3f dB  fallback %d/%d\n",
              to_string(r.method), r.isinr_db, r.osinr_db, r.sic_db, r.ber, r.evm_db,
              r.fallback_subcarriers, r.data_subcarriers);
}

int cmd_single(const std::string& config_path, int trial, bool quiet) {
  const SweepConfig cfg = load_config(config_path);
  const double power = cfg.power_values.front();
  const double hpr = cfg.hpr3_db.front();
  const int n = cfg.frame_len.front();
  const TrialOutcome o = run_trial(cfg, power, hpr, n, trial);
  std::printf("point: %s %.3f dB, hpr3 %.1f dB, N %d, trial %d, seed %llu\n",
              cfg.axis == PowerAxis::IsinrDb ? "ISINR" : "SOI tx", power, hpr, n, trial,
              static_cast<unsigned long long>(o.fica.trial_seed));
  if (!quiet) {
    print_diag("FICA", o.fica_result);
    print_diag("LS", o.ls_result);
  }
  print_report(o.fica);
  print_report(o.ls);
  const auto se = spectral_efficiency(FrameSpec::wifi(cfg.fica_pilots, n), FrameSpec::wifi(cfg.ls_pilots, n));
  std::printf("data subcarriers FICA/LS = %d/%d = %.4f\n", se.fica_data_subcarriers, se.ls_data_subcarriers,
              se.ratio());
  return 0;
}

int cmd_selftest() {
  int failures = 0;
  for (const auto& c : run_selftest()) {
    std::printf("%s  %s (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    failures += !c.passed;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital self-interference cancellation simulator (FastICA and LS)"};
  app.require_subcommand(1);

  std::string config, output;
  int jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a Monte-Carlo sweep and write CSV");
  sweep->add_option("-c,--config", config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--output", output, "Output CSV path ('-' for stdout)");
  sweep->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::Range(1, 1024));

  int trial = 0;
  bool quiet = false;
  auto* single = app.add_subcommand("single", "Run one trial with per-subcarrier diagnostics");
  single->add_option("-c,--config", config, "Config file (first value of each axis is used)")
      ->required()
      ->check(CLI::ExistingFile);
  single->add_option("-t,--trial", trial, "Trial index")->check(CLI::NonNegativeNumber);
  single->add_flag("-q,--quiet", quiet, "Only print the summary lines");

  app.add_subcommand("selftest", "Run the built-in oracle checks");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) return cmd_sweep(config, output, jobs);
    if (*single) return cmd_single(config, trial, quiet);
    return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
