#include "fdsic/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "fdsic/ls_sic.hpp"
#include "fdsic/metrics.hpp"

namespace fdsic {

namespace {

// Seed streams within one trial.
enum : std::uint64_t { kChannelStream = 1, kSiBitsStream = 2, kSoiBitsStream = 3, kNoiseStream = 4 };

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw Error("config: '" + key + "' expects a boolean, got '" + v + "'");
}

// Six decimals in the CSV; rounding before the subtraction keeps the
// printed SIC equal to the printed OSINR minus ISINR.
double quantize(double x) { return std::round(x * 1e6) / 1e6; }

Bits random_bits(int count, std::uint64_t seed) {
  Rng rng(seed);
  Bits bits(static_cast<std::size_t>(count));
  std::uint64_t word = 0;
  for (int i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rng();
    bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  return bits;
}

// SOI transmit power giving the requested nominal ISINR (linear-regime powers).
double solve_soi_tx_db(double target_isinr_db, const SweepConfig& cfg, const ChannelRealization& chan,
                       const FrameSpec& spec) {
  const double p_si = db_to_power(cfg.si_tx_db);
  const double noise = db_to_power(cfg.noise_db);
  double acc = 0.0;
  const auto bins = spec.data_bins();
  for (int bin : bins) {
    const auto k = static_cast<std::size_t>(bin);
    const double g2 = std::max(std::norm(chan.alpha2[k]), 1e-30);
    acc += 10.0 * std::log10(g2) - 10.0 * std::log10(p_si * std::norm(chan.alpha1[k]) + noise);
  }
  return target_isinr_db - acc / static_cast<double>(bins.size());
}

SinrReport make_report(SicMethod method, const SicResult& result, const Transmission& tx,
                       const NodeFrame& soi_frame, const FrameSpec& spec, const SweepConfig& cfg) {
  SinrReport r;
  r.method = method;
  const auto bins = spec.data_bins();
  r.isinr_db = quantize(compute_isinr(tx.truth, spec));
  r.osinr_db = quantize(compute_osinr(result.soi_grid, soi_frame.ref_grid.data, bins));
  r.sic_db = r.osinr_db - r.isinr_db;
  r.evm_db = quantize(compute_evm_db(result.soi_grid, soi_frame.ref_grid.data, bins));
  const Bits detected = detect_bits(result, spec, cfg.qam_order);
  r.ber = compute_ber(detected, soi_frame.payload_bits);
  r.n_bits = static_cast<long long>(detected.size());
  r.data_subcarriers = static_cast<int>(bins.size());
  r.fallback_subcarriers =
      result.count(SubcarrierStatus::FallbackLs) + result.count(SubcarrierStatus::Unrecoverable);
  return r;
}

std::string format_double(double x, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  std::string s = buf;
  if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

}  // namespace

void SweepConfig::validate() const {
  if (power_values.empty() || hpr3_db.empty() || frame_len.empty()) throw Error("sweep axes must be non-empty");
  for (double v : power_values)
    if (!std::isfinite(v)) throw Error("power axis values must be finite");
  for (double v : hpr3_db)
    if (!(v >= 0.0 && (v <= 200.0 || std::isinf(v)))) throw Error("hpr3_db values must lie in [0, 200]");
  for (int n : frame_len)
    if (n < 1) throw Error("frame_len values must be at least 1");
  if (trials < 1) throw Error("trials must be at least 1");
  if (!std::isfinite(si_tx_db)) throw Error("si_tx_db must be finite");
  if (std::isnan(noise_db)) throw Error("noise_db must be a number");
  if (qam_order != 4 && qam_order != 16 && qam_order != 64) throw Error("qam must be 4, 16 or 64");
  if (fica_pilots != 0 && fica_pilots != 8) throw Error("fica_pilots must be 0 or 8");
  if (ls_pilots != 8) throw Error("ls_pilots must be 8");
  if (channel.n_taps < 1 || channel.n_taps > 17) throw Error("channel_taps must be in 1..17");
  if (fica.ica.max_iter < 1 || !(fica.ica.tol > 0.0)) throw Error("invalid FastICA options");
  if (!(fica.leak_test_threshold >= 0.0)) throw Error("fica_leak_test must be non-negative");
  if (jobs < 1) throw Error("jobs must be at least 1");
}

SweepConfig parse_config(std::istream& in) {
  SweepConfig cfg;
  bool saw_soi = false, saw_isinr = false;
  IqImbalance iqi_si, iqi_soi;
  bool use_iqi_si = false, use_iqi_soi = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto doubles = [&] {
      std::vector<double> out;
      for (const auto& item : split_list(value)) out.push_back(parse_double(key, item));
      if (out.empty()) throw Error("config: '" + key + "' must not be empty");
      return out;
    };

    if (key == "soi_tx_db") {
      cfg.axis = PowerAxis::SoiTxDb;
      cfg.power_values = doubles();
      saw_soi = true;
    } else if (key == "isinr_db") {
      cfg.axis = PowerAxis::IsinrDb;
      cfg.power_values = doubles();
      saw_isinr = true;
    } else if (key == "hpr3_db") {
      cfg.hpr3_db = doubles();
    } else if (key == "frame_len") {
      cfg.frame_len.clear();
      for (const auto& item : split_list(value)) cfg.frame_len.push_back(static_cast<int>(parse_int(key, item)));
      if (cfg.frame_len.empty()) throw Error("config: 'frame_len' must not be empty");
    } else if (key == "si_tx_db") {
      cfg.si_tx_db = parse_double(key, value);
    } else if (key == "noise_db") {
      cfg.noise_db = parse_double(key, value);
    } else if (key == "channel") {
      if (value == "flat") cfg.channel.model = ChannelModel::Flat;
      else if (value == "multipath") cfg.channel.model = ChannelModel::Multipath;
      else throw Error("config: 'channel' must be flat or multipath");
    } else if (key == "channel_taps") {
      cfg.channel.n_taps = static_cast<int>(parse_int(key, value));
    } else if (key == "channel_decay_db") {
      cfg.channel.decay_per_tap_db = parse_double(key, value);
    } else if (key == "qam") {
      cfg.qam_order = static_cast<int>(parse_int(key, value));
    } else if (key == "pa_si") {
      cfg.pa_on_si = parse_bool(key, value);
    } else if (key == "pa_soi") {
      cfg.pa_on_soi = parse_bool(key, value);
    } else if (key == "iqi_si_gain_db") {
      iqi_si.gain_mismatch_db = parse_double(key, value);
      use_iqi_si = true;
    } else if (key == "iqi_si_phase_deg") {
      iqi_si.phase_mismatch_deg = parse_double(key, value);
      use_iqi_si = true;
    } else if (key == "iqi_soi_gain_db") {
      iqi_soi.gain_mismatch_db = parse_double(key, value);
      use_iqi_soi = true;
    } else if (key == "iqi_soi_phase_deg") {
      iqi_soi.phase_mismatch_deg = parse_double(key, value);
      use_iqi_soi = true;
    } else if (key == "fica_pilots") {
      cfg.fica_pilots = static_cast<int>(parse_int(key, value));
    } else if (key == "ls_pilots") {
      cfg.ls_pilots = static_cast<int>(parse_int(key, value));
    } else if (key == "fica_max_iter") {
      cfg.fica.ica.max_iter = static_cast<int>(parse_int(key, value));
    } else if (key == "fica_tol") {
      cfg.fica.ica.tol = parse_double(key, value);
    } else if (key == "fica_max_condition") {
      cfg.fica.max_condition = parse_double(key, value);
    } else if (key == "fica_fallback") {
      cfg.fica.fallback_to_ls = parse_bool(key, value);
    } else if (key == "fica_include_lp") {
      cfg.fica.include_lp = parse_bool(key, value);
    } else if (key == "fica_anchor_si") {
      cfg.fica.anchor_si_rows = parse_bool(key, value);
    } else if (key == "fica_refine") {
      cfg.fica.refine_si_leak = parse_bool(key, value);
    } else if (key == "fica_joint") {
      cfg.fica.joint_subcarriers = parse_bool(key, value);
    } else if (key == "fica_complex_ambiguity") {
      cfg.fica.complex_ambiguity = parse_bool(key, value);
    } else if (key == "fica_leak_test") {
      cfg.fica.leak_test_threshold = parse_double(key, value);
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
      const long long s = parse_int(key, value);
      if (s < 0) throw Error("config: 'seed' must be non-negative");
      cfg.base_seed = static_cast<std::uint64_t>(s);
    } else if (key == "output") {
      cfg.output_path = value;
    } else if (key == "jobs") {
      cfg.jobs = static_cast<int>(parse_int(key, value));
    } else {
      throw Error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (saw_soi && saw_isinr) throw Error("config: set only one of soi_tx_db and isinr_db");
  if (use_iqi_si) cfg.iqi_si = iqi_si;
  if (use_iqi_soi) cfg.iqi_soi = iqi_soi;
  cfg.validate();
  return cfg;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  return parse_config(in);
}

TrialOutcome run_trial(const SweepConfig& cfg, double power_value, double hpr3_db, int frame_len,
                       int trial) {
  const std::uint64_t trial_seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(trial));
  const FrameSpec fica_spec = FrameSpec::wifi(cfg.fica_pilots, frame_len);
  const FrameSpec ls_spec = FrameSpec::wifi(cfg.ls_pilots, frame_len);

  Rng chan_rng(derive_seed(trial_seed, kChannelStream));
  TrialOutcome out;
  out.channel = draw_channel(cfg.channel, fica_spec, chan_rng);

  const double soi_tx_db = cfg.axis == PowerAxis::SoiTxDb
                               ? power_value
                               : solve_soi_tx_db(power_value, cfg, out.channel, fica_spec);

  ImpairmentConfig imp;
  imp.noise_power = db_to_power(cfg.noise_db);
  imp.hpr3_db = hpr3_db;
  imp.pa_on_si = cfg.pa_on_si;
  imp.pa_on_soi = cfg.pa_on_soi;
  imp.iqi_si = cfg.iqi_si;
  imp.iqi_soi = cfg.iqi_soi;
  imp.si_tx_power_db = cfg.si_tx_db;
  imp.soi_tx_power_db = soi_tx_db;
  imp.seed = derive_seed(trial_seed, kNoiseStream);

  auto run_method = [&](const FrameSpec& spec, SicMethod method) {
    const int n_bits = payload_bit_count(spec, cfg.qam_order);
    const NodeFrame si = build_frame(random_bits(n_bits, derive_seed(trial_seed, kSiBitsStream)), spec,
                                     NodeId::A, cfg.qam_order);
    const NodeFrame soi = build_frame(random_bits(n_bits, derive_seed(trial_seed, kSoiBitsStream)), spec,
                                      NodeId::B, cfg.qam_order);
    const Transmission tx = transmit_through(si, soi, out.channel, imp, spec);
    SicResult result = method == SicMethod::Fica ? fica_sic(tx.x1, tx.x2, spec, cfg.fica)
                                                 : ls_sic(tx.x1, tx.x2, spec);
    SinrReport report = make_report(method, result, tx, soi, spec, cfg);
    report.soi_tx_db = soi_tx_db;
    report.si_tx_db = cfg.si_tx_db;
    report.hpr3_db = hpr3_db;
    report.frame_len = frame_len;
    report.trial = trial;
    report.trial_seed = trial_seed;
    return std::make_pair(report, std::move(result));
  };

  auto [fica_report, fica_result] = run_method(fica_spec, SicMethod::Fica);
  auto [ls_report, ls_result] = run_method(ls_spec, SicMethod::Ls);
  out.fica = fica_report;
  out.ls = ls_report;
  out.fica_result = std::move(fica_result);
  out.ls_result = std::move(ls_result);
  return out;
}

std::vector<SinrReport> run_sweep(const SweepConfig& cfg, int jobs) {
  cfg.validate();
  if (jobs <= 0) jobs = cfg.jobs;

  struct Task {
    double power;
    double hpr3;
    int n;
    int trial;
  };
  std::vector<Task> tasks;
  for (double p : cfg.power_values)
    for (double h : cfg.hpr3_db)
      for (int n : cfg.frame_len)
        for (int t = 0; t < cfg.trials; ++t) tasks.push_back({p, h, n, t});

  std::vector<std::pair<SinrReport, SinrReport>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& t = tasks[i];
        TrialOutcome o = run_trial(cfg, t.power, t.hpr3, t.n, t.trial);
        results[i] = {o.fica, o.ls};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(tasks.size());
        return;
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Tasks are trial-minor within a point; emit FICA rows then LS rows per point.
  std::vector<SinrReport> rows;
  rows.reserve(2 * results.size());
  const auto per_point = static_cast<std::size_t>(cfg.trials);
  for (std::size_t start = 0; start < results.size(); start += per_point) {
    for (std::size_t i = start; i < start + per_point; ++i) rows.push_back(results[i].first);
    for (std::size_t i = start; i < start + per_point; ++i) rows.push_back(results[i].second);
  }
  return rows;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "method",   "soi_tx_db", "si_tx_db", "hpr3_db", "frame_len",  "trial",
      "trial_seed", "isinr_db", "osinr_db", "sic_db", "ber",        "evm_db",
      "n_bits",   "data_subcarriers", "fallback_subcarriers"};
  return cols;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv(std::ostream& out, const std::vector<SinrReport>& rows) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << csv_escape(cols[i]);
  out << "\r\n";
  for (const auto& r : rows) {
    const std::vector<std::string> fields = {
        to_string(r.method),          format_double(r.soi_tx_db), format_double(r.si_tx_db),
        format_double(r.hpr3_db),     std::to_string(r.frame_len), std::to_string(r.trial),
        std::to_string(r.trial_seed), format_double(r.isinr_db),  format_double(r.osinr_db),
        format_double(r.sic_db),      format_double(r.ber, 9),       format_double(r.evm_db),
        std::to_string(r.n_bits),     std::to_string(r.data_subcarriers),
        std::to_string(r.fallback_subcarriers)};
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_escape(fields[i]);
    out << "\r\n";
  }
}

}  // namespace fdsic
