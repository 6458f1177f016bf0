#include "fdsic/bss_sic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fdsic/ls_sic.hpp"

namespace fdsic {

namespace {

double pearson_abs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return denom > 0.0 ? std::abs(ca.dot(cb)) / denom : 0.0;
}

Eigen::Matrix2Xd lift_pairs(std::span<const Complex> t) {
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    out(0, static_cast<Eigen::Index>(i)) = t[i].real();
    out(1, static_cast<Eigen::Index>(i)) = t[i].imag();
  }
  return out;
}

double lp_fit_residual(const Eigen::Matrix2Xd& y_lp, const Eigen::Matrix2Xd& t_lp,
                       const Eigen::Matrix2d& g) {
  return (y_lp - g * t_lp).squaredNorm();
}

// Observation columns of one bin group in a fixed order: data symbols, then
// node A's LP slot, then node B's LP slot.
struct ColumnLayout {
  ComplexVector x1, x2;
  std::vector<std::vector<int>> data_cols;  // per bin
  std::vector<int> si_lp_cols;
  std::vector<int> soi_lp_cols;
  ComplexVector si_lp_training;
  ComplexVector soi_lp_training;
  std::vector<int> fit_cols;
};

ColumnLayout gather_columns(const FrameGrids& x1, const FrameGrids& x2, const std::vector<int>& bins,
                            const FrameSpec& spec, bool include_lp) {
  const ComplexGrid t_soi = training_grid(spec, NodeId::B);
  ColumnLayout c;
  auto push = [&](Complex a, Complex b) {
    c.x1.push_back(a);
    c.x2.push_back(b);
    return static_cast<int>(c.x1.size()) - 1;
  };
  for (int bin : bins) {
    std::vector<int> cols;
    for (int n = 0; n < spec.n_symbols; ++n) cols.push_back(push(x1.data(bin, n), x2.data(bin, n)));
    c.data_cols.push_back(std::move(cols));
    for (int l = 0; l < spec.lp_symbols; ++l) {
      c.si_lp_cols.push_back(push(x1.lp_a(bin, l), x2.lp_a(bin, l)));
      c.si_lp_training.push_back(x1.lp_a(bin, l));
    }
    for (int l = 0; l < spec.lp_symbols; ++l) {
      c.soi_lp_cols.push_back(push(x1.lp_b(bin, l), x2.lp_b(bin, l)));
      c.soi_lp_training.push_back(t_soi(bin, l));
    }
  }
  for (int i = 0; i < static_cast<int>(c.x1.size()); ++i) c.fit_cols.push_back(i);
  if (!include_lp) {
    c.fit_cols.clear();
    for (const auto& cols : c.data_cols) c.fit_cols.insert(c.fit_cols.end(), cols.begin(), cols.end());
  }
  return c;
}

Eigen::Matrix2Xd take_columns(const Eigen::Matrix2Xd& y, const std::vector<int>& cols) {
  Eigen::Matrix2Xd out(2, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = y.col(cols[i]);
  return out;
}

}  // namespace

RealDataMatrix lift_to_real(std::span<const Complex> x1, std::span<const Complex> x2) {
  if (x1.size() != x2.size()) throw Error("lifting needs equal-length inputs");
  Eigen::MatrixXd values(4, static_cast<Eigen::Index>(x1.size()));
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    values(0, c) = x1[i].real();
    values(1, c) = x1[i].imag();
    values(2, c) = x2[i].real();
    values(3, c) = x2[i].imag();
  }
  return RealDataMatrix(std::move(values));
}

Eigen::Matrix2d complex_as_real(Complex a) {
  Eigen::Matrix2d m;
  m << a.real(), -a.imag(), a.imag(), a.real();
  return m;
}

Eigen::Matrix4d lifted_mixing(Complex alpha1, Complex alpha2) {
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a.topLeftCorner<2, 2>().setIdentity();
  a.bottomLeftCorner<2, 2>() = complex_as_real(alpha1);
  a.bottomRightCorner<2, 2>() = complex_as_real(alpha2);
  return a;
}

bool AmbiguityEstimate::accepted(double max_condition) const {
  return std::isfinite(condition_number) && condition_number <= max_condition;
}

Complex AmbiguityEstimate::as_complex() const {
  return {(g(0, 0) + g(1, 1)) / 2.0, (g(1, 0) - g(0, 1)) / 2.0};
}

AmbiguityEstimate estimate_ambiguity(const Eigen::Matrix2Xd& y_lp, std::span<const Complex> t_lp) {
  if (y_lp.cols() != static_cast<Eigen::Index>(t_lp.size()) || t_lp.empty())
    throw Error("LP components and training differ in length");
  const Eigen::Matrix2Xd t = lift_pairs(t_lp);
  const Eigen::Matrix2d gram = t * t.transpose();
  AmbiguityEstimate est;
  if (std::abs(gram.determinant()) < 1e-12 * std::max(1.0, gram.squaredNorm())) {
    est.g.setZero();
    est.condition_number = std::numeric_limits<double>::infinity();
    return est;
  }
  est.g = (y_lp * t.transpose()) * gram.inverse();

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(est.g);
  const auto sv = svd.singularValues();
  est.condition_number = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();

  const Eigen::Matrix2d structured = complex_as_real(est.as_complex());
  const double norm = est.g.norm();
  est.complexness = norm > 0.0 ? (est.g - structured).norm() / norm : 0.0;
  return est;
}

ResolvedComponents resolve_components(const Eigen::MatrixXd& components,
                                      std::span<const Complex> x1,
                                      const std::vector<int>& lp_columns,
                                      std::span<const Complex> t_lp, double leak_threshold) {
  if (components.cols() != static_cast<Eigen::Index>(x1.size()))
    throw Error("components and SI reference differ in length");
  if (lp_columns.size() != t_lp.size()) throw Error("LP columns and training differ in length");

  ResolvedComponents out;
  Eigen::VectorXd si_r(components.cols()), si_i(components.cols());
  for (Eigen::Index c = 0; c < components.cols(); ++c) {
    si_r(c) = x1[static_cast<std::size_t>(c)].real();
    si_i(c) = x1[static_cast<std::size_t>(c)].imag();
  }
  std::vector<int> candidates;
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    const Eigen::VectorXd y = components.row(r).transpose();
    const double leak = std::max(pearson_abs(y, si_r), pearson_abs(y, si_i));
    out.si_leak.push_back(leak);
    if (leak <= leak_threshold) candidates.push_back(static_cast<int>(r));
  }
  if (candidates.size() < 2) {
    out.note = "fewer than two SI-uncorrelated components";
    return out;
  }

  const Eigen::Matrix2Xd t = lift_pairs(t_lp);
  double best_residual = std::numeric_limits<double>::infinity();
  double best_cond = std::numeric_limits<double>::infinity();
  double best_complexness = std::numeric_limits<double>::infinity();
  double best_dominance = -std::numeric_limits<double>::infinity();
  const double signs[2] = {1.0, -1.0};
  for (std::size_t a = 0; a < candidates.size(); ++a)
    for (std::size_t b = 0; b < candidates.size(); ++b) {
      if (a == b) continue;
      for (double sa : signs)
        for (double sb : signs) {
          Eigen::Matrix2Xd y(2, components.cols());
          y.row(0) = sa * components.row(candidates[a]);
          y.row(1) = sb * components.row(candidates[b]);
          const Eigen::Matrix2Xd y_lp = take_columns(y, lp_columns);
          const AmbiguityEstimate est = estimate_ambiguity(y_lp, t_lp);
          if (!std::isfinite(est.condition_number)) continue;
          const double residual = lp_fit_residual(y_lp, t, est.g);
          const double scale = std::max(1e-300, y_lp.squaredNorm());
          const double dominance = (est.g(0, 0) > 0 && est.g(1, 1) > 0 ? 1.0 : 0.0) +
                                   std::abs(est.g(0, 0)) + std::abs(est.g(1, 1)) -
                                   std::abs(est.g(0, 1)) - std::abs(est.g(1, 0));
          // Residual and conditioning decide between genuinely different
          // pairs. Order/sign variants tie on both; among them the one closest
          // to a complex scalar wins, then the most diagonal one.
          const double tie = 1e-9;
          const double rel = residual / scale;
          const bool better_fit = rel < best_residual - tie;
          const bool same_fit = std::abs(rel - best_residual) <= tie;
          const bool better_cond = est.condition_number < best_cond * (1.0 - tie);
          const bool same_cond = std::abs(est.condition_number - best_cond) <= tie * best_cond;
          const bool better_cx = est.complexness < best_complexness - 1e-6;
          const bool same_cx = std::abs(est.complexness - best_complexness) <= 1e-6;
          if (better_fit ||
              (same_fit && (better_cond ||
                            (same_cond && (better_cx || (same_cx && dominance > best_dominance)))))) {
            best_residual = rel;
            best_cond = est.condition_number;
            best_complexness = est.complexness;
            best_dominance = dominance;
            out.y = y;
            out.ambiguity = est;
            out.order = {candidates[a], candidates[b]};
            out.ok = true;
          }
        }
    }
  if (!out.ok) out.note = "singular LP fit for every component pair";
  return out;
}

SeparationOutcome fica_separate(const FrameGrids& x1, const FrameGrids& x2,
                                const std::vector<int>& bins, const FrameSpec& spec,
                                const FicaSicOptions& opts, double output_noise) {
  if (x2.lp_b.empty() || x1.lp_b.empty() || spec.preamble_mode != PreambleMode::Nonoverlapped)
    throw Error("FICA-SIC needs the nonoverlapped long preamble");
  if (bins.empty()) throw Error("no bins to separate");

  SeparationOutcome out;
  out.diag.bin = bins.front();
  auto fail = [&](std::string why) {
    out.ok = false;
    out.diag.note = std::move(why);
    return out;
  };

  const ColumnLayout cols = gather_columns(x1, x2, bins, spec, opts.include_lp);
  const RealDataMatrix lifted = lift_to_real(cols.x1, cols.x2);
  Eigen::MatrixXd fit(4, static_cast<Eigen::Index>(cols.fit_cols.size()));
  for (std::size_t i = 0; i < cols.fit_cols.size(); ++i)
    fit.col(static_cast<Eigen::Index>(i)) = lifted.values().col(cols.fit_cols[i]);

  WhitenedData white;
  try {
    white = center_and_whiten(fit, opts.rank_tol);
  } catch (const Error& e) {
    return fail(e.what());
  }
  const WhiteningTransform& vt = white.transform;
  if (vt.kept_dims < 4) return fail("rank-deficient mixture: " + vt.warning);

  // Demixing starts from the identity: rows 1-2 (the SI, known) stay fixed,
  // rows 3-4 are the initial guesses for the SOI pair. Mapped to whitened
  // space, the SOI rows are made orthogonal to the SI rows.
  Eigen::MatrixXd si_rows(2, vt.kept_dims), init(2, vt.kept_dims);
  for (int r = 0; r < 2; ++r) {
    si_rows.row(r) = vt.to_whitened_row(Eigen::Vector4d::Unit(r)).transpose();
    init.row(r) = vt.to_whitened_row(Eigen::Vector4d::Unit(r + 2)).transpose();
  }
  Eigen::MatrixXd stacked(4, vt.kept_dims);
  stacked << si_rows, init;
  stacked = orthonormalize_rows(stacked);
  si_rows = stacked.topRows(2);
  init = stacked.bottomRows(2);

  const DemixingRows rows = deflation_fica(white.z, 2, init, opts.ica,
                                           opts.anchor_si_rows ? si_rows : Eigen::MatrixXd());
  out.diag.converged = rows.all_converged();
  out.diag.iterations = *std::max_element(rows.iterations.begin(), rows.iterations.end());
  if (!out.diag.converged) return fail("FastICA did not converge");

  // Demixing applied to the uncentred observations.
  const Eigen::MatrixXd components = rows.rows * vt.matrix * lifted.values();
  const ResolvedComponents resolved =
      resolve_components(components, cols.x1, cols.soi_lp_cols, cols.soi_lp_training,
                         opts.si_leak_threshold);
  out.diag.si_leak_correlation = resolved.si_leak.empty()
                                     ? 0.0
                                     : *std::max_element(resolved.si_leak.begin(), resolved.si_leak.end());
  if (!resolved.ok) return fail(resolved.note);
  out.diag.condition_number = resolved.ambiguity.condition_number;
  out.diag.complexness = resolved.ambiguity.complexness;
  if (!resolved.ambiguity.accepted(opts.max_condition)) return fail("ill-conditioned ambiguity estimate");
  out.diag.si_leak_correlation =
      std::max(resolved.si_leak[static_cast<std::size_t>(resolved.order[0])],
               resolved.si_leak[static_cast<std::size_t>(resolved.order[1])]);

  Eigen::Matrix2d g = resolved.ambiguity.g;
  if (opts.complex_ambiguity) {
    // Keep the non-complex part of G only as far as it stands above its noise
    // level. The noise is read off the components in node A's LP slot, where
    // the SOI is silent.
    const Eigen::Matrix2d structured = complex_as_real(resolved.ambiguity.as_complex());
    const Eigen::Matrix2d rest = g - structured;
    const Eigen::Matrix2Xd t = lift_pairs(cols.soi_lp_training);
    double comp_var = 0.0;
    if (output_noise >= 0.0) {
      comp_var = output_noise / 2.0 * g.squaredNorm() / 2.0;
    } else {
      const Eigen::Matrix2Xd silent = take_columns(resolved.y, cols.si_lp_cols);
      comp_var = silent.squaredNorm() / static_cast<double>(silent.size());
    }
    const double entry_var = comp_var * (t * t.transpose()).inverse().trace() / 2.0;
    const double rest_sq = rest.squaredNorm();
    const double keep = rest_sq > 0.0 ? std::clamp(1.0 - 2.0 * entry_var / rest_sq, 0.0, 1.0) : 0.0;
    g = structured + keep * rest;
  }
  if (std::abs(g.determinant()) <= 1e-12 * std::max(1e-300, g.squaredNorm()))
    return fail("singular ambiguity estimate");
  Eigen::Matrix2Xd s_hat = g.inverse() * resolved.y;

  if (opts.refine_si_leak) {
    // During node A's LP slot the SOI is silent, so whatever remains is the
    // SI leak J21 S_si; fit it against the SI training and subtract.
    const Eigen::Matrix2Xd leak_lp = take_columns(s_hat, cols.si_lp_cols);
    const AmbiguityEstimate leak = estimate_ambiguity(leak_lp, cols.si_lp_training);
    s_hat -= leak.g * lift_pairs(cols.x1);
  }

  out.soi.resize(bins.size());
  out.soi_silent.resize(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    for (int l = 0; l < spec.lp_symbols; ++l) {
      const int c = cols.si_lp_cols[b * static_cast<std::size_t>(spec.lp_symbols) + static_cast<std::size_t>(l)];
      out.soi_silent[b].push_back({s_hat(0, c), s_hat(1, c)});
    }
    ComplexVector& dst = out.soi[b];
    dst.resize(static_cast<std::size_t>(spec.n_symbols));
    for (int n = 0; n < spec.n_symbols; ++n) {
      const int c = cols.data_cols[b][static_cast<std::size_t>(n)];
      dst[static_cast<std::size_t>(n)] = {s_hat(0, c), s_hat(1, c)};
    }
  }
  out.ok = true;
  return out;
}

double estimate_noise_power(const FrameGrids& x1, const FrameGrids& x2, const std::vector<int>& bins,
                            const FrameSpec& spec) {
  if (spec.lp_symbols < 2) throw Error("noise estimation needs at least two LP symbols");
  if (x2.lp_b.empty()) throw Error("noise estimation needs the nonoverlapped long preamble");
  const ComplexGrid t_soi = training_grid(spec, NodeId::B);
  double acc = 0.0;
  long dof = 0;
  auto slot = [&](const ComplexGrid& r, const ComplexGrid& t, int bin) {
    const ComplexVector rv = r.row(bin);
    const ComplexVector tv = t.row(bin);
    const Complex a = ls_estimate(rv, tv);
    for (std::size_t l = 0; l < rv.size(); ++l) acc += std::norm(rv[l] - a * tv[l]);
    dof += static_cast<long>(rv.size()) - 1;
  };
  for (int bin : bins) {
    slot(x2.lp_a, x1.lp_a, bin);
    slot(x2.lp_b, t_soi, bin);
  }
  return dof > 0 ? acc / static_cast<double>(dof) : 0.0;
}

SicResult fica_sic(const FrameGrids& x1, const FrameGrids& x2, const FrameSpec& spec,
                   const FicaSicOptions& opts) {
  if (x2.lp_b.empty() || spec.preamble_mode != PreambleMode::Nonoverlapped)
    throw Error("FICA-SIC needs the nonoverlapped long preamble");
  if (x2.data.subcarriers() != spec.n_fft || x2.data.symbols() != spec.n_symbols ||
      x1.data.subcarriers() != spec.n_fft || x1.data.symbols() != spec.n_symbols)
    throw Error("grids do not match the frame spec");

  SicResult out;
  out.method = SicMethod::Fica;
  out.soi_grid = ComplexGrid(spec.n_fft, spec.n_symbols);
  out.bins = spec.data_bins();

  std::vector<std::vector<int>> groups;
  if (opts.joint_subcarriers)
    groups.push_back(out.bins);
  else
    for (int bin : out.bins) groups.push_back({bin});

  // The leak test compares the output in the SOI-silent slot with the noise
  // floor seen through the LS estimate of the SOI channel.
  const bool have_noise = spec.lp_symbols >= 2;
  double noise = 0.0;
  LsChannelEstimate ls_est;
  if (have_noise) {
    noise = estimate_noise_power(x1, x2, out.bins, spec);
    ls_est = ls_initial_estimate(x1, x2, spec);
    // Round-off residuals on noiseless data are not a noise floor.
    double lp_power = 0.0;
    for (int bin : out.bins)
      for (int l = 0; l < spec.lp_symbols; ++l) lp_power += std::norm(x2.lp_b(bin, l)) + std::norm(x2.lp_a(bin, l));
    lp_power /= 2.0 * spec.lp_symbols * static_cast<double>(out.bins.size());
    if (noise <= 1e-20 * lp_power) noise = 0.0;
  }
  // Noise floor of the output on a bin: the received noise seen through the
  // LS estimate of the SOI channel.
  auto floor_of = [&](int bin) {
    const double a2 = std::norm(ls_est.alpha2_hat[static_cast<std::size_t>(bin)]);
    return a2 > 0.0 ? noise / a2 : std::numeric_limits<double>::infinity();
  };
  const bool leak_test = opts.leak_test_threshold > 0.0 && have_noise && noise > 0.0;

  std::vector<int> failed;
  out.diag.reserve(out.bins.size());
  for (const auto& group : groups) {
    double group_floor = -1.0;
    if (have_noise) {
      group_floor = 0.0;
      for (int bin : group) group_floor += floor_of(bin) / static_cast<double>(group.size());
      if (!std::isfinite(group_floor)) group_floor = -1.0;
    }
    const SeparationOutcome sep = fica_separate(x1, x2, group, spec, opts, group_floor);
    for (std::size_t b = 0; b < group.size(); ++b) {
      SubcarrierDiag diag = sep.diag;
      diag.bin = group[b];
      bool ok = sep.ok;
      if (ok && leak_test) {
        double p = 0.0;
        for (const Complex& v : sep.soi_silent[b]) p += std::norm(v);
        p /= static_cast<double>(sep.soi_silent[b].size());
        const double floor = floor_of(group[b]);
        if (p > opts.leak_test_threshold * floor) {
          ok = false;
          diag.note = "output power in SOI-silent slot " + std::to_string(p / floor) + "x noise floor";
        }
      }
      if (ok) {
        for (int n = 0; n < spec.n_symbols; ++n)
          out.soi_grid(group[b], n) = sep.soi[b][static_cast<std::size_t>(n)];
      } else {
        diag.status = SubcarrierStatus::Unrecoverable;
        failed.push_back(static_cast<int>(out.diag.size()));
      }
      out.diag.push_back(std::move(diag));
    }
  }

  if (failed.empty()) return out;
  if (!opts.fallback_to_ls) {
    if (failed.size() == out.bins.size()) throw Error("FICA-SIC failed on every subcarrier");
    return out;
  }

  const SicResult ls = ls_sic(x1, x2, spec);
  for (int idx : failed) {
    SubcarrierDiag& diag = out.diag[static_cast<std::size_t>(idx)];
    const SubcarrierDiag& ls_diag = ls.diag[static_cast<std::size_t>(idx)];
    if (ls_diag.status != SubcarrierStatus::Ok) {
      diag.note += "; LS fallback unrecoverable";
      continue;
    }
    diag.status = SubcarrierStatus::FallbackLs;
    for (int n = 0; n < spec.n_symbols; ++n) out.soi_grid(diag.bin, n) = ls.soi_grid(diag.bin, n);
  }
  return out;
}

}  // namespace fdsic
