#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdsic/common.hpp"
#include "fdsic/fica_core.hpp"
#include "fdsic/ofdm_phy.hpp"
#include "fdsic/sic_result.hpp"

namespace fdsic {

/// Rows [Re x1; Im x1; Re x2; Im x2].
RealDataMatrix lift_to_real(std::span<const Complex> x1, std::span<const Complex> x2);

/// Real 2x2 action of multiplication by a: [[ar, -ai], [ai, ar]].
Eigen::Matrix2d complex_as_real(Complex a);

/// Lifted 4x4 mixing of the two-source model: identity on the SI rows and
/// complex_as_real(alpha1), complex_as_real(alpha2) blocks on the received rows.
Eigen::Matrix4d lifted_mixing(Complex alpha1, Complex alpha2);

/// 2x2 real map from [T_r; T_i] to the recovered SOI component pair, estimated
/// from the training symbols of the SOI's long-preamble slot.
struct AmbiguityEstimate {
  Eigen::Matrix2d g = Eigen::Matrix2d::Identity();
  double condition_number = 1.0;
  /// ||G - P(G)||_F / ||G||_F where P projects onto [[a,-b],[b,a]]; 0 when G
  /// acts as a single complex scalar.
  double complexness = 0.0;

  bool accepted(double max_condition = 1e3) const;
  /// Nearest complex scalar a + jb.
  Complex as_complex() const;
};

/// Least-squares fit of y = G t over the LP observations. For the orthogonal
/// LP pair used by the frames (T_2 = j T_1) this is exactly the per-entry
/// sample mean E[y_i t_j] / E[t_j^2].
AmbiguityEstimate estimate_ambiguity(const Eigen::Matrix2Xd& y_lp, std::span<const Complex> t_lp);

struct ResolvedComponents {
  bool ok = false;
  Eigen::Matrix2Xd y;               ///< (Y3, Y4) over all columns
  AmbiguityEstimate ambiguity;
  std::vector<double> si_leak;      ///< per extracted component
  std::vector<int> order;           ///< indices of the chosen components
  std::string note;
};

/// Rejects components whose absolute correlation with Re or Im of the known
/// SI exceeds `leak_threshold`, then picks the pair, order and signs whose LP
/// fit is best; ties (the usual case, since G absorbs order and sign) go to
/// the most diagonal-dominant G with positive diagonal.
///
/// `components` holds one row per extracted component over all columns;
/// `x1` is the known SI over the same columns; `lp_columns` index the SOI
/// training observations and `t_lp` their training symbols.
ResolvedComponents resolve_components(const Eigen::MatrixXd& components,
                                      std::span<const Complex> x1,
                                      const std::vector<int>& lp_columns,
                                      std::span<const Complex> t_lp,
                                      double leak_threshold = 0.9);

struct FicaSicOptions {
  FicaOptions ica;
  double rank_tol = 1e-10;
  double max_condition = 1e3;
  double si_leak_threshold = 0.9;
  /// Reverts failed bins to LS-SIC; otherwise they are left at zero.
  bool fallback_to_ls = true;
  /// Include the LP observations in the ICA data matrix.
  bool include_lp = true;
  /// Keep extracted rows orthogonal to the SI rows throughout the iterations,
  /// not only at initialisation.
  bool anchor_si_rows = false;
  /// Subtract an LP-estimated residual SI term from the output.
  bool refine_si_leak = false;
  /// One ICA over all data bins (valid only for flat channels).
  bool joint_subcarriers = false;
  /// Shrink the part of G that is not a complex scalar toward zero by its
  /// noise level before undoing the ambiguity. For square QAM the true map is
  /// close to a scaled rotation, so this removes about half the LP noise
  /// carried into the estimate while keeping the within-pair mixing left by
  /// the deflation when the data are clean.
  bool complex_ambiguity = true;
  /// Per-bin test on the output during node A's LP slot, where the SOI is
  /// silent: power above this multiple of the pooled noise floor marks the
  /// bin as failed. Zero disables the test.
  double leak_test_threshold = 4.0;
};

/// Output of the separation for one group of bins (a single bin unless the
/// joint mode is on).
struct SeparationOutcome {
  bool ok = false;
  std::vector<ComplexVector> soi;  ///< per bin, n_symbols estimates
  std::vector<ComplexVector> soi_silent;  ///< per bin, output over node A's LP slot
  SubcarrierDiag diag;
};

/// Lift, whiten, extract two components by deflation from the identity
/// rows 3 and 4, resolve, and undo the ambiguity. `output_noise` is the
/// expected noise power of the SOI estimate; when negative it is read off the
/// output during node A's LP slot.
SeparationOutcome fica_separate(const FrameGrids& x1, const FrameGrids& x2,
                                const std::vector<int>& bins, const FrameSpec& spec,
                                const FicaSicOptions& opts = {}, double output_noise = -1.0);

/// Noise power per bin from the residuals of the per-slot LS fits, pooled
/// over `bins`. Needs at least two LP symbols.
double estimate_noise_power(const FrameGrids& x1, const FrameGrids& x2, const std::vector<int>& bins,
                            const FrameSpec& spec);

/// FICA-based SIC over all data bins, with per-bin LS fallback.
SicResult fica_sic(const FrameGrids& x1, const FrameGrids& x2, const FrameSpec& spec,
                   const FicaSicOptions& opts = {});

}  // namespace fdsic
