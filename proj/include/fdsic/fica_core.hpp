#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fdsic/common.hpp"

namespace fdsic {

/// Real observation matrix of the lifted problem: rows [X1r, X1i, X2r, X2i],
/// one column per observation.
class RealDataMatrix {
 public:
  static constexpr int kRows = 4;

  explicit RealDataMatrix(Eigen::MatrixXd values);

  int samples() const { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXd& values() const { return values_; }
  operator const Eigen::MatrixXd&() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

/// z = matrix * (x - mean), matrix = D^{-1/2} E^T over the kept eigenpairs of
/// the sample covariance (1/M normalisation).
struct WhiteningTransform {
  Eigen::VectorXd mean;
  Eigen::MatrixXd matrix;       ///< kept_dims x d
  Eigen::MatrixXd dewhitening;  ///< d x kept_dims, E D^{1/2}
  Eigen::VectorXd eigenvalues;  ///< all eigenvalues, descending
  int kept_dims = 0;
  /// Non-empty when eigen-directions were dropped for rank deficiency.
  std::string warning;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  /// Whitened-space row w_z such that w_z . z = w_obs . (x - mean) on the
  /// fitted data.
  Eigen::VectorXd to_whitened_row(const Eigen::VectorXd& w_obs) const;
};

struct WhitenedData {
  Eigen::MatrixXd z;
  WhiteningTransform transform;
};

/// Centers each row and whitens. Eigenvalues below rank_tol * lambda_max are
/// dropped. Throws on fewer than 8 columns, non-finite or all-zero input, or
/// an effective rank below 2.
WhitenedData center_and_whiten(const Eigen::MatrixXd& x, double rank_tol = 1e-10);

/// Largest absolute entry of cov(z) - I.
double whiteness_error(const Eigen::MatrixXd& z);

struct FicaOptions {
  int max_iter = 200;
  double tol = 1e-6;
};

/// Extracted unit rows in whitened space, one per component.
struct DemixingRows {
  Eigen::MatrixXd rows;  ///< n_components x d
  std::vector<int> iterations;
  std::vector<bool> converged;

  bool all_converged() const;
};

struct ContrastValues {
  Eigen::ArrayXd g;
  Eigen::ArrayXd dg;
};

/// g(u) = tanh(u), g'(u) = 1 - tanh(u)^2, elementwise.
ContrastValues contrast_tanh(const Eigen::ArrayXd& u);

/// One-unit FastICA with deflation. For each component, starting from the
/// matching row of w_init, iterates
///   w+ = E[z g(w.z)] - E[g'(w.z)] w
/// followed by Gram-Schmidt against `fixed_rows` and earlier components and
/// renormalisation, until |<w+, w>| > 1 - tol or max_iter.
///
/// `fixed_rows` are known unit rows (already orthonormal) that every
/// component is kept orthogonal to; pass an empty matrix for plain deflation.
DemixingRows deflation_fica(const Eigen::MatrixXd& z, int n_components,
                            const Eigen::MatrixXd& w_init, const FicaOptions& options = {},
                            const Eigen::MatrixXd& fixed_rows = Eigen::MatrixXd());

/// Orthonormalises rows in order (modified Gram-Schmidt, two passes).
Eigen::MatrixXd orthonormalize_rows(const Eigen::MatrixXd& rows);

}  // namespace fdsic
