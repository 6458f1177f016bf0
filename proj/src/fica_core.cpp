#include "fdsic/fica_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fdsic {

namespace {

constexpr double kWhitenedCheck = 1e-6;

// Removes the projection of w onto each row of `basis`; two passes keep the
// Gram matrix at identity to ~1e-15 even for nearly dependent inputs.
void project_out(Eigen::VectorXd& w, const Eigen::MatrixXd& basis, Eigen::Index count) {
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index r = 0; r < count; ++r) {
      const Eigen::VectorXd b = basis.row(r).transpose();
      w -= w.dot(b) * b;
    }
}

}  // namespace

RealDataMatrix::RealDataMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != kRows) throw Error("lifted data must have exactly 4 rows");
  if (values_.cols() < kRows) throw Error("lifted data needs at least 4 observations");
}

Eigen::MatrixXd WhiteningTransform::apply(const Eigen::MatrixXd& x) const {
  return matrix * (x.colwise() - mean);
}

Eigen::VectorXd WhiteningTransform::to_whitened_row(const Eigen::VectorXd& w_obs) const {
  return dewhitening.transpose() * w_obs;
}

WhitenedData center_and_whiten(const Eigen::MatrixXd& x, double rank_tol) {
  if (x.cols() < 8) throw Error("whitening needs at least 8 observations");
  if (!x.allFinite()) throw Error("whitening input has non-finite entries");
  if (x.cwiseAbs().maxCoeff() == 0.0) throw Error("whitening input is all zero");

  const auto d = x.rows();
  const double m = static_cast<double>(x.cols());
  WhiteningTransform t;
  t.mean = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - t.mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / m;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");
  // Descending order.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  // Fix each eigenvector's sign (largest entry positive) so the whitened
  // coordinates do not depend on the solver's arbitrary choice.
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index r = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&r);
    if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
  }
  t.eigenvalues = values;

  const double lambda_max = values(0);
  if (!(lambda_max > 0.0)) throw Error("whitening input has zero variance");
  int kept = 0;
  while (kept < d && values(kept) > rank_tol * lambda_max) ++kept;
  if (kept < 2) throw Error("effective rank " + std::to_string(kept) + " is below 2");
  t.kept_dims = kept;
  if (kept < d)
    t.warning = "dropped " + std::to_string(d - kept) + " of " + std::to_string(d) +
                " dimensions below relative eigenvalue " + std::to_string(rank_tol);

  const Eigen::MatrixXd e = vectors.leftCols(kept);
  const Eigen::VectorXd l = values.head(kept);
  t.matrix = l.cwiseSqrt().cwiseInverse().asDiagonal() * e.transpose();
  t.dewhitening = e * l.cwiseSqrt().asDiagonal();

  WhitenedData out;
  out.z = t.matrix * centered;
  out.transform = std::move(t);
  return out;
}

double whiteness_error(const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd centered = z.colwise() - z.rowwise().mean();
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(z.cols());
  return (cov - Eigen::MatrixXd::Identity(z.rows(), z.rows())).cwiseAbs().maxCoeff();
}

bool DemixingRows::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

ContrastValues contrast_tanh(const Eigen::ArrayXd& u) {
  ContrastValues out;
  out.g = u.tanh();
  out.dg = 1.0 - out.g.square();
  return out;
}

Eigen::MatrixXd orthonormalize_rows(const Eigen::MatrixXd& rows) {
  Eigen::MatrixXd out = rows;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::VectorXd w = rows.row(r).transpose();
    project_out(w, out, r);
    const double norm = w.norm();
    if (norm < 1e-12) throw Error("rows are linearly dependent");
    out.row(r) = (w / norm).transpose();
  }
  return out;
}

DemixingRows deflation_fica(const Eigen::MatrixXd& z, int n_components,
                            const Eigen::MatrixXd& w_init, const FicaOptions& options,
                            const Eigen::MatrixXd& fixed_rows) {
  const auto d = z.rows();
  const auto n_fixed = fixed_rows.rows();
  if (n_components < 1) throw Error("need at least one component");
  if (n_components + n_fixed > d)
    throw Error("requested " + std::to_string(n_components) + " components (+" +
                std::to_string(n_fixed) + " fixed) exceed the whitened rank " + std::to_string(d));
  if (w_init.rows() < n_components || w_init.cols() != d)
    throw Error("initial rows do not match the whitened dimension");
  if (n_fixed > 0 && fixed_rows.cols() != d) throw Error("fixed rows do not match the whitened dimension");
  if (whiteness_error(z) > kWhitenedCheck) throw Error("input is not whitened");

  // Rows [fixed..., extracted...]; Gram-Schmidt runs against everything above.
  Eigen::MatrixXd basis(n_fixed + n_components, d);
  if (n_fixed > 0) basis.topRows(n_fixed) = fixed_rows;

  DemixingRows out;
  out.rows.resize(n_components, d);
  const double m = static_cast<double>(z.cols());

  for (int p = 0; p < n_components; ++p) {
    const Eigen::Index row = n_fixed + p;
    Eigen::VectorXd w = w_init.row(p).transpose();
    project_out(w, basis, row);
    if (w.norm() < 1e-8) {
      // Initial row lies in the span of earlier rows; start from the first
      // canonical direction that does not.
      for (Eigen::Index i = 0; i < d; ++i) {
        w = Eigen::VectorXd::Unit(d, i);
        project_out(w, basis, row);
        if (w.norm() > 1e-3) break;
      }
    }
    w.normalize();

    bool converged = false;
    int it = 0;
    while (it < options.max_iter) {
      ++it;
      const Eigen::ArrayXd u = (w.transpose() * z).transpose().array();
      const ContrastValues c = contrast_tanh(u);
      Eigen::VectorXd next = z * c.g.matrix() / m - c.dg.mean() * w;
      project_out(next, basis, row);
      const double norm = next.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) break;
      next /= norm;
      const double overlap = std::abs(next.dot(w));
      w = next;
      if (overlap > 1.0 - options.tol) {
        converged = true;
        break;
      }
    }
    basis.row(row) = w.transpose();
    out.rows.row(p) = w.transpose();
    out.iterations.push_back(it);
    out.converged.push_back(converged);
  }
  return out;
}

}  // namespace fdsic
