#ifndef PANELITE_LINALG_HPP
#define PANELITE_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <string>

#include "panelite/errors.hpp"

namespace panelite {

struct LeastSquaresSolution {
  Eigen::VectorXd coef;
  // Extreme singular values of the design; the normal matrix A'A that an
  // explicit-inverse route would invert has singular values smin^2, smax^2.
  double smin = 0.0;
  double smax = 0.0;
};

// Relative singularity cutoff for the implicitly inverted A'A:
// machine epsilon x max dimension x largest singular value.
inline bool normal_matrix_singular(double smin, double smax,
                                   Eigen::Index rows, Eigen::Index cols) {
  const double dim = static_cast<double>(std::max(rows, cols));
  const double tol = std::numeric_limits<double>::epsilon() * dim;
  return smin * smin <= tol * smax * smax;
}

// Minimum-norm solve of min ||A x - b|| via SVD. Throws SingularityError when
// A'A is singular beyond tolerance.
inline LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& a,
                                                const Eigen::VectorXd& b,
                                                const std::string& context) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU |
                                               Eigen::ComputeThinV);
  LeastSquaresSolution out;
  const auto& sigma = svd.singularValues();
  out.smax = sigma.size() ? sigma(0) : 0.0;
  out.smin = sigma.size() ? sigma(sigma.size() - 1) : 0.0;
  if (a.rows() < a.cols() ||
      normal_matrix_singular(out.smin, out.smax, a.rows(), a.cols())) {
    throw SingularityError(context + ": singular beyond tolerance",
                           out.smin * out.smin, out.smax * out.smax);
  }
  out.coef = svd.solve(b);
  return out;
}

// Cholesky factor L with W = L L'. W must be symmetric positive definite.
inline Eigen::MatrixXd spd_cholesky(const Eigen::MatrixXd& w,
                                    const std::string& context) {
  if (w.rows() != w.cols()) {
    throw ValidationError(context + ": weight matrix must be square");
  }
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ValidationError(context + ": weight matrix must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(w);
  if (llt.info() != Eigen::Success) {
    throw ValidationError(context + ": weight matrix must be positive definite");
  }
  return llt.matrixL();
}

}  // namespace panelite

#endif  // PANELITE_LINALG_HPP
