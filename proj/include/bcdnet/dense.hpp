#pragma once

#include <Eigen/Dense>

#include "mbir.hpp"
#include "projector.hpp"

namespace bcdnet {

inline Eigen::MatrixXd system_matrix_dense(const Geometry& g) {
  const std::vector<double> a = dense_system_matrix(g);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(a.data(), g.n_rays(), g.n_pixels());
}

namespace detail {
inline Eigen::MatrixXd weighted_gram(const Geometry& g, const StatWeights& w) {
  validate(g);
  require_match(g, w, "weighted_gram");
  const Eigen::MatrixXd a = system_matrix_dense(g);
  const Eigen::Map<const Eigen::VectorXd> wv(w.values.data(), w.values.size());
  return a.transpose() * wv.asDiagonal() * a;
}
}  // namespace detail

struct ExactSolveResult {
  Image solution;
  bool constraint_active = false;  // unconstrained optimum left the non-negative orthant
};

/// Direct solve of the unconstrained normal equations
/// (A^T W A + beta I) x = A^T W y + beta z for small problems (image at
/// most 16 x 16). When the solution is entrywise non-negative it is also
/// the constrained optimum; otherwise constraint_active is set and the
/// returned image is only the stationary point.
inline ExactSolveResult solve_exact_small(const MbirProblem& prob) {
  validate(prob);
  require(prob.geom.image_width <= 16 && prob.geom.image_height <= 16,
          "solve_exact_small: image larger than the 16 x 16 cap");
  const long n = prob.geom.n_pixels();
  Eigen::MatrixXd h = detail::weighted_gram(prob.geom, prob.weights);
  h.diagonal().array() += prob.beta;

  const Eigen::MatrixXd a = system_matrix_dense(prob.geom);
  const Eigen::Map<const Eigen::VectorXd> wv(prob.weights.values.data(),
                                             prob.weights.values.size());
  const Eigen::Map<const Eigen::VectorXd> y(prob.y.values.data(), prob.y.values.size());
  const Eigen::Map<const Eigen::VectorXd> z(prob.z.values.data(), prob.z.values.size());
  const Eigen::VectorXd rhs = a.transpose() * (wv.array() * y.array()).matrix() + prob.beta * z;

  const Eigen::VectorXd x = h.ldlt().solve(rhs);
  ExactSolveResult result;
  result.solution = Image(prob.geom.image_width, prob.geom.image_height, prob.geom.pixel_size);
  for (long i = 0; i < n; ++i) {
    result.solution.values[static_cast<std::size_t>(i)] = x[i];
    if (x[i] < 0.0) result.constraint_active = true;
  }
  return result;
}

/// Smallest eigenvalue of M - (A^T W A + beta I) for the diagonal majorizer
/// M = diag(A^T W A 1) + beta I. Non-negative (up to round-off) means M
/// dominates the curvature everywhere.
inline double majorizer_dominance_min_eig(const Geometry& g, const StatWeights& w, double beta) {
  require(beta > 0.0, "majorizer_dominance_min_eig: beta must be positive");
  Eigen::MatrixXd gap = -detail::weighted_gram(g, w);
  const MajorizerDiag m = build_majorizer(g, w, beta);
  for (long i = 0; i < g.n_pixels(); ++i) gap(i, i) += m.diag[static_cast<std::size_t>(i)] - beta;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gap, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Smallest eigenvalue of A^T W A, dense. Strictly positive means the
/// weighted data fit alone determines the image.
inline double gram_min_eigenvalue(const Geometry& g, const StatWeights& w) {
  const Eigen::MatrixXd gram = detail::weighted_gram(g, w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace bcdnet
