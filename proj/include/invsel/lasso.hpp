#pragma once

#include <vector>

#include "invsel/dictionary.hpp"
#include "invsel/types.hpp"

namespace invsel {

struct LassoFit {
  Vector coefficients;
  std::vector<int> support;
  double lambda = 0.0;
  Vector fitted;
  long iterations = 0;
  bool converged = false;
  /// Largest violation of the subgradient optimality conditions.
  double kkt_violation = 0.0;
};

/// Weighted-l1 estimator minimizing
///   L(theta) = ||Phi theta||^2 - 2 theta^T b + lambda sum_j w_j |theta_j|,
/// with b_j = <y, psi_j> and w_j = ||psi_j||^2, by cyclic coordinate
/// descent with covariance updates. Phi^T Phi is cached, so one solver
/// serves a whole lambda grid.
class LassoSolver {
 public:
  /// The dictionary must outlive the solver.
  LassoSolver(const Dictionary& dict, const DualDictionary& dual);

  /// b = Psi^T y.
  Vector correlations(const Vector& y) const;

  LassoFit fit(const Vector& b, double lambda, double tol = 1e-8, long max_sweeps = 10'000,
               const Vector* warm_start = nullptr) const;

  double objective(const Vector& b, double lambda, const Vector& theta) const;

  /// max_j of the subgradient residual: for theta_j != 0,
  /// |2 (G theta)_j - 2 b_j + lambda w_j sign(theta_j)|, otherwise
  /// max(0, |2 (G theta)_j - 2 b_j| - lambda w_j).
  double kkt_violation(const Vector& b, double lambda, const Vector& theta) const;

  const Vector& weights() const noexcept { return weights_; }
  const Matrix& gram() const noexcept { return gram_; }

 private:
  const Dictionary* dict_;
  const DualDictionary* dual_;
  Matrix gram_;
  Vector weights_;
};

LassoFit fit_lasso(const Vector& y, const Dictionary& dict, const DualDictionary& dual, double lambda,
                   double tol = 1e-8, long max_sweeps = 10'000);

int support_size(const LassoFit& fit);

double soft_threshold(double x, double t);

}  // namespace invsel
