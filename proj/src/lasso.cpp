#include "invsel/lasso.hpp"

#include <algorithm>
#include <cmath>

namespace invsel {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

LassoSolver::LassoSolver(const Dictionary& dict, const DualDictionary& dual)
    : dict_(&dict), dual_(&dual), gram_(dict.phi().transpose() * dict.phi()), weights_(dual.atom_variances) {
  if (weights_.size() != dict.p()) throw Error(ErrorKind::DimensionMismatch, "dual dictionary size differs");
}

Vector LassoSolver::correlations(const Vector& y) const {
  if (y.size() != dual_->psi.rows()) throw Error(ErrorKind::DimensionMismatch, "y and dual atoms differ in length");
  return dual_->psi.transpose() * y;
}

double LassoSolver::objective(const Vector& b, double lambda, const Vector& theta) const {
  return theta.dot(gram_ * theta) - 2.0 * theta.dot(b) + lambda * weights_.dot(theta.cwiseAbs());
}

double LassoSolver::kkt_violation(const Vector& b, double lambda, const Vector& theta) const {
  const Vector grad = 2.0 * (gram_ * theta - b);
  double worst = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    const double pen = lambda * weights_[j];
    double v = 0.0;
    if (theta[j] != 0.0) {
      v = std::abs(grad[j] + pen * (theta[j] > 0.0 ? 1.0 : -1.0));
    } else {
      v = std::max(0.0, std::abs(grad[j]) - pen);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

LassoFit LassoSolver::fit(const Vector& b, double lambda, double tol, long max_sweeps, const Vector* warm_start) const {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
  const Index p = gram_.rows();
  if (b.size() != p) throw Error(ErrorKind::DimensionMismatch, "correlation vector length differs from p");

  Vector theta = Vector::Zero(p);
  if (warm_start) {
    if (warm_start->size() != p) throw Error(ErrorKind::DimensionMismatch, "warm start length differs from p");
    theta = *warm_start;
  }
  Vector g_theta = gram_ * theta;

  LassoFit out;
  out.lambda = lambda;
  for (long sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double curv = gram_(j, j);
      const double rho = b[j] - (g_theta[j] - curv * theta[j]);
      const double next = soft_threshold(rho, 0.5 * lambda * weights_[j]) / curv;
      const double delta = next - theta[j];
      if (delta != 0.0) {
        g_theta += delta * gram_.col(j);
        theta[j] = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    out.iterations = sweep;
    if (max_change <= tol) {
      out.converged = true;
      break;
    }
  }

  out.coefficients = theta;
  for (Index j = 0; j < p; ++j) {
    if (theta[j] != 0.0) out.support.push_back(static_cast<int>(j));
  }
  out.fitted = dict_->phi() * theta;
  out.kkt_violation = kkt_violation(b, lambda, theta);
  return out;
}

LassoFit fit_lasso(const Vector& y, const Dictionary& dict, const DualDictionary& dual, double lambda, double tol,
                   long max_sweeps) {
  const LassoSolver solver(dict, dual);
  return solver.fit(solver.correlations(y), lambda, tol, max_sweeps);
}

int support_size(const LassoFit& fit) {
  int count = 0;
  for (Index j = 0; j < fit.coefficients.size(); ++j) count += fit.coefficients[j] != 0.0;
  return count;
}

}  // namespace invsel
