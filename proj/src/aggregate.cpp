#include "invsel/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace invsel {

namespace {

constexpr double kWeightFloor = 1e-12;
constexpr long kResidualRefresh = 64;

void check_z(const CandidateSet& cand, const Vector& z) {
  if (cand.size() < 1) throw Error(ErrorKind::InvalidArgument, "candidate set is empty");
  if (z.size() != cand.fitted_matrix.rows()) throw Error(ErrorKind::DimensionMismatch, "z and candidate fits differ in length");
}

void check_weights(const CandidateSet& cand, const Vector& w) {
  if (w.size() != cand.size()) throw Error(ErrorKind::DimensionMismatch, "weight vector length differs from K");
  if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-8) {
    throw Error(ErrorKind::InvalidArgument, "weights are not on the simplex");
  }
}

}  // namespace

CandidateSet make_candidate_set(std::vector<ProjectionFit> fits, const Vector& z, const PenaltyRule& q_penalty) {
  if (fits.empty()) throw Error(ErrorKind::InvalidArgument, "candidate set is empty");
  std::set<Model> seen;
  for (const auto& f : fits) {
    if (!seen.insert(f.model).second) throw Error(ErrorKind::InvalidArgument, "repeated candidate " + to_string(f.model));
    if (f.fitted.size() != z.size()) throw Error(ErrorKind::DimensionMismatch, "candidate fit and z differ in length");
  }
  CandidateSet cand;
  const Index k = static_cast<Index>(fits.size());
  cand.fitted_matrix.resize(z.size(), k);
  cand.linear_costs.resize(k);
  for (Index i = 0; i < k; ++i) {
    const auto& f = fits[static_cast<std::size_t>(i)];
    cand.fitted_matrix.col(i) = f.fitted;
    cand.linear_costs[i] = (z - f.fitted).squaredNorm() + 2.0 * penalty(q_penalty, f.frobenius_sq);
  }
  cand.fits = std::move(fits);
  return cand;
}

CandidateSet make_candidate_set(const SelectionProblem& problem, const std::vector<Model>& models) {
  std::vector<ProjectionFit> fits;
  fits.reserve(models.size());
  for (const auto& m : models) fits.push_back(problem.fit(m));
  return make_candidate_set(std::move(fits), problem.z(), problem.penalty_rule());
}

double q_objective(const CandidateSet& cand, const Vector& z, const Vector& weights) {
  check_z(cand, z);
  check_weights(cand, weights);
  return weights.dot(cand.linear_costs) + (z - cand.fitted_matrix * weights).squaredNorm();
}

SimplexWeights solve_weights(const CandidateSet& cand, const Vector& z, double tol, long max_iter) {
  check_z(cand, z);
  const Index k = cand.size();
  const Matrix& f = cand.fitted_matrix;
  const Vector& g = cand.linear_costs;

  // Start at the best vertex.
  Index start = 0;
  {
    double best = 0.0;
    for (Index i = 0; i < k; ++i) {
      const double v = g[i] + (z - f.col(i)).squaredNorm();
      if (i == 0 || v < best) {
        best = v;
        start = i;
      }
    }
  }
  Vector theta = Vector::Zero(k);
  theta[start] = 1.0;
  Vector residual = z - f.col(start);

  SimplexWeights out;
  out.converged = false;
  Vector grad(k);
  long iter = 0;
  for (;; ++iter) {
    if (iter % kResidualRefresh == 0) residual = z - f * theta;
    grad = g - 2.0 * (f.transpose() * residual);

    Index toward = 0;
    grad.minCoeff(&toward);
    Index away = -1;
    for (Index i = 0; i < k; ++i) {
      if (theta[i] > 0.0 && (away < 0 || grad[i] > grad[away])) away = i;
    }
    out.gap = grad.dot(theta) - grad[toward];
    if (out.gap <= tol) {
      out.converged = true;
      break;
    }
    if (iter >= max_iter) break;

    // Move mass from the away vertex to the toward vertex:
    //   q(theta + s (e_t - e_a)) = q + s (grad_t - grad_a) + s^2 ||f_t - f_a||^2.
    const Vector diff = f.col(toward) - f.col(away);
    const double slope = grad[toward] - grad[away];
    const double curvature = diff.squaredNorm();
    const double s_max = theta[away];
    double s = s_max;
    if (curvature > 0.0) s = std::min(s_max, -slope / (2.0 * curvature));
    if (!(s > 0.0)) {
      // Pairwise direction stalled (toward == away or rounding); nothing
      // more can be gained along it.
      out.converged = out.gap <= tol;
      break;
    }
    theta[toward] += s;
    theta[away] -= s;
    if (s == s_max) theta[away] = 0.0;
    residual -= s * diff;
  }

  // Clean tiny weights.
  for (Index i = 0; i < k; ++i) {
    if (theta[i] < kWeightFloor) theta[i] = 0.0;
  }
  theta /= theta.sum();
  residual = z - f * theta;
  grad = g - 2.0 * (f.transpose() * residual);

  out.weights = theta;
  out.objective_value = theta.dot(g) + residual.squaredNorm();
  out.gap = grad.dot(theta) - grad.minCoeff();
  out.iterations = iter;
  return out;
}

Vector aggregate_estimate(const CandidateSet& cand, const SimplexWeights& weights) {
  if (weights.weights.size() != cand.size()) throw Error(ErrorKind::DimensionMismatch, "weight vector length differs from K");
  return cand.fitted_matrix * weights.weights;
}

SimplexWeights model_selection_as_aggregation(const CandidateSet& cand, const Vector& z) {
  check_z(cand, z);
  Index best = 0;
  double best_value = 0.0;
  for (Index i = 0; i < cand.size(); ++i) {
    const auto& fit = cand.fits[static_cast<std::size_t>(i)];
    const double v = (z - fit.fitted).squaredNorm() + fit.penalty;
    if (i == 0 || v < best_value ||
        (v == best_value && precedes(fit.model, cand.fits[static_cast<std::size_t>(best)].model))) {
      best = i;
      best_value = v;
    }
  }
  SimplexWeights out;
  out.weights = Vector::Zero(cand.size());
  out.weights[best] = 1.0;
  out.objective_value = best_value;
  out.gap = 0.0;
  return out;
}

}  // namespace invsel
