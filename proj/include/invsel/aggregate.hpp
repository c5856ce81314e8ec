#pragma once

#include <vector>

#include "invsel/estimator.hpp"

namespace invsel {

/// K candidate projection estimators with their fitted values stacked as
/// columns and the per-candidate linear cost
///   g_M = ||z - f_hat_M||^2 + 2 Pen_Q(M).
struct CandidateSet {
  std::vector<ProjectionFit> fits;
  Matrix fitted_matrix;
  Vector linear_costs;

  Index size() const noexcept { return static_cast<Index>(fits.size()); }
};

/// Point on the simplex over the candidates.
struct SimplexWeights {
  Vector weights;
  double objective_value = 0.0;
  double gap = 0.0;
  long iterations = 0;
  bool converged = true;
};

/// Builds the candidate set. `q_penalty` supplies Pen_Q; the linear cost uses
/// twice its value (the 8 sigma^2 lambda ln p ||Psi_M||_F^2 term). Throws
/// InvalidArgument for an empty list or repeated models.
CandidateSet make_candidate_set(std::vector<ProjectionFit> fits, const Vector& z, const PenaltyRule& q_penalty);

/// Fits every model on `problem` and builds the candidate set with the
/// problem's own penalty rule as Pen_Q.
CandidateSet make_candidate_set(const SelectionProblem& problem, const std::vector<Model>& models);

/// theta^T g + ||z - F theta||^2.
double q_objective(const CandidateSet& cand, const Vector& z, const Vector& weights);

/// Minimizes q_objective over the simplex with pairwise conditional-gradient
/// steps and exact line search. Stops once the conditional-gradient gap
///   max_k (theta - e_k)^T grad q(theta)
/// is <= tol. When max_iter is exhausted the weights are still returned with
/// converged = false. Weights below 1e-12 are zeroed and the rest renormalized.
SimplexWeights solve_weights(const CandidateSet& cand, const Vector& z, double tol = 1e-8, long max_iter = 10'000);

/// F theta.
Vector aggregate_estimate(const CandidateSet& cand, const SimplexWeights& weights);

/// The alpha = 1 member of the family: all weight on the candidate minimizing
/// ||z - f_hat_M||^2 + Pen(M) (ties: smaller model, then lexicographic).
SimplexWeights model_selection_as_aggregation(const CandidateSet& cand, const Vector& z);

}  // namespace invsel
