#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "invsel/estimator.hpp"
#include "invsel/rng.hpp"

namespace invsel {

enum class CoolingSchedule {
  Log,  // T(r) = 1 / (1 + ln r)
};

struct SAConfig {
  long r_max = 100'000;
  std::uint64_t seed = 0;
  /// Upper bound on the size of the starting model; unset means floor(n / ln p).
  std::optional<int> init_size_cap;
  CoolingSchedule cooling = CoolingSchedule::Log;
  int record_tail = 50;
};

struct SATrace {
  Model best_model;
  double best_objective = 0.0;
  /// Last `record_tail` distinct accepted states, most recent first. The
  /// starting model counts as accepted.
  std::vector<Model> visited_tail;
  long acceptance_count = 0;
  long rejected_size_cap = 0;
  long rejected_rank_deficient = 0;
  double min_objective = 0.0;
  double final_objective = 0.0;
  long iterations = 0;
};

double temperature(long r, CoolingSchedule schedule = CoolingSchedule::Log);

/// Starting-model weights p(j) proportional to exp(<psi_j, y>^2 - c ||psi_j||^2)
/// with c = sum <psi_j, y>^2 / sum ||psi_j||^2, normalized to sum to one.
Vector initial_proposal_distribution(const DualDictionary& dual, const Vector& y);

/// min{1, exp(-(obj_new - obj_cur) / T)}.
double acceptance_probability(double obj_new, double obj_cur, double temperature);

/// Draws `size` distinct indices, each step proportional to the remaining
/// weights (uniform over the rest if they all underflow). Draw order is kept.
std::vector<int> draw_without_replacement(const Vector& weights, int size, Rng& rng);

Model sample_without_replacement(const Vector& weights, int size, Rng& rng);

/// Simulated annealing over models with single-index toggle proposals.
/// Proposals breaking the size cap, the Frobenius cap, or the rank condition
/// are rejected without moving; the temperature still advances.
SATrace run_sa(const Observation& obs, const Dictionary& dict, const DualDictionary& dual, const PenaltyRule& pen,
               const ModelSpace& space, const SAConfig& cfg);

/// Same chain on a prebuilt problem.
SATrace run_sa(const SelectionProblem& problem, const Vector& y, const ModelSpace& space, const SAConfig& cfg);

}  // namespace invsel
