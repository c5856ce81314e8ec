#include "invsel/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace invsel {

double temperature(long r, CoolingSchedule schedule) {
  if (r < 1) throw Error(ErrorKind::InvalidArgument, "cooling schedule starts at r = 1");
  switch (schedule) {
    case CoolingSchedule::Log: return 1.0 / (1.0 + std::log(static_cast<double>(r)));
  }
  return 0.0;
}

Vector initial_proposal_distribution(const DualDictionary& dual, const Vector& y) {
  const Index p = dual.psi.cols();
  if (p < 1) throw Error(ErrorKind::InvalidArgument, "empty dictionary");
  if (y.size() != dual.psi.rows()) throw Error(ErrorKind::DimensionMismatch, "y and dual atoms differ in length");

  const Vector coef_sq = (dual.psi.transpose() * y).array().square();
  const double var_sum = dual.atom_variances.sum();
  const double c = var_sum > 0.0 ? coef_sq.sum() / var_sum : 0.0;
  Vector expo = coef_sq - c * dual.atom_variances;
  // The normalizing constant absorbs any common shift.
  expo.array() -= expo.maxCoeff();
  Vector w = expo.array().exp();
  return w / w.sum();
}

double acceptance_probability(double obj_new, double obj_cur, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
  const double delta = obj_new - obj_cur;
  if (delta <= 0.0) return 1.0;
  return std::exp(-delta / temperature);
}

std::vector<int> draw_without_replacement(const Vector& weights, int size, Rng& rng) {
  const Index p = weights.size();
  if (size < 0 || size > p) throw Error(ErrorKind::InvalidArgument, "cannot draw that many distinct indices");
  std::vector<double> w(weights.data(), weights.data() + p);
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    double total = 0.0;
    for (double v : w) total += v;
    int j = -1;
    if (total > 0.0) {
      std::discrete_distribution<int> draw(w.begin(), w.end());
      j = draw(rng);
    } else {
      // Remaining mass underflowed; fall back to uniform over what is left.
      std::vector<int> left;
      for (Index k = 0; k < p; ++k) {
        if (std::find(picked.begin(), picked.end(), static_cast<int>(k)) == picked.end()) left.push_back(static_cast<int>(k));
      }
      std::uniform_int_distribution<std::size_t> pick(0, left.size() - 1);
      j = left[pick(rng)];
    }
    picked.push_back(j);
    w[static_cast<std::size_t>(j)] = 0.0;
  }
  return picked;
}

Model sample_without_replacement(const Vector& weights, int size, Rng& rng) {
  return Model(draw_without_replacement(weights, size, rng));
}

SATrace run_sa(const Observation& obs, const Dictionary& dict, const DualDictionary& dual, const PenaltyRule& pen,
               const ModelSpace& space, const SAConfig& cfg) {
  const SelectionProblem problem(obs, dict, dual, pen);
  return run_sa(problem, obs.y, space, cfg);
}

SATrace run_sa(const SelectionProblem& problem, const Vector& y, const ModelSpace& space, const SAConfig& cfg) {
  if (cfg.r_max < 1 || cfg.record_tail < 1) throw Error(ErrorKind::InvalidArgument, "need r_max >= 1 and tail >= 1");
  if (cfg.init_size_cap && *cfg.init_size_cap < 1) throw Error(ErrorKind::InvalidArgument, "initial size cap must be >= 1");
  const int p = problem.p();
  if (space.p != p) throw Error(ErrorKind::DimensionMismatch, "model space and dictionary sizes differ");

  Rng rng(derive_seed(cfg.seed, {}));

  // Objective memo; NaN marks rejected (rank-deficient or over the
  // Frobenius cap) models.
  std::unordered_map<Model, double, ModelHash> memo;
  auto evaluate = [&](const Model& m) -> double {
    auto it = memo.find(m);
    if (it != memo.end()) return it->second;
    double value = std::numeric_limits<double>::quiet_NaN();
    if (space.admits_frobenius(problem.frobenius_sq(m), problem.n())) {
      if (auto obj = problem.objective(m)) value = *obj;
    }
    memo.emplace(m, value);
    return value;
  };

  // Starting model: m ~ Uniform{1..cap}, indices from the initial proposal
  // distribution without replacement. Trailing indices are dropped until the
  // model is admissible.
  const int default_cap =
      static_cast<int>(std::floor(static_cast<double>(problem.n()) / std::log(static_cast<double>(p))));
  const int init_cap = std::min({cfg.init_size_cap.value_or(std::max(1, default_cap)), space.size_cap, p});
  Model current;
  if (init_cap >= 1) {
    std::uniform_int_distribution<int> size_draw(1, init_cap);
    const int m = size_draw(rng);
    const Vector probs = initial_proposal_distribution(problem.dual(), y);
    std::vector<int> drawn = draw_without_replacement(probs, m, rng);
    while (!drawn.empty() && std::isnan(evaluate(Model(drawn)))) drawn.pop_back();
    current = Model(drawn);
  }
  double current_obj = evaluate(current);

  SATrace trace;
  trace.best_model = current;
  trace.best_objective = current_obj;
  trace.visited_tail.push_back(current);

  std::uniform_int_distribution<int> index_draw(0, p - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto tail_cap = static_cast<std::size_t>(cfg.record_tail);

  for (long r = 1; r <= cfg.r_max; ++r) {
    const double t = temperature(r, cfg.cooling);
    const int j = index_draw(rng);
    Model candidate = current.toggled(j);
    if (!space.admits_size(candidate)) {
      ++trace.rejected_size_cap;
      continue;
    }
    const double obj = evaluate(candidate);
    if (std::isnan(obj)) {
      ++trace.rejected_rank_deficient;
      continue;
    }
    const double a = acceptance_probability(obj, current_obj, t);
    if (a < 1.0 && !(unit(rng) < a)) continue;

    current = std::move(candidate);
    current_obj = obj;
    ++trace.acceptance_count;
    if (obj < trace.best_objective) {
      trace.best_objective = obj;
      trace.best_model = current;
    }
    auto& tail = trace.visited_tail;
    auto it = std::find(tail.begin(), tail.end(), current);
    if (it != tail.end()) tail.erase(it);
    tail.insert(tail.begin(), current);
    if (tail.size() > tail_cap) tail.pop_back();
  }

  trace.min_objective = trace.best_objective;
  trace.final_objective = current_obj;
  trace.iterations = cfg.r_max;
  return trace;
}

}  // namespace invsel
