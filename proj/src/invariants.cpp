#include "invsel/invariants.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "invsel/aggregate.hpp"
#include "invsel/dictionary.hpp"
#include "invsel/estimator.hpp"
#include "invsel/lasso.hpp"
#include "invsel/operator.hpp"
#include "invsel/rng.hpp"
#include "invsel/search.hpp"

namespace invsel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Vector gaussian(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

Dictionary random_dictionary(Index n, Index p, Rng& rng) {
  Matrix cols(n, p);
  for (Index j = 0; j < p; ++j) cols.col(j) = gaussian(n, rng);
  return build_custom_dictionary(cols);
}

Model random_model(int p, int min_size, int max_size, Rng& rng) {
  std::uniform_int_distribution<int> size_dist(min_size, max_size);
  std::vector<int> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(size_dist(rng)));
  return Model(all);
}

Vector random_simplex(Index k, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(k);
  for (Index i = 0; i < k; ++i) w[i] = expo(rng);
  return w / w.sum();
}

Observation noisy_observation(const ForwardOperator& op, const Vector& f, double sigma, Rng& rng) {
  return back_transform(op, op.apply(f) + sigma * gaussian(op.rows(), rng), sigma);
}

// Binomial standard error evaluated at the bound itself.
double binomial_se(double p0, int draws) { return std::sqrt(p0 * (1.0 - p0) / draws); }

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

// Shared instance of criteria 5 and 6: exponential operator n = 16, random
// 24-atom dictionary, r = 4 (models up to size 2), delta = 1.
struct OracleSetting {
  static constexpr Index kN = 16;
  static constexpr Index kP = 24;
  static constexpr int kR = 4;
  static constexpr double kDelta = 1.0;
  static constexpr int kReplicates = 1000;

  ForwardOperator op;
  Dictionary dict;
  DualDictionary dual;
  ModelSpace space;
  double nu_sq;
  Vector truth;
  double sigma;

  explicit OracleSetting(Rng& rng)
      : op(build_exponential_operator(kN)),
        dict(random_dictionary(kN, kP, rng)),
        dual(build_dual(dict, op)),
        space{static_cast<int>(kP), kR / 2, std::nullopt},
        nu_sq(estimate_nu_sq(dict, kR, binomial(kP, kR)).nu_sq_lower),
        truth(dict.column(3) + 0.7 * dict.column(11) + 0.05 * gaussian(kN, rng)),
        sigma(0.1 * truth.norm() / std::sqrt(static_cast<double>(kN))) {}

  // min over the space of bias^2(M) + c sigma^2 ||Psi_M||_F^2 ln p.
  double oracle_bound(double c) const {
    const RiskProblem risk(op, dict, truth, sigma);
    const double log_p = std::log(static_cast<double>(kP));
    double best = std::numeric_limits<double>::infinity();
    for_each_model(space.p, space.size_cap, [&](const Model& m) {
      const auto r = risk.risk(m);
      if (!r) return;
      best = std::min(best, r->bias_sq + c * sigma * sigma * risk.frobenius_sq(m) * log_p);
    });
    return best;
  }

  std::vector<Model> all_models() const {
    std::vector<Model> out;
    for_each_model(space.p, space.size_cap, [&](const Model& m) { out.push_back(m); });
    return out;
  }
};

}  // namespace

std::string format_check(const CheckResult& r) {
  std::ostringstream s;
  s << (r.passed ? "PASS" : "FAIL") << " [" << r.criterion << "] " << r.name << ": measured=" << fmt(r.measured)
    << " threshold=" << fmt(r.threshold) << " (" << fmt(r.seconds) << " s)";
  if (!r.detail.empty()) s << ' ' << r.detail;
  return s.str();
}

CheckResult check_exact_identities(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {1}));
  const Index n = 32;
  const Index p = 48;
  const int k = 20;
  const ForwardOperator op = build_exponential_operator(n);
  double lemma3 = 0.0;
  double two_form = 0.0;
  int argmin_mismatch = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const Dictionary dict = random_dictionary(n, p, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Vector f = dict.column(0) + dict.column(1);
    const Observation obs = noisy_observation(op, f, 0.02, rng);
    const PenaltyRule pen = PenaltyRule::make(obs.sigma, 0.5, p);
    std::vector<ProjectionFit> fits;
    std::set<Model> seen;
    while (static_cast<int>(fits.size()) < k) {
      Model m = random_model(static_cast<int>(p), 1, 6, rng);
      if (seen.insert(m).second) fits.push_back(fit_projection(obs, dict, dual, m, pen));
    }
    const Vector theta = random_simplex(k, rng);
    const Vector f_tilde = gaussian(n, rng);
    Vector f_theta = Vector::Zero(n);
    for (int i = 0; i < k; ++i) f_theta += theta[i] * fits[static_cast<std::size_t>(i)].fitted;
    double lhs = 0.0;
    double spread = 0.0;
    for (int i = 0; i < k; ++i) {
      const Vector& fi = fits[static_cast<std::size_t>(i)].fitted;
      lhs += theta[i] * (f_tilde - fi).squaredNorm();
      spread += theta[i] * (f_theta - fi).squaredNorm();
    }
    lemma3 = std::max(lemma3, std::abs(lhs - (f_tilde - f_theta).squaredNorm() - spread));

    const double z_sq = obs.z.squaredNorm();
    std::size_t arg_pi = 0;
    std::size_t arg_emp = 0;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      const ProjectionFit& fit = fits[i];
      two_form = std::max(two_form, std::abs(fit.objective - (fit.empirical_risk + fit.penalty - z_sq)));
      if (fit.objective < fits[arg_pi].objective) arg_pi = i;
      if (fit.empirical_risk + fit.penalty < fits[arg_emp].empirical_risk + fits[arg_emp].penalty) arg_emp = i;
    }
    argmin_mismatch += arg_pi != arg_emp;
  }
  CheckResult r;
  r.criterion = 1;
  r.name = "exact identities (aggregation decomposition, two selection forms)";
  r.measured = std::max(lemma3, two_form);
  r.threshold = 1e-10;
  r.seconds = seconds_since(start);
  r.passed = r.measured <= r.threshold && argmin_mismatch == 0 && r.seconds < 10.0;
  r.detail = "decomposition=" + fmt(lemma3) + " two_form=" + fmt(two_form) +
             " argmin_mismatches=" + std::to_string(argmin_mismatch);
  return r;
}

CheckResult check_subadditivity(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {2}));
  const Index n = 32;
  const Index p = 48;
  const ForwardOperator op = build_exponential_operator(n);
  const Dictionary dict = random_dictionary(n, p, rng);
  const DualDictionary dual = build_dual(dict, op);
  auto lambda_max = [&](const Model& m) {
    const Matrix psi = detail::columns(dual.psi, m.indices());
    Eigen::SelfAdjointEigenSolver<Matrix> es(psi.transpose() * psi, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };
  double min_frob = std::numeric_limits<double>::infinity();
  double min_spec = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 100; ++t) {
    const Model m1 = random_model(static_cast<int>(p), 1, 8, rng);
    const Model m2 = random_model(static_cast<int>(p), 1, 8, rng);
    std::vector<int> u = m1.indices();
    u.insert(u.end(), m2.indices().begin(), m2.indices().end());
    const Model uni(u);
    min_frob = std::min(min_frob, frobenius_sq(dual, m1) + frobenius_sq(dual, m2) - frobenius_sq(dual, uni));
    min_spec = std::min(min_spec, 2.0 * (lambda_max(m1) + lambda_max(m2)) - lambda_max(uni));
  }
  CheckResult r;
  r.criterion = 2;
  r.name = "subadditivity over model unions";
  r.measured = std::min(min_frob, min_spec);
  r.threshold = -1e-10;
  r.seconds = seconds_since(start);
  r.passed = r.measured >= r.threshold;
  r.detail = "min_frobenius_slack=" + fmt(min_frob) + " min_spectral_slack=" + fmt(min_spec);
  return r;
}

CheckResult check_risk_decomposition(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {3}));
  const Index n = 16;
  const ForwardOperator op = build_exponential_operator(n);
  const Dictionary dict = random_dictionary(n, 24, rng);
  const DualDictionary dual = build_dual(dict, op);
  const Model model({2, 9, 17});
  const Vector f = dict.column(2) - 0.5 * dict.column(9) + 0.3 * gaussian(n, rng) / std::sqrt(static_cast<double>(n));
  const double sigma = 0.05;
  const RiskReport risk = exact_risk(op, dict, f, sigma, model);
  const PenaltyRule pen = PenaltyRule::make(sigma, 1.0, dict.p());
  const int draws = 10'000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Observation obs = noisy_observation(op, f, sigma, rng);
    const double loss = (fit_projection(obs, dict, dual, model, pen).fitted - f).squaredNorm();
    sum += loss;
    sum_sq += loss * loss;
  }
  const double mean = sum / draws;
  const double var = (sum_sq - draws * mean * mean) / (draws - 1);
  const double se = std::sqrt(var / draws);
  CheckResult r;
  r.criterion = 3;
  r.name = "risk decomposition by Monte Carlo";
  r.measured = std::abs(mean - risk.total);
  r.threshold = 3.0 * se;
  r.seconds = seconds_since(start);
  r.passed = r.measured <= r.threshold && r.seconds < 30.0;
  r.detail = "mc_mean=" + fmt(mean) + " bias_sq=" + fmt(risk.bias_sq) + " variance=" + fmt(risk.variance) +
             " se=" + fmt(se);
  return r;
}

CheckResult check_tail_bound(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {4}));
  const Index n = 16;
  const Index p = 24;
  const ForwardOperator op = build_exponential_operator(n);
  const Dictionary dict = random_dictionary(n, p, rng);
  const DualDictionary dual = build_dual(dict, op);
  const double sigma = 1.0;
  const double log_p = std::log(static_cast<double>(p));
  const double x = log_p;
  const int draws = 10'000;
  int violations = 0;
  for (int d = 0; d < draws; ++d) {
    const Vector eps = sigma * gaussian(n, rng);
    const Vector proj = dual.psi.transpose() * eps;
    // The supremum over models is positive iff one atom's term is.
    bool violated = false;
    for (Index j = 0; j < p; ++j) {
      if (proj[j] * proj[j] > 2.0 * sigma * sigma * dual.atom_variances[j] * (log_p + x)) violated = true;
    }
    violations += violated;
  }
  const double bound = std::sqrt(2.0 / std::numbers::pi) * std::exp(-x);
  CheckResult r;
  r.criterion = 4;
  r.name = "noise tail bound";
  r.measured = static_cast<double>(violations) / draws;
  r.threshold = bound + 3.0 * binomial_se(bound, draws);
  r.seconds = seconds_since(start);
  r.passed = r.measured <= r.threshold;
  r.detail = "violations=" + std::to_string(violations) + "/" + std::to_string(draws) + " bound=" + fmt(bound);
  return r;
}

CheckResult check_selection_oracle_inequality(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng setup(derive_seed(seed, {5}));
  const OracleSetting s(setup);
  Rng rng(derive_seed(seed, {5, 1}));
  const double a = 0.5;
  const double lambda = PenaltyRule::lambda_from_theory(a, OracleSetting::kDelta, s.nu_sq);
  // Pen(M) = 4 sigma^2 lambda ln p ||Psi_M||^2, scaled by (a^2 + a + 4) / (2 (1 + a)).
  const double c = 4.0 * lambda * (a * a + a + 4.0) / (2.0 * (1.0 + a));
  const double rhs = (1.0 + a) / (1.0 - a) * s.oracle_bound(c);
  int violations = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < OracleSetting::kReplicates; ++t) {
    const Observation obs = noisy_observation(s.op, s.truth, s.sigma, rng);
    const SelectionProblem problem(obs, s.dict, s.dual, PenaltyRule::make(s.sigma, lambda, OracleSetting::kP));
    const auto [model, objective] = exhaustive_selection(problem, s.space);
    const double loss = (problem.fit(model).fitted - s.truth).squaredNorm();
    worst_ratio = std::max(worst_ratio, loss / rhs);
    violations += loss > rhs;
  }
  const double bound = std::sqrt(2.0 / std::numbers::pi) * std::pow(static_cast<double>(OracleSetting::kP),
                                                                    -OracleSetting::kDelta);
  CheckResult r;
  r.criterion = 5;
  r.name = "selection oracle inequality";
  r.measured = static_cast<double>(violations) / OracleSetting::kReplicates;
  r.threshold = bound + 3.0 * binomial_se(bound, OracleSetting::kReplicates);
  r.seconds = seconds_since(start);
  r.passed = r.measured <= r.threshold && r.seconds < 300.0;
  r.detail = "nu_sq=" + fmt(s.nu_sq) + " lambda=" + fmt(lambda) + " worst_loss/bound=" + fmt(worst_ratio);
  return r;
}

CheckResult check_aggregation_oracle_inequality(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng setup(derive_seed(seed, {5}));
  const OracleSetting s(setup);
  Rng rng(derive_seed(seed, {6, 1}));
  const double lambda_q = (OracleSetting::kDelta + 1.0) / s.nu_sq;
  const double rhs = s.oracle_bound(10.0 * lambda_q);
  const std::vector<Model> models = s.all_models();
  int violations = 0;
  int unconverged = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < OracleSetting::kReplicates; ++t) {
    const Observation obs = noisy_observation(s.op, s.truth, s.sigma, rng);
    const SelectionProblem problem(obs, s.dict, s.dual, PenaltyRule::make(s.sigma, lambda_q, OracleSetting::kP));
    const CandidateSet cand = make_candidate_set(problem, models);
    const SimplexWeights w = solve_weights(cand, obs.z);
    unconverged += !w.converged;
    const double loss = (aggregate_estimate(cand, w) - s.truth).squaredNorm();
    worst_ratio = std::max(worst_ratio, loss / rhs);
    violations += loss > rhs;
  }
  const double bound = std::sqrt(2.0 / std::numbers::pi) * std::pow(static_cast<double>(OracleSetting::kP),
                                                                    -OracleSetting::kDelta);
  CheckResult r;
  r.criterion = 6;
  r.name = "aggregation sharp oracle inequality";
  r.measured = static_cast<double>(violations) / OracleSetting::kReplicates;
  r.threshold = bound + 3.0 * binomial_se(bound, OracleSetting::kReplicates);
  r.seconds = seconds_since(start);
  r.passed = r.measured <= r.threshold;
  r.detail = "candidates=" + std::to_string(models.size()) + " nu_sq=" + fmt(s.nu_sq) +
             " worst_loss/bound=" + fmt(worst_ratio) + " unconverged=" + std::to_string(unconverged);
  return r;
}

CheckResult check_sa_recovery(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {7}));
  const Index n = 8;
  const Index p = 12;
  const ForwardOperator op = build_exponential_operator(n);
  const Dictionary dict = random_dictionary(n, p, rng);
  const DualDictionary dual = build_dual(dict, op);
  const ModelSpace space{static_cast<int>(p), 3, std::nullopt};
  const Vector truth = dict.column(5);
  const double sigma = 0.02;
  int hits = 0;
  for (int run = 0; run < 100; ++run) {
    const Observation obs = noisy_observation(op, truth, sigma, rng);
    const SelectionProblem problem(obs, dict, dual, PenaltyRule::make(sigma, 1.0, p));
    const auto [best, best_obj] = exhaustive_selection(problem, space);
    SAConfig cfg;
    cfg.r_max = 20'000;
    cfg.seed = derive_seed(seed, {7, static_cast<std::uint64_t>(run)});
    const SATrace trace = run_sa(problem, obs.y, space, cfg);
    hits += trace.best_model == best || trace.best_objective <= best_obj;
  }
  CheckResult r;
  r.criterion = 7;
  r.name = "annealing finds the exhaustive minimizer";
  r.measured = hits;
  r.threshold = 90;
  r.seconds = seconds_since(start);
  r.passed = hits >= 90 && r.seconds < 60.0;
  r.detail = "hits=" + std::to_string(hits) + "/100";
  return r;
}

CheckResult check_q_solver(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {8}));
  const Index n = 16;
  const ForwardOperator op = build_exponential_operator(n);
  double worst = 0.0;
  int unconverged = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Dictionary dict = random_dictionary(n, 10, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Observation obs = noisy_observation(op, dict.column(0) + dict.column(1), 0.05, rng);
    const SelectionProblem problem(obs, dict, dual, PenaltyRule::make(obs.sigma, 0.5, dict.p()));
    std::set<Model> models;
    while (models.size() < 3) models.insert(random_model(10, 1, 4, rng));
    const CandidateSet cand = make_candidate_set(problem, std::vector<Model>(models.begin(), models.end()));
    const SimplexWeights w = solve_weights(cand, obs.z);
    unconverged += !w.converged;
    const int steps = 1000;
    double grid_min = std::numeric_limits<double>::infinity();
    Vector theta(3);
    for (int i = 0; i <= steps; ++i) {
      for (int j = 0; i + j <= steps; ++j) {
        theta << i, j, steps - i - j;
        theta /= steps;
        grid_min = std::min(grid_min, q_objective(cand, obs.z, theta));
      }
    }
    worst = std::max(worst, std::abs(w.objective_value - grid_min));
  }
  CheckResult r;
  r.criterion = 8;
  r.name = "simplex solver against grid search";
  r.measured = worst;
  r.threshold = 1e-6;
  r.seconds = seconds_since(start);
  r.passed = worst <= r.threshold && unconverged == 0;
  r.detail = "unconverged=" + std::to_string(unconverged);
  return r;
}

CheckResult check_lasso(std::uint64_t seed) {
  const auto start = Clock::now();
  Rng rng(derive_seed(seed, {9}));
  const Index n = 16;
  const ForwardOperator op = build_exponential_operator(n);
  double worst_kkt = 0.0;
  int unconverged = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const Dictionary dict = random_dictionary(n, 24, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Observation obs = noisy_observation(op, dict.column(0) - dict.column(7), 0.05, rng);
    const LassoSolver solver(dict, dual);
    const Vector b = solver.correlations(obs.y);
    const double lambda_max = (2.0 * b.cwiseAbs().cwiseQuotient(dual.atom_variances)).maxCoeff();
    const double lambda = lambda_max * std::uniform_real_distribution<double>(0.02, 0.5)(rng);
    const LassoFit fit = solver.fit(b, lambda);
    unconverged += !fit.converged;
    worst_kkt = std::max(worst_kkt, fit.kkt_violation);
  }

  // A = I with an orthonormal dictionary decouples the coordinates.
  const ForwardOperator id = build_from_matrix(Matrix::Identity(n, n));
  const Eigen::HouseholderQR<Matrix> qr(Matrix::NullaryExpr(n, n, [&] {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
  }));
  const Dictionary ortho = build_custom_dictionary(qr.householderQ() * Matrix::Identity(n, n));
  const DualDictionary ortho_dual = build_dual(ortho, id);
  const Vector y = gaussian(n, rng);
  const double lambda = 0.8;
  const LassoFit fit = fit_lasso(y, ortho, ortho_dual, lambda);
  double closed_form = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double expected = soft_threshold(ortho.column(j).dot(y), lambda / 2.0);
    closed_form = std::max(closed_form, std::abs(fit.coefficients[j] - expected));
  }

  CheckResult r;
  r.criterion = 9;
  r.name = "lasso optimality certificate and closed form";
  r.measured = worst_kkt;
  r.threshold = 1e-6;
  r.seconds = seconds_since(start);
  r.passed = worst_kkt <= 1e-6 && closed_form <= 1e-10 && unconverged == 0;
  r.detail = "closed_form_error=" + fmt(closed_form) + " unconverged=" + std::to_string(unconverged);
  return r;
}

std::vector<CheckResult> invariant_suite(std::uint64_t seed) {
  return {check_exact_identities(seed),
          check_subadditivity(seed),
          check_risk_decomposition(seed),
          check_tail_bound(seed),
          check_selection_oracle_inequality(seed),
          check_aggregation_oracle_inequality(seed),
          check_sa_recovery(seed),
          check_q_solver(seed),
          check_lasso(seed)};
}

}  // namespace invsel
