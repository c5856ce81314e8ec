#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace invsel {

/// Outcome of one numbered acceptance check. `measured` is compared against
/// `threshold` in the direction the check documents; `seconds` is wall time.
struct CheckResult {
  int criterion = 0;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  double seconds = 0.0;
  std::string detail;
};

/// "PASS [3] name: measured=... threshold=... (1.2 s) detail"
std::string format_check(const CheckResult& r);

// Each check draws its random instances from the given seed.

/// Lemma 3 identity and the two argmin forms of the selection criterion,
/// 100 instances, n = 32, K = 20 models. Max deviation <= 1e-10, < 10 s.
CheckResult check_exact_identities(std::uint64_t seed);
/// Frobenius and spectral subadditivity over unions, 100 pairs, n = 32, p = 48.
CheckResult check_subadditivity(std::uint64_t seed);
/// Monte Carlo mean of ||f_hat_M - f||^2 against bias^2 + variance,
/// n = 16, |M| = 3, 10,000 draws, within 3 standard errors, < 30 s.
CheckResult check_risk_decomposition(std::uint64_t seed);
/// Frequency of max_j (psi_j^T eps)^2 / (2 sigma^2 ||psi_j||^2) > 2 ln p over
/// 10,000 draws at n = 16, p = 24, against sqrt(2/pi)/p + 3 SE.
CheckResult check_tail_bound(std::uint64_t seed);
/// High-probability oracle inequality for exhaustive penalized selection,
/// n = 16, p = 24, delta = 1, a = 1/2, r = 4, 1,000 replicates, < 5 min.
CheckResult check_selection_oracle_inequality(std::uint64_t seed);
/// Sharp oracle inequality for Q-aggregation over every model of the same
/// space, 1,000 replicates.
CheckResult check_aggregation_oracle_inequality(std::uint64_t seed);
/// Simulated annealing finds the exhaustive minimizer at n = 8, p = 12,
/// cap 3, r_max = 20,000 in >= 90 of 100 runs, < 1 min.
CheckResult check_sa_recovery(std::uint64_t seed);
/// Simplex solver against a step-1e-3 grid on 20 random K = 3 sets.
CheckResult check_q_solver(std::uint64_t seed);
/// Lasso KKT residual <= 1e-6 on 20 instances and the orthonormal closed form
/// to 1e-10.
CheckResult check_lasso(std::uint64_t seed);

/// Criteria 1 to 9 in order.
std::vector<CheckResult> invariant_suite(std::uint64_t seed);

}  // namespace invsel
