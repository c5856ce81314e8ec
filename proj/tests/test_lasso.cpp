#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "invsel/lasso.hpp"

using namespace invsel;

namespace {

// Accelerated proximal gradient on the same objective.
Vector fista(const Matrix& gram, const Vector& b, const Vector& w, double lambda, int iters) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double step = 1.0 / (2.0 * eig.eigenvalues().maxCoeff());
  Vector x = Vector::Zero(b.size());
  Vector yk = x;
  double t = 1.0;
  for (int it = 0; it < iters; ++it) {
    const Vector grad = 2.0 * (gram * yk - b);
    Vector next = yk - step * grad;
    for (Index j = 0; j < next.size(); ++j) next[j] = soft_threshold(next[j], step * lambda * w[j]);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yk = next + ((t - 1.0) / t_next) * (next - x);
    x = next;
    t = t_next;
  }
  return x;
}

}  // namespace

TEST_SUITE("lasso") {
  TEST_CASE("soft threshold") {
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-1.0, 1.0) == 0.0);
  }

  TEST_CASE("large lambda gives the zero solution") {
    Rng rng(81);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 10, rng);
    const DualDictionary dual = build_dual(dict, op);
    const LassoSolver solver(dict, dual);
    const Vector b = solver.correlations(testing::gaussian(16, rng));
    const double lambda_max = (2.0 * b.cwiseAbs().array() / solver.weights().array()).maxCoeff();
    CHECK(support_size(solver.fit(b, lambda_max * 1.0001)) == 0);
    CHECK(support_size(solver.fit(b, lambda_max)) == 0);
    CHECK(support_size(solver.fit(b, lambda_max * 0.99)) >= 1);
    CHECK_THROWS_AS(solver.fit(b, 0.0), Error);
  }

  TEST_CASE("orthonormal dictionary has a closed form") {
    Rng rng(82);
    const Dictionary dict = build_custom_dictionary(testing::random_orthogonal(12, rng));
    const ForwardOperator id = build_from_matrix(Matrix::Identity(12, 12));
    const DualDictionary dual = build_dual(dict, id);
    const Vector y = testing::gaussian(12, rng);
    for (double lambda : {0.1, 0.5, 1.0, 2.0}) {
      const LassoFit fit = fit_lasso(y, dict, dual, lambda);
      CHECK(fit.converged);
      for (Index j = 0; j < 12; ++j) {
        const double expected = soft_threshold(dict.column(j).dot(y), 0.5 * lambda);
        CHECK(std::abs(fit.coefficients[j] - expected) <= 1e-12);
      }
    }
  }

  TEST_CASE("agrees with accelerated proximal gradient") {
    for (std::uint64_t seed : {83u, 84u, 85u}) {
      Rng rng(seed);
      const ForwardOperator op = build_exponential_operator(16);
      const Dictionary dict = testing::random_dictionary(16, 6, rng);
      const DualDictionary dual = build_dual(dict, op);
      const LassoSolver solver(dict, dual);
      const Vector b = solver.correlations(op.apply(dict.column(2) - dict.column(4)) + 0.1 * testing::gaussian(16, rng));
      for (double lambda : {0.05, 0.3, 1.0}) {
        const LassoFit fit = solver.fit(b, lambda, 1e-12);
        const Vector ref = fista(solver.gram(), b, solver.weights(), lambda, 200'000);
        CHECK((fit.coefficients - ref).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(solver.objective(b, lambda, fit.coefficients) <= solver.objective(b, lambda, ref) + 1e-10);
      }
    }
  }

  TEST_CASE("objective decreases with sweeps and KKT holds at convergence") {
    Rng rng(86);
    const ForwardOperator op = build_exponential_operator(32);
    const Dictionary dict = testing::random_dictionary(32, 50, rng);
    const DualDictionary dual = build_dual(dict, op);
    const LassoSolver solver(dict, dual);
    const Vector b = solver.correlations(testing::gaussian(32, rng));
    const double lambda = 0.2;
    double previous = solver.objective(b, lambda, Vector::Zero(50));
    for (long sweeps = 1; sweeps <= 30; ++sweeps) {
      const LassoFit partial = solver.fit(b, lambda, 0.0, sweeps);
      const double value = solver.objective(b, lambda, partial.coefficients);
      CHECK(value <= previous + 1e-12);
      previous = value;
    }
    const LassoFit full = solver.fit(b, lambda, 1e-10, 200'000);
    CHECK(full.converged);
    CHECK(full.kkt_violation <= 1e-6);
    CHECK(full.kkt_violation == doctest::Approx(solver.kkt_violation(b, lambda, full.coefficients)));
    CHECK(support_size(full) == static_cast<int>(full.support.size()));
    CHECK((full.fitted - dict.phi() * full.coefficients).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("warm start reaches the same solution") {
    Rng rng(87);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 20, rng);
    const DualDictionary dual = build_dual(dict, op);
    const LassoSolver solver(dict, dual);
    const Vector b = solver.correlations(testing::gaussian(16, rng));
    const LassoFit cold = solver.fit(b, 0.3, 1e-11, 200'000);
    const LassoFit start = solver.fit(b, 1.0, 1e-11, 200'000);
    const LassoFit warm = solver.fit(b, 0.3, 1e-11, 200'000, &start.coefficients);
    CHECK(std::abs(solver.objective(b, 0.3, cold.coefficients) - solver.objective(b, 0.3, warm.coefficients)) <= 1e-9);
  }

  TEST_CASE("support shrinks along a decreasing penalty path in an orthonormal basis") {
    Rng rng(88);
    const Dictionary dict = build_custom_dictionary(testing::random_orthogonal(16, rng));
    const ForwardOperator id = build_from_matrix(Matrix::Identity(16, 16));
    const DualDictionary dual = build_dual(dict, id);
    const Vector y = testing::gaussian(16, rng);
    int previous = 0;
    for (double lambda : {5.0, 2.0, 1.0, 0.5, 0.1, 0.01}) {
      const int size = support_size(fit_lasso(y, dict, dual, lambda));
      CHECK(size >= previous);
      previous = size;
    }
  }
}
