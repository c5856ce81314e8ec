#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "helpers.hpp"
#include "invsel/estimator.hpp"

using namespace invsel;

namespace {

Matrix columns_of(const Dictionary& dict, const Model& m) {
  Matrix out(dict.n(), m.size());
  for (int k = 0; k < m.size(); ++k) out.col(k) = dict.column(m.indices()[static_cast<std::size_t>(k)]);
  return out;
}

// Explicit hat matrix; only for small test instances.
Matrix hat(const Dictionary& dict, const Model& m) {
  if (m.empty()) return Matrix::Zero(dict.n(), dict.n());
  const Matrix phi = columns_of(dict, m);
  return phi * (phi.transpose() * phi).inverse() * phi.transpose();
}

Model random_model(int p, int max_size, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(std::uniform_int_distribution<int>(1, max_size)(rng)));
  return Model(all);
}

}  // namespace

TEST_SUITE("estimator") {
  TEST_CASE("model normalizes its indices") {
    const Model m({5, 1, 5, 3});
    CHECK(m.indices() == std::vector<int>{1, 3, 5});
    CHECK(m.size() == 3);
    CHECK(m.contains(3));
    CHECK_FALSE(m.contains(2));
    CHECK(m.toggled(3).indices() == std::vector<int>{1, 5});
    CHECK(m.toggled(0).indices() == std::vector<int>{0, 1, 3, 5});
    CHECK(to_string(m) == "{2,4,6}");
    CHECK(to_string(Model()) == "{}");
    CHECK(precedes(Model({7}), Model({0, 1})));
    CHECK(precedes(Model({0, 2}), Model({0, 3})));
    CHECK_FALSE(precedes(Model({0, 3}), Model({0, 3})));
  }

  TEST_CASE("penalty formula") {
    PenaltyRule pen{1.0, 1.0, 1.0};
    CHECK(penalty(pen, 0.0) == 0.0);
    CHECK(penalty(pen, 1.0) == doctest::Approx(4.0));
    const PenaltyRule made = PenaltyRule::make(0.5, 2.0, 10);
    CHECK(made.log_p == doctest::Approx(std::log(10.0)));
    CHECK(penalty(made, 3.0) == doctest::Approx(4.0 * 0.25 * 2.0 * std::log(10.0) * 3.0));
    CHECK(PenaltyRule::lambda_from_theory(0.5, 1.0, 0.25) == doctest::Approx(16.0));
    CHECK_THROWS_AS(penalty(pen, -1.0), Error);
  }

  TEST_CASE("penalty is additive over disjoint models") {
    Rng rng(31);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 20, rng);
    const DualDictionary dual = build_dual(dict, op);
    const PenaltyRule pen = PenaltyRule::make(0.3, 1.7, dict.p());
    const Model m1({0, 4, 9});
    const Model m2({2, 11});
    const Model both({0, 2, 4, 9, 11});
    CHECK(penalty(pen, frobenius_sq(dual, both)) ==
          doctest::Approx(penalty(pen, frobenius_sq(dual, m1)) + penalty(pen, frobenius_sq(dual, m2))));
  }

  TEST_CASE("frobenius_sq") {
    Rng rng(32);
    const Dictionary dict = testing::random_dictionary(6, 9, rng);
    const DualDictionary id = build_dual(dict, build_from_matrix(Matrix::Identity(6, 6)));
    CHECK(frobenius_sq(id, Model()) == 0.0);
    CHECK(frobenius_sq(id, Model({0, 3, 8})) == doctest::Approx(3.0));
    try {
      frobenius_sq(id, Model({9}));
      FAIL("index accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::IndexOutOfRange);
    }
  }

  TEST_CASE("empty model fit") {
    Rng rng(33);
    const ForwardOperator op = build_exponential_operator(8);
    const Dictionary dict = testing::random_dictionary(8, 10, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Observation obs = back_transform(op, testing::gaussian(8, rng), 0.2);
    const ProjectionFit fit = fit_projection(obs, dict, dual, Model(), PenaltyRule::make(0.2, 1.0, 10));
    CHECK(fit.fitted == Vector::Zero(8));
    CHECK(fit.penalty == 0.0);
    CHECK(fit.objective == 0.0);
    CHECK(fit.empirical_risk == doctest::Approx(obs.z.squaredNorm()));
  }

  TEST_CASE("orthonormal dictionary with identity operator gives inner products") {
    Rng rng(34);
    const Dictionary dict = build_custom_dictionary(testing::random_orthogonal(10, rng));
    const ForwardOperator id = build_from_matrix(Matrix::Identity(10, 10));
    const DualDictionary dual = build_dual(dict, id);
    const Vector y = testing::gaussian(10, rng);
    const Observation obs = back_transform(id, y, 1.0);
    for (int j : {0, 4, 9}) {
      const ProjectionFit fit = fit_projection(obs, dict, dual, Model({j}), PenaltyRule::make(1.0, 1.0, 10));
      CHECK(fit.coefficients[0] == doctest::Approx(dict.column(j).dot(y)).epsilon(1e-12));
    }
  }

  TEST_CASE("projection invariants") {
    Rng rng(35);
    const ForwardOperator op = build_exponential_operator(32);
    const Dictionary dict = testing::random_dictionary(32, 48, rng);
    const DualDictionary dual = build_dual(dict, op);
    const PenaltyRule pen = PenaltyRule::make(0.1, 1.3, dict.p());
    for (int t = 0; t < 20; ++t) {
      const Observation obs = back_transform(op, testing::gaussian(32, rng), 0.1);
      const Model m = random_model(48, 6, rng);
      const ProjectionFit fit = fit_projection(obs, dict, dual, m, pen);

      CHECK((fit.fitted - columns_of(dict, m) * fit.coefficients).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(fit.objective - (fit.empirical_risk + fit.penalty - obs.z.squaredNorm())) <= 1e-8);
      // <z, f_hat> = ||f_hat||^2 for an orthogonal projection.
      CHECK(std::abs(obs.z.dot(fit.fitted) - fit.fitted.squaredNorm()) <= 1e-8);

      Observation again = obs;
      again.z = fit.fitted;
      const ProjectionFit refit = fit_projection(again, dict, dual, m, pen);
      CHECK((refit.fitted - fit.fitted).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("rank deficient models are rejected") {
    Rng rng(36);
    Matrix cols = testing::gaussian(8, 4, rng);
    cols.col(3) = cols.col(0);
    const Dictionary dict = build_custom_dictionary(cols);
    const ForwardOperator op = build_exponential_operator(8);
    const DualDictionary dual = build_dual(dict, op);
    const Observation obs = back_transform(op, testing::gaussian(8, rng), 0.1);
    try {
      fit_projection(obs, dict, dual, Model({0, 3}), PenaltyRule::make(0.1, 1.0, 4));
      FAIL("rank deficient model accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::RankDeficientModel);
    }
    const SelectionProblem problem(obs, dict, dual, PenaltyRule::make(0.1, 1.0, 4));
    CHECK_FALSE(problem.objective(Model({0, 3})).has_value());
    CHECK(problem.objective(Model({0, 2})).has_value());
  }

  TEST_CASE("selection problem agrees with fit_projection") {
    Rng rng(37);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 24, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Observation obs = back_transform(op, testing::gaussian(16, rng), 0.3);
    const PenaltyRule pen = PenaltyRule::make(0.3, 0.8, dict.p());
    const SelectionProblem problem(obs, dict, dual, pen);
    for (int t = 0; t < 20; ++t) {
      const Model m = random_model(24, 5, rng);
      const ProjectionFit fit = fit_projection(obs, dict, dual, m, pen);
      CHECK(*problem.objective(m) == doctest::Approx(fit.objective).epsilon(1e-10));
      CHECK((problem.fit(m).fitted - fit.fitted).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("exact risk examples") {
    Rng rng(38);
    const ForwardOperator op = build_exponential_operator(12);
    const Dictionary dict = testing::random_dictionary(12, 15, rng);
    const Vector f = testing::gaussian(12, rng);
    const RiskReport empty = exact_risk(op, dict, f, 0.4, Model());
    CHECK(empty.bias_sq == doctest::Approx(f.squaredNorm()));
    CHECK(empty.variance == 0.0);

    const Dictionary ortho = build_custom_dictionary(testing::random_orthogonal(12, rng));
    const ForwardOperator id = build_from_matrix(Matrix::Identity(12, 12));
    const Model m({1, 5, 7});
    const Vector in_span = 2.0 * ortho.column(1) - ortho.column(7);
    const RiskReport r = exact_risk(id, ortho, in_span, 0.5, m);
    CHECK(std::abs(r.bias_sq) <= 1e-20);
    CHECK(r.variance == doctest::Approx(0.25 * 3));
    CHECK(r.total == doctest::Approx(r.bias_sq + r.variance));
  }

  TEST_CASE("exact risk matches explicit matrices") {
    Rng rng(39);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 20, rng);
    const Matrix gram_inv = (op.matrix().transpose() * op.matrix()).inverse();
    const Vector f = testing::gaussian(16, rng);
    for (int t = 0; t < 10; ++t) {
      const Model m = random_model(20, 5, rng);
      const Matrix h = hat(dict, m);
      const RiskReport r = exact_risk(op, dict, f, 0.7, m);
      CHECK(r.bias_sq == doctest::Approx((h * f - f).squaredNorm()).epsilon(1e-9));
      CHECK(r.variance == doctest::Approx(0.49 * (gram_inv * h).trace()).epsilon(1e-8));
    }
  }

  TEST_CASE("exact risk matches a Monte Carlo mean") {
    Rng rng(40);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 24, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Model m({3, 8, 20});
    const Vector f = dict.column(3) + 0.2 * testing::gaussian(16, rng);
    const double sigma = 0.05;
    const RiskReport r = exact_risk(op, dict, f, sigma, m);
    const PenaltyRule pen = PenaltyRule::make(sigma, 1.0, 24);
    const int draws = 10'000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int d = 0; d < draws; ++d) {
      const Observation obs = back_transform(op, op.apply(f) + sigma * testing::gaussian(16, rng), sigma);
      const double loss = (fit_projection(obs, dict, dual, m, pen).fitted - f).squaredNorm();
      sum += loss;
      sum_sq += loss * loss;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum_sq / draws - mean * mean) / (draws - 1));
    CHECK(std::abs(mean - r.total) <= 3.0 * se);
  }

  TEST_CASE("adding an atom never increases the bias") {
    Rng rng(41);
    const ForwardOperator op = build_exponential_operator(16);
    const Dictionary dict = testing::random_dictionary(16, 24, rng);
    const Vector f = testing::gaussian(16, rng);
    for (int t = 0; t < 30; ++t) {
      const Model m = random_model(24, 6, rng);
      int extra = 0;
      while (m.contains(extra)) ++extra;
      const double before = exact_risk(op, dict, f, 1.0, m).bias_sq;
      const double after = exact_risk(op, dict, f, 1.0, m.toggled(extra)).bias_sq;
      CHECK(after <= before + 1e-10);
    }
  }

  TEST_CASE("oracle search examples") {
    Rng rng(42);
    const ForwardOperator op = build_exponential_operator(8);
    const Dictionary dict = testing::random_dictionary(8, 12, rng);
    const ModelSpace space{12, 3, std::nullopt};

    const auto [model, risk] = oracle_search(op, dict, dict.column(0), 1e-6, space);
    CHECK(model == Model({0}));

    const Vector f = testing::gaussian(8, rng);
    const auto [m2, r2] = oracle_search(op, dict, f, 0.3, space);
    CHECK(r2.total <= f.squaredNorm() + 1e-12);

    try {
      oracle_search(build_exponential_operator(64), build_paper_dictionary(64), Vector::Ones(64), 0.1, ModelSpace{128, 10, std::nullopt});
      FAIL("huge space accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SpaceTooLarge);
    }
  }

  TEST_CASE("oracle search equals brute force over all 299 models") {
    Rng rng(43);
    const ForwardOperator op = build_exponential_operator(8);
    const Dictionary dict = testing::random_dictionary(8, 12, rng);
    const Matrix gram_inv = (op.matrix().transpose() * op.matrix()).inverse();
    for (int t = 0; t < 5; ++t) {
      const Vector f = dict.column(2) + 0.5 * dict.column(7) + 0.1 * testing::gaussian(8, rng);
      const double sigma = 0.05 * (t + 1);
      double best = std::numeric_limits<double>::infinity();
      Model best_model;
      int count = 0;
      for (unsigned mask = 0; mask < (1u << 12); ++mask) {
        if (std::popcount(mask) > 3) continue;
        ++count;
        std::vector<int> idx;
        for (int j = 0; j < 12; ++j) {
          if (mask & (1u << j)) idx.push_back(j);
        }
        const Model m(idx);
        const Matrix h = hat(dict, m);
        const double total = (h * f - f).squaredNorm() + sigma * sigma * (gram_inv * h).trace();
        if (total < best - 1e-12 || (std::abs(total - best) <= 1e-12 && precedes(m, best_model))) {
          best = total;
          best_model = m;
        }
      }
      CHECK(count == 299);
      CHECK(count_models(12, 3) == 299);
      const auto [model, risk] = oracle_search(op, dict, f, sigma, ModelSpace{12, 3, std::nullopt});
      CHECK(model == best_model);
      CHECK(risk.total == doctest::Approx(best).epsilon(1e-9));
    }
  }

  TEST_CASE("gamma filter restricts the oracle") {
    Rng rng(44);
    const ForwardOperator op = build_exponential_operator(8);
    const Dictionary dict = testing::random_dictionary(8, 10, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Vector f = dict.column(1) + dict.column(4);
    const double gamma = std::sqrt(dual.atom_variances.minCoeff() / 8.0) * 0.999;
    const auto [model, risk] = oracle_search(op, dict, f, 0.1, ModelSpace{10, 3, gamma});
    CHECK(model.empty());
  }

  TEST_CASE("model enumeration order") {
    std::vector<Model> seen;
    for_each_model(4, 2, [&](const Model& m) { seen.push_back(m); });
    REQUIRE(seen.size() == 11);
    CHECK(seen[0].empty());
    CHECK(seen[1] == Model({0}));
    CHECK(seen[5] == Model({0, 1}));
    CHECK(seen[10] == Model({2, 3}));
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(precedes(seen[i - 1], seen[i]));
  }

  TEST_CASE("two forms of the selection criterion pick the same model") {
    Rng rng(45);
    const ForwardOperator op = build_exponential_operator(8);
    const Dictionary dict = testing::random_dictionary(8, 10, rng);
    const DualDictionary dual = build_dual(dict, op);
    const Observation obs = back_transform(op, op.apply(dict.column(3)) + 0.05 * testing::gaussian(8, rng), 0.05);
    const SelectionProblem problem(obs, dict, dual, PenaltyRule::make(0.05, 1.0, 10));
    const ModelSpace space{10, 3, std::nullopt};
    const auto [selected, objective] = exhaustive_selection(problem, space);
    double best = std::numeric_limits<double>::infinity();
    Model best_model;
    for_each_model(10, 3, [&](const Model& m) {
      const ProjectionFit fit = problem.fit(m);
      const double crit = fit.empirical_risk + fit.penalty;
      if (crit < best) {
        best = crit;
        best_model = m;
      }
    });
    CHECK(selected == best_model);
    CHECK(objective == doctest::Approx(best - obs.z.squaredNorm()).epsilon(1e-10));
  }
}
