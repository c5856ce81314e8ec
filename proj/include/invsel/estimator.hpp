#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invsel/dictionary.hpp"
#include "invsel/operator.hpp"
#include "invsel/types.hpp"

namespace invsel {

/// A set of dictionary indices (0-based, sorted, no duplicates). The
/// indicator-diagonal D_M is implied by the index set.
class Model {
 public:
  Model() = default;
  /// Sorts and removes duplicates.
  explicit Model(std::vector<int> indices);

  const std::vector<int>& indices() const noexcept { return idx_; }
  int size() const noexcept { return static_cast<int>(idx_.size()); }
  bool empty() const noexcept { return idx_.empty(); }
  bool contains(int j) const;

  /// Adds j if absent, removes it otherwise.
  Model toggled(int j) const;

  friend bool operator==(const Model&, const Model&) = default;
  friend auto operator<=>(const Model&, const Model&) = default;

 private:
  std::vector<int> idx_;
};

/// Tie-break order: smaller model first, then lexicographic indices.
bool precedes(const Model& a, const Model& b);

/// "{1,4,9}" with 1-based indices.
std::string to_string(const Model& m);

struct ModelHash {
  std::size_t operator()(const Model& m) const noexcept;
};

/// Admissible models: |M| <= size_cap and, when gamma is set,
/// ||Psi_M||_F^2 <= gamma^2 n.
struct ModelSpace {
  int p = 0;
  int size_cap = 0;
  std::optional<double> gamma;

  bool admits_size(const Model& m) const noexcept { return m.size() <= size_cap; }
  bool admits_frobenius(double frobenius_sq, Index n) const noexcept {
    return !gamma || frobenius_sq <= (*gamma) * (*gamma) * static_cast<double>(n);
  }
};

/// Pen(M) = 4 sigma^2 lambda ln(p) ||Psi_M||_F^2.
struct PenaltyRule {
  double sigma = 0.0;
  double lambda = 1.0;
  double log_p = 0.0;

  static PenaltyRule make(double sigma, double lambda, Index p);

  /// lambda = (delta + 1) / (a nu_r^2), which turns the rule into the
  /// theoretical penalty with constants (a, delta, nu_r^2).
  static double lambda_from_theory(double a, double delta, double nu_sq);
};

double penalty(const PenaltyRule& pen, double frobenius_sq);

struct ProjectionFit {
  Model model;
  Vector coefficients;    // over model.indices(), in order
  Vector fitted;          // f_hat_M = Phi_M coefficients
  double frobenius_sq = 0.0;
  double penalty = 0.0;
  double objective = 0.0;       // -||f_hat_M||^2 + Pen(M)
  double empirical_risk = 0.0;  // ||z - f_hat_M||^2
};

struct RiskReport {
  double bias_sq = 0.0;
  double variance = 0.0;
  double total = 0.0;
};

/// Sum of atom variances over the model. Throws IndexOutOfRange.
double frobenius_sq(const DualDictionary& dual, const Model& model);

/// Projection of z onto span(Phi_M). The empty model fits 0. Throws
/// RankDeficientModel when Phi_M^T Phi_M is singular at relative tolerance
/// 1e-10.
ProjectionFit fit_projection(const Observation& obs, const Dictionary& dict, const DualDictionary& dual,
                             const Model& model, const PenaltyRule& pen);

/// Bias ||H_M f - f||^2 and variance sigma^2 Tr((A^T A)^{-1} H_M).
RiskReport exact_risk(const ForwardOperator& op, const Dictionary& dict, const Vector& truth, double sigma,
                      const Model& model);

/// Exhaustive minimizer of the exact risk over the model space. Throws
/// SpaceTooLarge beyond 1e7 models.
std::pair<Model, RiskReport> oracle_search(const ForwardOperator& op, const Dictionary& dict, const Vector& truth,
                                           double sigma, const ModelSpace& space);

/// Number of models of size <= cap over p atoms (saturating).
std::uint64_t count_models(int p, int cap);

inline constexpr std::uint64_t kMaxEnumeratedModels = 10'000'000;

/// Visits every model of size <= cap, by size, then lexicographically.
template <class Visitor>
void for_each_model(int p, int cap, Visitor&& visit) {
  std::vector<int> idx;
  for (int size = 0; size <= cap && size <= p; ++size) {
    idx.resize(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
      visit(Model(idx));
      int i = size - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == p - size + i) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (int t = i + 1; t < size; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
}

/// Cached quantities for evaluating pi(M) on one observation many times
/// (Gram matrix Phi^T Phi, Phi^T z, atom variances). The dictionary and dual
/// passed in must outlive the problem.
class SelectionProblem {
 public:
  SelectionProblem(const Observation& obs, const Dictionary& dict, const DualDictionary& dual, PenaltyRule pen);

  int p() const noexcept { return static_cast<int>(dict_->p()); }
  Index n() const noexcept { return dict_->n(); }
  const PenaltyRule& penalty_rule() const noexcept { return pen_; }
  const Vector& z() const noexcept { return z_; }
  const Dictionary& dictionary() const noexcept { return *dict_; }
  const DualDictionary& dual() const noexcept { return *dual_; }

  double frobenius_sq(const Model& m) const;

  /// pi(M) = -||f_hat_M||^2 + Pen(M); nullopt when M is rank deficient.
  std::optional<double> objective(const Model& m) const;

  ProjectionFit fit(const Model& m) const;

 private:
  const Dictionary* dict_;
  const DualDictionary* dual_;
  PenaltyRule pen_;
  Vector z_;
  Matrix gram_;
  Vector phit_z_;
};

/// Exhaustive minimizer of pi(M) over the admissible space (rank-deficient
/// models skipped). Ties: smaller model, then lexicographic.
std::pair<Model, double> exhaustive_selection(const SelectionProblem& problem, const ModelSpace& space);

/// Risk evaluation of many models against one known truth.
class RiskProblem {
 public:
  RiskProblem(const ForwardOperator& op, const Dictionary& dict, Vector truth, double sigma);

  double frobenius_sq(const Model& m) const;
  /// nullopt when M is rank deficient.
  std::optional<RiskReport> risk(const Model& m) const;
  /// Projection H_M f of the truth; f_M in the oracle inequalities.
  Vector project_truth(const Model& m) const;

 private:
  const Dictionary* dict_;
  Vector truth_;
  double sigma_;
  Matrix gram_;
  Matrix dual_gram_;  // Phi^T (A^T A)^{-1} Phi = Psi^T Psi
};

namespace detail {

/// Cholesky of a model Gram matrix, rejected when the smallest pivot falls
/// below 1e-10 times the largest diagonal entry.
std::optional<Eigen::LLT<Matrix>> factor_model_gram(const Matrix& gram);

Matrix submatrix(const Matrix& full, const std::vector<int>& idx);
Vector subvector(const Vector& full, const std::vector<int>& idx);
Matrix columns(const Matrix& full, const std::vector<int>& idx);

}  // namespace detail

}  // namespace invsel
