#include "invsel/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace invsel {

namespace detail {

constexpr double kRankTolerance = 1e-10;

std::optional<Eigen::LLT<Matrix>> factor_model_gram(const Matrix& gram) {
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const double largest = gram.diagonal().maxCoeff();
  const double smallest_pivot = llt.matrixLLT().diagonal().array().square().minCoeff();
  if (!(smallest_pivot >= kRankTolerance * largest)) return std::nullopt;
  return llt;
}

Matrix submatrix(const Matrix& full, const std::vector<int>& idx) {
  const Index k = static_cast<Index>(idx.size());
  Matrix out(k, k);
  for (Index b = 0; b < k; ++b) {
    for (Index a = 0; a < k; ++a) out(a, b) = full(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  }
  return out;
}

Vector subvector(const Vector& full, const std::vector<int>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out[static_cast<Index>(a)] = full[idx[a]];
  return out;
}

Matrix columns(const Matrix& full, const std::vector<int>& idx) {
  Matrix out(full.rows(), static_cast<Index>(idx.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) out.col(static_cast<Index>(a)) = full.col(idx[a]);
  return out;
}

}  // namespace detail

namespace {

void check_indices(const Model& m, Index p) {
  for (int j : m.indices()) {
    if (j < 0 || j >= p) {
      throw Error(ErrorKind::IndexOutOfRange, "atom index " + std::to_string(j + 1) + " outside 1.." + std::to_string(p));
    }
  }
}

[[noreturn]] void throw_rank_deficient(const Model& m) {
  throw Error(ErrorKind::RankDeficientModel, "Gram matrix of model " + to_string(m) + " is singular");
}

// bias^2 and variance of a model given its Gram matrix G = Phi_M^T Phi_M and
// W = Phi_M^T (A^T A)^{-1} Phi_M.
std::optional<RiskReport> risk_from_blocks(const Matrix& phi_m, const Matrix& gram, const Matrix& w,
                                           const Vector& truth, double sigma) {
  RiskReport rep;
  if (phi_m.cols() == 0) {
    rep.bias_sq = truth.squaredNorm();
    rep.total = rep.bias_sq;
    return rep;
  }
  const auto llt = detail::factor_model_gram(gram);
  if (!llt) return std::nullopt;
  const Vector theta = llt->solve(phi_m.transpose() * truth);
  rep.bias_sq = (truth - phi_m * theta).squaredNorm();
  // Tr((A^T A)^{-1} H_M) = Tr(G^{-1} W).
  rep.variance = sigma * sigma * llt->solve(w).trace();
  rep.total = rep.bias_sq + rep.variance;
  return rep;
}

}  // namespace

Model::Model(std::vector<int> indices) : idx_(std::move(indices)) {
  std::sort(idx_.begin(), idx_.end());
  idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
}

bool Model::contains(int j) const { return std::binary_search(idx_.begin(), idx_.end(), j); }

Model Model::toggled(int j) const {
  Model out;
  out.idx_ = idx_;
  auto it = std::lower_bound(out.idx_.begin(), out.idx_.end(), j);
  if (it != out.idx_.end() && *it == j) {
    out.idx_.erase(it);
  } else {
    out.idx_.insert(it, j);
  }
  return out;
}

bool precedes(const Model& a, const Model& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a.indices() < b.indices();
}

std::string to_string(const Model& m) {
  std::string s = "{";
  for (std::size_t i = 0; i < m.indices().size(); ++i) {
    if (i) s += ",";
    s += std::to_string(m.indices()[i] + 1);
  }
  return s + "}";
}

std::size_t ModelHash::operator()(const Model& m) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (int j : m.indices()) {
    h ^= static_cast<std::size_t>(j) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

PenaltyRule PenaltyRule::make(double sigma, double lambda, Index p) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be positive");
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  if (p < 1) throw Error(ErrorKind::InvalidArgument, "dictionary size must be positive");
  return PenaltyRule{sigma, lambda, std::log(static_cast<double>(p))};
}

double PenaltyRule::lambda_from_theory(double a, double delta, double nu_sq) {
  if (!(a > 0.0 && a < 1.0) || !(delta > 0.0) || !(nu_sq > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "need 0 < a < 1, delta > 0, nu_r^2 > 0");
  }
  return (delta + 1.0) / (a * nu_sq);
}

double penalty(const PenaltyRule& pen, double frobenius_sq) {
  if (!(frobenius_sq >= 0.0)) throw Error(ErrorKind::InvalidArgument, "Frobenius norm must be >= 0");
  return 4.0 * pen.sigma * pen.sigma * pen.lambda * pen.log_p * frobenius_sq;
}

double frobenius_sq(const DualDictionary& dual, const Model& model) {
  check_indices(model, dual.atom_variances.size());
  double s = 0.0;
  for (int j : model.indices()) s += dual.atom_variances[j];
  return s;
}

ProjectionFit fit_projection(const Observation& obs, const Dictionary& dict, const DualDictionary& dual,
                             const Model& model, const PenaltyRule& pen) {
  if (obs.z.size() != dict.n()) throw Error(ErrorKind::DimensionMismatch, "z and dictionary atoms differ in length");
  check_indices(model, dict.p());

  ProjectionFit fit;
  fit.model = model;
  fit.frobenius_sq = frobenius_sq(dual, model);
  fit.penalty = penalty(pen, fit.frobenius_sq);
  if (model.empty()) {
    fit.coefficients = Vector();
    fit.fitted = Vector::Zero(dict.n());
  } else {
    const Matrix phi_m = detail::columns(dict.phi(), model.indices());
    const auto llt = detail::factor_model_gram(phi_m.transpose() * phi_m);
    if (!llt) throw_rank_deficient(model);
    fit.coefficients = llt->solve(phi_m.transpose() * obs.z);
    fit.fitted = phi_m * fit.coefficients;
  }
  fit.empirical_risk = (obs.z - fit.fitted).squaredNorm();
  fit.objective = -fit.fitted.squaredNorm() + fit.penalty;
  return fit;
}

RiskReport exact_risk(const ForwardOperator& op, const Dictionary& dict, const Vector& truth, double sigma,
                      const Model& model) {
  if (truth.size() != dict.n() || dict.n() != op.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "truth, dictionary and operator dimensions differ");
  }
  check_indices(model, dict.p());
  const Matrix phi_m = detail::columns(dict.phi(), model.indices());
  const Matrix w = phi_m.transpose() * op.gram_solve(phi_m);
  const auto rep = risk_from_blocks(phi_m, phi_m.transpose() * phi_m, w, truth, sigma);
  if (!rep) throw_rank_deficient(model);
  return *rep;
}

std::uint64_t count_models(int p, int cap) {
  std::uint64_t total = 0;
  for (int k = 0; k <= cap && k <= p; ++k) {
    const std::uint64_t c = binomial(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(k));
    if (c > std::numeric_limits<std::uint64_t>::max() - total) return std::numeric_limits<std::uint64_t>::max();
    total += c;
  }
  return total;
}

RiskProblem::RiskProblem(const ForwardOperator& op, const Dictionary& dict, Vector truth, double sigma)
    : dict_(&dict), truth_(std::move(truth)), sigma_(sigma) {
  if (truth_.size() != dict.n() || dict.n() != op.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "truth, dictionary and operator dimensions differ");
  }
  gram_ = dict.phi().transpose() * dict.phi();
  dual_gram_ = dict.phi().transpose() * op.gram_solve(dict.phi());
}

double RiskProblem::frobenius_sq(const Model& m) const {
  double s = 0.0;
  for (int j : m.indices()) s += dual_gram_(j, j);
  return s;
}

std::optional<RiskReport> RiskProblem::risk(const Model& m) const {
  const Matrix phi_m = detail::columns(dict_->phi(), m.indices());
  return risk_from_blocks(phi_m, detail::submatrix(gram_, m.indices()), detail::submatrix(dual_gram_, m.indices()),
                          truth_, sigma_);
}

Vector RiskProblem::project_truth(const Model& m) const {
  if (m.empty()) return Vector::Zero(truth_.size());
  const Matrix phi_m = detail::columns(dict_->phi(), m.indices());
  const auto llt = detail::factor_model_gram(detail::submatrix(gram_, m.indices()));
  if (!llt) throw_rank_deficient(m);
  return phi_m * llt->solve(phi_m.transpose() * truth_);
}

std::pair<Model, RiskReport> oracle_search(const ForwardOperator& op, const Dictionary& dict, const Vector& truth,
                                           double sigma, const ModelSpace& space) {
  if (space.p != dict.p()) throw Error(ErrorKind::DimensionMismatch, "model space and dictionary sizes differ");
  if (count_models(space.p, space.size_cap) > kMaxEnumeratedModels) {
    throw Error(ErrorKind::SpaceTooLarge, "more than 1e7 models to enumerate");
  }
  const RiskProblem problem(op, dict, truth, sigma);
  std::optional<std::pair<Model, RiskReport>> best;
  for_each_model(space.p, space.size_cap, [&](const Model& m) {
    if (!space.admits_frobenius(problem.frobenius_sq(m), dict.n())) return;
    const auto rep = problem.risk(m);
    if (!rep) return;
    // Enumeration order already is the tie-break order, so only strict
    // improvements replace the incumbent.
    if (!best || rep->total < best->second.total) best.emplace(m, *rep);
  });
  return *best;  // the empty model is always admissible
}

SelectionProblem::SelectionProblem(const Observation& obs, const Dictionary& dict, const DualDictionary& dual,
                                   PenaltyRule pen)
    : dict_(&dict), dual_(&dual), pen_(pen), z_(obs.z) {
  if (z_.size() != dict.n()) throw Error(ErrorKind::DimensionMismatch, "z and dictionary atoms differ in length");
  if (dual.atom_variances.size() != dict.p()) throw Error(ErrorKind::DimensionMismatch, "dual dictionary size differs");
  gram_ = dict.phi().transpose() * dict.phi();
  phit_z_ = dict.phi().transpose() * z_;
}

double SelectionProblem::frobenius_sq(const Model& m) const { return invsel::frobenius_sq(*dual_, m); }

std::optional<double> SelectionProblem::objective(const Model& m) const {
  const double pen = penalty(pen_, frobenius_sq(m));
  if (m.empty()) return pen;
  const auto llt = detail::factor_model_gram(detail::submatrix(gram_, m.indices()));
  if (!llt) return std::nullopt;
  const Vector b = detail::subvector(phit_z_, m.indices());
  // ||f_hat_M||^2 = b^T G^{-1} b with b = Phi_M^T z.
  return -b.dot(llt->solve(b)) + pen;
}

ProjectionFit SelectionProblem::fit(const Model& m) const {
  ProjectionFit fit;
  fit.model = m;
  fit.frobenius_sq = frobenius_sq(m);
  fit.penalty = penalty(pen_, fit.frobenius_sq);
  if (m.empty()) {
    fit.fitted = Vector::Zero(n());
  } else {
    const auto llt = detail::factor_model_gram(detail::submatrix(gram_, m.indices()));
    if (!llt) throw_rank_deficient(m);
    fit.coefficients = llt->solve(detail::subvector(phit_z_, m.indices()));
    fit.fitted = detail::columns(dict_->phi(), m.indices()) * fit.coefficients;
  }
  fit.empirical_risk = (z_ - fit.fitted).squaredNorm();
  fit.objective = -fit.fitted.squaredNorm() + fit.penalty;
  return fit;
}

std::pair<Model, double> exhaustive_selection(const SelectionProblem& problem, const ModelSpace& space) {
  if (space.p != problem.p()) throw Error(ErrorKind::DimensionMismatch, "model space and dictionary sizes differ");
  if (count_models(space.p, space.size_cap) > kMaxEnumeratedModels) {
    throw Error(ErrorKind::SpaceTooLarge, "more than 1e7 models to enumerate");
  }
  std::optional<std::pair<Model, double>> best;
  for_each_model(space.p, space.size_cap, [&](const Model& m) {
    if (!space.admits_frobenius(problem.frobenius_sq(m), problem.n())) return;
    const auto obj = problem.objective(m);
    if (!obj) return;
    if (!best || *obj < best->second) best.emplace(m, *obj);
  });
  return *best;
}

}  // namespace invsel
