#include "invsel/operator.hpp"

#include <cmath>
#include <string>

namespace invsel {

namespace {

constexpr double kSingularTolerance = 1e-12;

}  // namespace

ForwardOperator::ForwardOperator(Matrix a) : a_(std::move(a)) {
  if (a_.cols() < 1 || a_.rows() < a_.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "operator must be n x m with n >= m >= 1, got " + std::to_string(a_.rows()) + " x " +
                    std::to_string(a_.cols()));
  }
  if (!a_.allFinite()) throw Error(ErrorKind::InvalidArgument, "operator has non-finite entries");

  qr_.compute(a_);
  const Index m = a_.cols();
  const auto r_diag = qr_.matrixQR().diagonal().head(m).cwiseAbs();
  const double largest = r_diag.maxCoeff();
  const double smallest = r_diag.minCoeff();
  // Eigenvalues of A^T A are squared singular values of R.
  if (!(largest > 0.0) || smallest * smallest < kSingularTolerance * largest * largest) {
    throw Error(ErrorKind::SingularOperator, "A^T A is numerically singular");
  }
  cond_ = (largest / smallest) * (largest / smallest);
}

Vector ForwardOperator::apply(const Vector& f) const {
  if (f.size() != cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected vector of length " + std::to_string(cols()) + ", got " + std::to_string(f.size()));
  }
  return a_ * f;
}

Matrix ForwardOperator::gram_solve(const Matrix& v) const {
  if (v.rows() != cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(cols()) + " rows, got " + std::to_string(v.rows()));
  }
  // A P = Q R  =>  (A^T A)^{-1} = P R^{-1} R^{-T} P^T.
  const Index m = cols();
  const auto r = qr_.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
  Matrix w = qr_.colsPermutation().transpose() * v;
  r.transpose().solveInPlace(w);
  r.solveInPlace(w);
  return qr_.colsPermutation() * w;
}

Vector ForwardOperator::back_project(const Vector& y) const {
  if (y.size() != rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected observation of length " + std::to_string(rows()) + ", got " + std::to_string(y.size()));
  }
  return qr_.solve(y);
}

ForwardOperator build_exponential_operator(Index n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "exponential operator needs n >= 2");
  Matrix a = Matrix::Zero(n, n);
  const double scale = static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) a(i, j) = std::exp(-static_cast<double>(i - j) / scale);
  }
  return ForwardOperator(std::move(a));
}

ForwardOperator build_from_matrix(Matrix a) { return ForwardOperator(std::move(a)); }

Observation back_transform(const ForwardOperator& op, const Vector& y, double sigma) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise level must be >= 0");
  Observation obs;
  obs.y = y;
  obs.sigma = sigma;
  obs.z = op.back_project(y);
  return obs;
}

Vector apply_forward(const ForwardOperator& op, const Vector& f) { return op.apply(f); }

}  // namespace invsel
