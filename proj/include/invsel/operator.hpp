#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "invsel/types.hpp"

namespace invsel {

/// Discrete forward operator A (n x m, n >= m, full column rank) together with
/// a cached column-pivoted QR factorization A P = Q R. Every product with
/// (A^T A)^{-1} goes through R; the inverse is never formed.
///
/// Immutable after construction.
class ForwardOperator {
 public:
  /// Throws SingularOperator when |R_mm|^2 < 1e-12 |R_11|^2, i.e. when A^T A
  /// is numerically singular.
  explicit ForwardOperator(Matrix a);

  const Matrix& matrix() const noexcept { return a_; }
  Index rows() const noexcept { return a_.rows(); }
  Index cols() const noexcept { return a_.cols(); }

  /// Condition-number estimate of A^T A from the diagonal of R.
  double cond_estimate() const noexcept { return cond_; }

  /// A f.
  Vector apply(const Vector& f) const;

  /// (A^T A)^{-1} v, column-wise for matrices.
  Matrix gram_solve(const Matrix& v) const;

  /// z = (A^T A)^{-1} A^T y, computed as the least-squares solution of A z = y.
  Vector back_project(const Vector& y) const;

 private:
  Matrix a_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
  double cond_ = 1.0;
};

struct ObservationMeta {
  std::optional<std::uint64_t> seed;
  std::string truth_id;
};

/// Observed data y with its noise level and the back-transformed vector z.
struct Observation {
  Vector y;
  double sigma = 0.0;
  Vector z;
  ObservationMeta meta;
};

/// Lower-triangular A_ij = exp(-(i-j)/n) for j <= i (1-based), n >= 2.
ForwardOperator build_exponential_operator(Index n);

ForwardOperator build_from_matrix(Matrix a);

Observation back_transform(const ForwardOperator& op, const Vector& y, double sigma);

Vector apply_forward(const ForwardOperator& op, const Vector& f);

}  // namespace invsel
