#pragma once

#include <random>

#include "invsel/dictionary.hpp"
#include "invsel/rng.hpp"

namespace testing {

inline invsel::Vector gaussian(invsel::Index n, invsel::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  invsel::Vector v(n);
  for (invsel::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline invsel::Matrix gaussian(invsel::Index rows, invsel::Index cols, invsel::Rng& rng) {
  invsel::Matrix m(rows, cols);
  for (invsel::Index j = 0; j < cols; ++j) m.col(j) = gaussian(rows, rng);
  return m;
}

inline invsel::Dictionary random_dictionary(invsel::Index n, invsel::Index p, invsel::Rng& rng) {
  return invsel::build_custom_dictionary(gaussian(n, p, rng));
}

inline invsel::Matrix random_orthogonal(invsel::Index n, invsel::Rng& rng) {
  Eigen::HouseholderQR<invsel::Matrix> qr(gaussian(n, n, rng));
  return qr.householderQ() * invsel::Matrix::Identity(n, n);
}

}  // namespace testing
