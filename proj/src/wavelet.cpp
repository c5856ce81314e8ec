#include "invsel/wavelet.hpp"

#include <array>
#include <cmath>

namespace invsel::wavelet {

namespace {

const std::array<double, 2> kHaar = {0.70710678118654752440, 0.70710678118654752440};

const std::array<double, 8> kDaubechies8 = {
    0.2303778133088965, 0.7148465705529156,  0.6308807679298589, -0.0279837694168599,
    -0.1870348117190930, 0.0308413818355607, 0.0328830116668852, -0.0105974017850690,
};

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

std::span<const double> haar_filter() { return kHaar; }
std::span<const double> daubechies8_filter() { return kDaubechies8; }

std::vector<double> highpass(std::span<const double> lowpass) {
  const std::size_t len = lowpass.size();
  std::vector<double> g(len);
  for (std::size_t k = 0; k < len; ++k) g[k] = (k % 2 == 0 ? 1.0 : -1.0) * lowpass[len - 1 - k];
  return g;
}

Vector inverse_periodic(const Vector& coeffs, std::span<const double> lowpass, int coarsest_level) {
  const Index n = coeffs.size();
  const Index coarse = Index{1} << coarsest_level;
  if (!is_power_of_two(n) || coarse > n) {
    throw Error(ErrorKind::UnsupportedSize, "periodized transform needs a dyadic length >= 2^coarsest_level");
  }
  const std::vector<double> g = highpass(lowpass);
  const Index len = static_cast<Index>(lowpass.size());

  Vector approx = coeffs.head(coarse);
  for (Index half = coarse; half < n; half *= 2) {
    const Index full = 2 * half;
    Vector next = Vector::Zero(full);
    for (Index k = 0; k < half; ++k) {
      const double a = approx[k];
      const double d = coeffs[half + k];
      for (Index t = 0; t < len; ++t) next[(2 * k + t) % full] += lowpass[t] * a + g[t] * d;
    }
    approx = std::move(next);
  }
  return approx;
}

Index wavelet_offset(int level, int shift) { return (Index{1} << level) + shift; }

}  // namespace invsel::wavelet
