#pragma once

#include <span>
#include <vector>

#include "invsel/types.hpp"

namespace invsel::wavelet {

/// Orthonormal lowpass (scaling) filters, synthesis orientation.
std::span<const double> haar_filter();
/// Eight-tap Daubechies filter (four vanishing moments).
std::span<const double> daubechies8_filter();

/// Quadrature-mirror highpass filter g[k] = (-1)^k h[L-1-k].
std::vector<double> highpass(std::span<const double> lowpass);

/// Periodized inverse DWT. `coeffs` has length n = 2^J and is laid out as
/// [scaling at coarsest level j0 (2^j0 entries), wavelet level j0 (2^j0),
///  wavelet level j0+1 (2^(j0+1)), ..., wavelet level J-1 (2^(J-1))].
/// Boundary handling is circular.
Vector inverse_periodic(const Vector& coeffs, std::span<const double> lowpass, int coarsest_level);

/// Position of wavelet coefficient (level, shift) in the layout used by
/// inverse_periodic. Scaling coefficients sit at their shift.
Index wavelet_offset(int level, int shift);

}  // namespace invsel::wavelet
