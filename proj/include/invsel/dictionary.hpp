#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "invsel/operator.hpp"
#include "invsel/types.hpp"

namespace invsel {

enum class AtomFamily { DaubechiesScaling, DaubechiesWavelet, HaarScaling, HaarWavelet, Custom };

const char* to_string(AtomFamily family);

/// Metadata of one dictionary atom. The atom's column lives in
/// Dictionary::phi() at the same position.
struct Atom {
  AtomFamily family = AtomFamily::Custom;
  int level = 0;
  int shift = 0;
};

/// Dictionary Phi (n x p) of unit-norm atoms.
class Dictionary {
 public:
  Dictionary(Matrix phi, std::vector<Atom> atoms);

  Index n() const noexcept { return phi_.rows(); }
  Index p() const noexcept { return phi_.cols(); }
  const Matrix& phi() const noexcept { return phi_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Atom& atom(Index j) const { return atoms_.at(static_cast<std::size_t>(j)); }
  auto column(Index j) const { return phi_.col(j); }

  /// 0-based position of the atom with the given label, if present.
  std::optional<Index> find(AtomFamily family, int level, int shift) const;

 private:
  Matrix phi_;
  std::vector<Atom> atoms_;
};

/// Dual dictionary Psi = A (A^T A)^{-1} Phi with per-atom variances ||psi_j||^2.
struct DualDictionary {
  Matrix psi;
  Vector atom_variances;
};

enum class NuSqMethod { Exhaustive, RandomSubsets };

struct SparseEigenEstimate {
  int r = 0;
  double nu_sq_lower = 0.0;
  NuSqMethod method = NuSqMethod::Exhaustive;
  std::uint64_t subsets_evaluated = 0;
};

/// Periodized Daubechies-8 basis (coarsest level 3, n atoms) followed by the
/// Haar scaling atoms at level 3 and Haar wavelets at levels 3..5 (64 atoms).
/// n must be a power of two, n >= 64.
Dictionary build_paper_dictionary(Index n = 128);

/// Columns of `columns` become atoms after normalization (family Custom,
/// shift = 0-based column index). Zero columns are rejected.
Dictionary build_custom_dictionary(const Matrix& columns);

DualDictionary build_dual(const Dictionary& dict, const ForwardOperator& op);

/// Minimal r-sparse eigenvalue of Phi^T Phi. Exhaustive over every subset of
/// size <= r when C(p, r) <= budget, otherwise the minimum over `budget`
/// random r-subsets (an upper bound on the true value). Sampling is split in
/// fixed-size chunks with their own derived seeds, so any `jobs` value gives
/// the same answer.
SparseEigenEstimate estimate_nu_sq(const Dictionary& dict, int r, std::uint64_t budget, std::uint64_t seed = 0,
                                   int jobs = 1);

/// Smallest eigenvalue of the Gram matrix of the given columns.
double min_gram_eigenvalue(const Matrix& phi, const std::vector<int>& subset);

/// Number of k-subsets of an m-set, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t m, std::uint64_t k);

}  // namespace invsel
