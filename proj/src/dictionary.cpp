#include "invsel/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "invsel/rng.hpp"
#include "invsel/wavelet.hpp"

namespace invsel {

namespace {

constexpr int kCoarsestLevel = 3;
constexpr int kHaarFinestLevel = 5;
constexpr std::uint64_t kSampleChunk = 1024;

bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_exact(Index n) {
  int j = 0;
  while ((Index{1} << j) < n) ++j;
  return j;
}

// Appends the synthesis of coefficient `offset` as an atom.
void append_atom(Matrix& phi, std::vector<Atom>& atoms, Index col, Index offset, std::span<const double> filter,
                 Atom meta) {
  Vector unit = Vector::Zero(phi.rows());
  unit[offset] = 1.0;
  Vector atom = wavelet::inverse_periodic(unit, filter, kCoarsestLevel);
  phi.col(col) = atom / atom.norm();
  atoms.push_back(meta);
}

}  // namespace

const char* to_string(AtomFamily family) {
  switch (family) {
    case AtomFamily::DaubechiesScaling: return "DaubechiesScaling";
    case AtomFamily::DaubechiesWavelet: return "DaubechiesWavelet";
    case AtomFamily::HaarScaling: return "HaarScaling";
    case AtomFamily::HaarWavelet: return "HaarWavelet";
    case AtomFamily::Custom: return "Custom";
  }
  return "Unknown";
}

Dictionary::Dictionary(Matrix phi, std::vector<Atom> atoms) : phi_(std::move(phi)), atoms_(std::move(atoms)) {
  if (static_cast<Index>(atoms_.size()) != phi_.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "atom metadata count differs from dictionary columns");
  }
}

std::optional<Index> Dictionary::find(AtomFamily family, int level, int shift) const {
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    const Atom& a = atoms_[j];
    if (a.family == family && a.level == level && a.shift == shift) return static_cast<Index>(j);
  }
  return std::nullopt;
}

Dictionary build_paper_dictionary(Index n) {
  if (!is_power_of_two(n) || n < 64) {
    throw Error(ErrorKind::UnsupportedSize, "paper dictionary needs n a power of two >= 64, got " + std::to_string(n));
  }
  const int finest = log2_exact(n) - 1;
  const Index coarse = Index{1} << kCoarsestLevel;
  const Index haar_count = 2 * coarse + (Index{1} << (kCoarsestLevel + 1)) + (Index{1} << kHaarFinestLevel);

  Matrix phi(n, n + haar_count);
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(n + haar_count));
  Index col = 0;

  const auto daub = wavelet::daubechies8_filter();
  for (int k = 0; k < coarse; ++k) {
    append_atom(phi, atoms, col++, k, daub, {AtomFamily::DaubechiesScaling, kCoarsestLevel, k});
  }
  for (int level = kCoarsestLevel; level <= finest; ++level) {
    for (int k = 0; k < (1 << level); ++k) {
      append_atom(phi, atoms, col++, wavelet::wavelet_offset(level, k), daub, {AtomFamily::DaubechiesWavelet, level, k});
    }
  }

  const auto haar = wavelet::haar_filter();
  for (int k = 0; k < coarse; ++k) {
    append_atom(phi, atoms, col++, k, haar, {AtomFamily::HaarScaling, kCoarsestLevel, k});
  }
  for (int level = kCoarsestLevel; level <= kHaarFinestLevel; ++level) {
    for (int k = 0; k < (1 << level); ++k) {
      append_atom(phi, atoms, col++, wavelet::wavelet_offset(level, k), haar, {AtomFamily::HaarWavelet, level, k});
    }
  }
  return Dictionary(std::move(phi), std::move(atoms));
}

Dictionary build_custom_dictionary(const Matrix& columns) {
  if (columns.cols() < 1 || columns.rows() < 1) throw Error(ErrorKind::InvalidArgument, "empty dictionary");
  Matrix phi = columns;
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(columns.cols()));
  for (Index j = 0; j < phi.cols(); ++j) {
    const double norm = phi.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorKind::InvalidArgument, "dictionary column " + std::to_string(j + 1) + " has zero norm");
    }
    phi.col(j) /= norm;
    atoms.push_back({AtomFamily::Custom, 0, static_cast<int>(j)});
  }
  return Dictionary(std::move(phi), std::move(atoms));
}

DualDictionary build_dual(const Dictionary& dict, const ForwardOperator& op) {
  if (dict.n() != op.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "dictionary atoms have length " + std::to_string(dict.n()) +
                                                  " but the operator acts on length " + std::to_string(op.cols()));
  }
  DualDictionary dual;
  dual.psi = op.matrix() * op.gram_solve(dict.phi());
  dual.atom_variances = dual.psi.colwise().squaredNorm().transpose();
  return dual;
}

std::uint64_t binomial(std::uint64_t m, std::uint64_t k) {
  if (k > m) return 0;
  k = std::min(k, m - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = m - k + i;
    // result * num / i is exact at every step; guard the multiplication.
    if (result > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::uint64_t>::max();
    result = result * num / i;
  }
  return result;
}

double min_gram_eigenvalue(const Matrix& phi, const std::vector<int>& subset) {
  const Index k = static_cast<Index>(subset.size());
  Matrix g(k, k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = a; b < k; ++b) {
      g(a, b) = g(b, a) = phi.col(subset[static_cast<std::size_t>(a)]).dot(phi.col(subset[static_cast<std::size_t>(b)]));
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues()[0]);
}

SparseEigenEstimate estimate_nu_sq(const Dictionary& dict, int r, std::uint64_t budget, std::uint64_t seed, int jobs) {
  const int p = static_cast<int>(dict.p());
  if (r < 1 || r > p) throw Error(ErrorKind::InvalidArgument, "sparsity level must satisfy 1 <= r <= p");

  SparseEigenEstimate est;
  est.r = r;
  est.nu_sq_lower = std::numeric_limits<double>::infinity();

  if (binomial(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(r)) <= budget) {
    est.method = NuSqMethod::Exhaustive;
    std::vector<int> subset;
    for (int size = 1; size <= r; ++size) {
      subset.resize(static_cast<std::size_t>(size));
      std::iota(subset.begin(), subset.end(), 0);
      while (true) {
        est.nu_sq_lower = std::min(est.nu_sq_lower, min_gram_eigenvalue(dict.phi(), subset));
        ++est.subsets_evaluated;
        // Next combination in lexicographic order.
        int i = size - 1;
        while (i >= 0 && subset[static_cast<std::size_t>(i)] == p - size + i) --i;
        if (i < 0) break;
        ++subset[static_cast<std::size_t>(i)];
        for (int t = i + 1; t < size; ++t) subset[static_cast<std::size_t>(t)] = subset[static_cast<std::size_t>(t - 1)] + 1;
      }
    }
    return est;
  }

  est.method = NuSqMethod::RandomSubsets;
  if (budget == 0) throw Error(ErrorKind::InvalidArgument, "sampling budget must be positive");
  const std::uint64_t chunks = (budget + kSampleChunk - 1) / kSampleChunk;
  std::vector<double> chunk_min(static_cast<std::size_t>(chunks), std::numeric_limits<double>::infinity());

  auto run_chunk = [&](std::uint64_t c) {
    Rng rng(derive_seed(seed, {c}));
    std::vector<int> pool(static_cast<std::size_t>(p));
    std::iota(pool.begin(), pool.end(), 0);
    const std::uint64_t begin = c * kSampleChunk;
    const std::uint64_t end = std::min(budget, begin + kSampleChunk);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = begin; s < end; ++s) {
      // Partial Fisher-Yates for a uniform r-subset.
      for (int i = 0; i < r; ++i) {
        std::uniform_int_distribution<int> pick(i, p - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      }
      std::vector<int> subset(pool.begin(), pool.begin() + r);
      best = std::min(best, min_gram_eigenvalue(dict.phi(), subset));
    }
    chunk_min[static_cast<std::size_t>(c)] = best;
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(chunks)));
  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::uint64_t c = static_cast<std::uint64_t>(w); c < chunks; c += static_cast<std::uint64_t>(workers)) run_chunk(c);
      });
    }
    for (auto& t : threads) t.join();
  }
  est.nu_sq_lower = *std::min_element(chunk_min.begin(), chunk_min.end());
  est.subsets_evaluated = budget;
  return est;
}

}  // namespace invsel
