#include "invsel/test_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "invsel/rng.hpp"

namespace invsel {

const char* to_string(FunctionId id) {
  switch (id) {
    case FunctionId::F1: return "f1";
    case FunctionId::F2: return "f2";
    case FunctionId::F3: return "f3";
    case FunctionId::F4: return "f4";
  }
  return "?";
}

const char* to_string(SparsityLabel label) {
  switch (label) {
    case SparsityLabel::High: return "high";
    case SparsityLabel::Moderate: return "moderate";
    case SparsityLabel::Low: return "low";
    case SparsityLabel::Uncontrolled: return "uncontrolled";
  }
  return "?";
}

FunctionId parse_function_id(std::string_view text) {
  for (FunctionId id : {FunctionId::F1, FunctionId::F2, FunctionId::F3, FunctionId::F4}) {
    if (text == to_string(id)) return id;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown test function '" + std::string(text) + "'");
}

double heavisine(double t) {
  auto sgn = [](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); };
  return 4.0 * std::sin(4.0 * std::numbers::pi * t) - sgn(t - 0.3) - sgn(0.72 - t);
}

namespace {

constexpr AtomFamily kDS = AtomFamily::DaubechiesScaling;
constexpr AtomFamily kDW = AtomFamily::DaubechiesWavelet;
constexpr AtomFamily kHS = AtomFamily::HaarScaling;

std::vector<AtomRef> recipe(FunctionId id) {
  switch (id) {
    case FunctionId::F1: return {{kDS, 3, 4}, {kHS, 3, 0}};
    case FunctionId::F2: return {{kDS, 3, 0}, {kDS, 3, 6}, {kDW, 3, 7}, {kHS, 3, 6}};
    case FunctionId::F3:
      return {{kDS, 3, 1}, {kDS, 3, 5}, {kDS, 3, 7}, {kDW, 3, 0},
              {kDW, 3, 3}, {kDW, 3, 5}, {kHS, 3, 0}, {kHS, 3, 3}};
    case FunctionId::F4: return {};
  }
  return {};
}

SparsityLabel label_of(FunctionId id) {
  switch (id) {
    case FunctionId::F1: return SparsityLabel::High;
    case FunctionId::F2: return SparsityLabel::Moderate;
    case FunctionId::F3: return SparsityLabel::Low;
    case FunctionId::F4: return SparsityLabel::Uncontrolled;
  }
  return SparsityLabel::Uncontrolled;
}

}  // namespace

TestFunction build_test_function(FunctionId id, const Dictionary& dict) {
  TestFunction f;
  f.id = id;
  f.sparsity_label = label_of(id);
  f.construction = recipe(id);
  const Index n = dict.n();
  if (f.analytic()) {
    f.values.resize(n);
    for (Index i = 0; i < n; ++i) f.values[i] = heavisine(static_cast<double>(i + 1) / static_cast<double>(n));
    return f;
  }
  f.values = Vector::Zero(n);
  for (const AtomRef& a : f.construction) {
    const auto j = dict.find(a.family, a.level, a.shift);
    if (!j) {
      throw Error(ErrorKind::AtomNotFound, std::string(to_string(a.family)) + " level " + std::to_string(a.level) +
                                               " shift " + std::to_string(a.shift));
    }
    f.values += dict.column(*j);
    f.atom_indices.push_back(static_cast<int>(*j));
  }
  std::sort(f.atom_indices.begin(), f.atom_indices.end());
  return f;
}

Observation synthesize_observation(const ForwardOperator& op, const TestFunction& f, double snr, std::uint64_t seed) {
  if (!(snr > 0.0) || !std::isfinite(snr)) throw Error(ErrorKind::InvalidArgument, "snr must be positive and finite");
  const double sigma = f.values.norm() / snr;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector y = op.apply(f.values);
  for (Index i = 0; i < y.size(); ++i) y[i] += sigma * normal(rng);
  Observation obs = back_transform(op, y, sigma);
  obs.meta.seed = seed;
  obs.meta.truth_id = to_string(f.id);
  return obs;
}

double relative_error(const Vector& truth, const Vector& estimate) {
  if (truth.size() != estimate.size()) throw Error(ErrorKind::DimensionMismatch, "truth and estimate differ in length");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw Error(ErrorKind::ZeroTruth, "relative error of a zero truth");
  return (truth - estimate).squaredNorm() / denom;
}

}  // namespace invsel
