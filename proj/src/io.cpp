#include "invsel/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace invsel::io {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::vector<double> split_numbers(const std::string& line) {
  std::vector<double> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(parse_double(tok));
  return out;
}

bool skippable(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string::npos || line[first] == '#';
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

Matrix parse_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (skippable(line)) continue;
    rows.push_back(split_numbers(line));
    if (rows.back().size() != rows.front().size()) {
      throw Error(ErrorKind::DimensionMismatch, "ragged matrix row " + std::to_string(rows.size()));
    }
  }
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

Matrix read_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_matrix(in);
}

Vector read_vector(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (skippable(line)) continue;
    for (double v : split_numbers(line)) values.push_back(v);
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

void write_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

void write_vector(const std::filesystem::path& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_vector(out, v);
}

void write_record(std::ostream& out, const ProjectionFit& fit) {
  out << "model " << to_string(fit.model) << '\n';
  out << "objective " << format_double(fit.objective) << '\n';
  out << "penalty " << format_double(fit.penalty) << '\n';
  out << "frobenius_sq " << format_double(fit.frobenius_sq) << '\n';
  out << "empirical_risk " << format_double(fit.empirical_risk) << '\n';
  for (int k = 0; k < fit.model.size(); ++k) {
    out << "coefficient " << fit.model.indices()[static_cast<std::size_t>(k)] + 1 << ' '
        << format_double(fit.coefficients[k]) << '\n';
  }
}

void write_record(std::ostream& out, const SATrace& trace) {
  out << "best_model " << to_string(trace.best_model) << '\n';
  out << "best_objective " << format_double(trace.best_objective) << '\n';
  out << "final_objective " << format_double(trace.final_objective) << '\n';
  out << "iterations " << trace.iterations << '\n';
  out << "accepted " << trace.acceptance_count << '\n';
  out << "rejected_size_cap " << trace.rejected_size_cap << '\n';
  out << "rejected_rank_deficient " << trace.rejected_rank_deficient << '\n';
  for (const Model& m : trace.visited_tail) out << "tail " << to_string(m) << '\n';
}

void write_record(std::ostream& out, const CandidateSet& cand, const SimplexWeights& weights) {
  out << "q_objective " << format_double(weights.objective_value) << '\n';
  out << "gap " << format_double(weights.gap) << '\n';
  out << "converged " << (weights.converged ? 1 : 0) << '\n';
  for (std::size_t k = 0; k < cand.fits.size(); ++k) {
    out << "weight " << to_string(cand.fits[k].model) << ' ' << format_double(weights.weights[static_cast<Index>(k)])
        << '\n';
  }
}

void write_record(std::ostream& out, const LassoFit& fit) {
  out << "lambda " << format_double(fit.lambda) << '\n';
  out << "iterations " << fit.iterations << '\n';
  out << "converged " << (fit.converged ? 1 : 0) << '\n';
  out << "kkt_violation " << format_double(fit.kkt_violation) << '\n';
  for (int j : fit.support) out << "coefficient " << j + 1 << ' ' << format_double(fit.coefficients[j]) << '\n';
}

}  // namespace invsel::io
