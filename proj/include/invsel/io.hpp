#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "invsel/aggregate.hpp"
#include "invsel/estimator.hpp"
#include "invsel/lasso.hpp"
#include "invsel/search.hpp"
#include "invsel/types.hpp"

namespace invsel::io {

/// 17 significant digits, locale-independent.
std::string format_double(double x);

/// Locale-independent. Throws InvalidArgument on trailing garbage.
double parse_double(std::string_view text);

/// Dense matrix text: one whitespace-separated row per line; blank lines and
/// lines starting with '#' are skipped. Rows must have equal length.
Matrix parse_matrix(std::istream& in);
Matrix read_matrix(const std::filesystem::path& path);

/// Reads every number in the file, in order.
Vector read_vector(const std::filesystem::path& path);
void write_vector(std::ostream& out, const Vector& v);
void write_vector(const std::filesystem::path& path, const Vector& v);

void write_record(std::ostream& out, const ProjectionFit& fit);
void write_record(std::ostream& out, const SATrace& trace);
void write_record(std::ostream& out, const CandidateSet& cand, const SimplexWeights& weights);
void write_record(std::ostream& out, const LassoFit& fit);

}  // namespace invsel::io
