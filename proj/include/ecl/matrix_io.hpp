#pragma once

#include <string>

#include "ecl/metrics.hpp"

namespace ecl {

/// Rectangular CSV with a leading schema comment; row t lists tasks 1..t,
/// trailing cells stay empty. Values use %.17g so re-ingestion is lossless.
std::string matrix_to_csv(const AccuracyMatrix& a);

AccuracyMatrix matrix_from_csv_text(const std::string& text, const std::string& origin);
AccuracyMatrix load_matrix_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace ecl
