#pragma once

#include <string>
#include <vector>

#include "ipbo/core.hpp"

namespace ipbo {

// Comma-separated, one row per line, optional single header row, decimal-point
// reals. Readers reject ragged rows.
struct CsvMatrix {
  Matrix values;
  std::vector<std::string> header;  // empty when the file had no header
};

CsvMatrix read_matrix_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& header = {});

// Fixed shortest-roundtrip formatting so repeated runs emit identical bytes.
std::string format_double(double v);

}  // namespace ipbo
