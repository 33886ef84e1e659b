#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tmsgd {

using Vec = std::vector<double>;

// Row-major dense matrix. Solvers touch one row per iteration, so rows are
// kept contiguous; n is small throughout (tens to low hundreds).
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

double dot(const double* a, const double* b, std::size_t n);
double norm_sq(const Vec& v);

// Plain-text interchange format: first line "rows cols", then rows lines of
// cols space-separated reals, printed with enough digits to round-trip.
// Vectors are written as single-column matrices ("m 1").
void write_matrix_text(const std::string& path, const DenseMatrix& M);
DenseMatrix read_matrix_text(const std::string& path);
void write_vector_text(const std::string& path, const Vec& v);
Vec read_vector_text(const std::string& path);

}  // namespace tmsgd
