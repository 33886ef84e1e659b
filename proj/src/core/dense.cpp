#include "core/dense.hpp"

#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "core/util.hpp"

namespace tmsgd {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const Vec& v) { return dot(v.data(), v.data(), v.size()); }

void write_matrix_text(const std::string& path, const DenseMatrix& M) {
  std::string out;
  out.reserve(M.rows * M.cols * 20 + 32);
  out += std::to_string(M.rows);
  out += ' ';
  out += std::to_string(M.cols);
  out += '\n';
  for (std::size_t i = 0; i < M.rows; ++i) {
    for (std::size_t j = 0; j < M.cols; ++j) {
      if (j) out += ' ';
      out += fmt_full(M.at(i, j));
    }
    out += '\n';
  }
  write_file(path, out);
}

DenseMatrix read_matrix_text(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  long long r = -1, c = -1;
  if (!(in >> r >> c) || r < 0 || c < 0)
    throw io_error("bad matrix header in " + path);
  DenseMatrix M(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < M.data.size(); ++i) {
    if (!(in >> M.data[i]))
      throw io_error("truncated or non-numeric matrix data in " + path);
  }
  double extra;
  if (in >> extra) throw io_error("trailing data in " + path);
  return M;
}

void write_vector_text(const std::string& path, const Vec& v) {
  DenseMatrix M(v.size(), 1);
  M.data = v;
  write_matrix_text(path, M);
}

Vec read_vector_text(const std::string& path) {
  DenseMatrix M = read_matrix_text(path);
  if (M.cols != 1) throw io_error("expected a single-column vector in " + path);
  return M.data;
}

}  // namespace tmsgd
