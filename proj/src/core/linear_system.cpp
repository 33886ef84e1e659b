#include "core/linear_system.hpp"

#include <filesystem>

#include "core/rng.hpp"
#include "core/util.hpp"

namespace tmsgd {

void validate_system(const LinearSystem& sys) {
  check_arg(sys.A.rows >= 1 && sys.A.cols >= 1, "system must be non-empty");
  check_arg(sys.A.data.size() == sys.A.rows * sys.A.cols, "matrix storage size mismatch");
  check_arg(sys.y.size() == sys.A.rows, "y length must equal row count");
  check_arg(sys.x_star.size() == sys.A.cols, "x_star length must equal column count");
}

LinearSystem generate_gaussian_system(std::size_t m, std::size_t n,
                                      std::uint64_t seed) {
  check_arg(n >= 1, "n must be >= 1");
  check_arg(m >= n, "overdetermined system requires m >= n");
  Rng rng(seed);
  LinearSystem sys;
  sys.A = DenseMatrix(m, n);
  for (double& v : sys.A.data) v = rng.normal();
  sys.x_star.resize(n);
  for (double& v : sys.x_star) v = rng.normal();
  sys.y.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    sys.y[i] = dot(sys.A.row(i), sys.x_star.data(), n);
  return sys;
}

double objective(const LinearSystem& sys, const Vec& x) {
  validate_system(sys);
  check_arg(x.size() == sys.A.cols, "x length must equal column count");
  double s = 0.0;
  for (std::size_t i = 0; i < sys.A.rows; ++i) {
    const double r = dot(sys.A.row(i), x.data(), sys.A.cols) - sys.y[i];
    s += r * r;
  }
  return s / (2.0 * static_cast<double>(sys.A.rows));
}

Vec full_gradient(const LinearSystem& sys, const Vec& x) {
  validate_system(sys);
  check_arg(x.size() == sys.A.cols, "x length must equal column count");
  const std::size_t m = sys.A.rows, n = sys.A.cols;
  Vec g(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = sys.A.row(i);
    const double r = dot(row, x.data(), n) - sys.y[i];
    for (std::size_t c = 0; c < n; ++c) g[c] += r * row[c];
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (double& v : g) v *= inv_m;
  return g;
}

double error_sq(const Vec& x, const Vec& x_star) {
  check_arg(x.size() == x_star.size(), "error_sq requires equal lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_star[i];
    s += d * d;
  }
  return s;
}

void save_system(const LinearSystem& sys, const std::string& dir) {
  validate_system(sys);
  ensure_dir(dir);
  const std::filesystem::path base(dir);
  write_matrix_text((base / "A.txt").string(), sys.A);
  write_vector_text((base / "y.txt").string(), sys.y);
  write_vector_text((base / "xstar.txt").string(), sys.x_star);
}

LinearSystem load_system(const std::string& dir) {
  const std::filesystem::path base(dir);
  LinearSystem sys;
  sys.A = read_matrix_text((base / "A.txt").string());
  sys.y = read_vector_text((base / "y.txt").string());
  sys.x_star = read_vector_text((base / "xstar.txt").string());
  validate_system(sys);
  return sys;
}

}  // namespace tmsgd
