#pragma once

#include <cstdint>
#include <string>

#include "core/dense.hpp"

namespace tmsgd {

// Consistent overdetermined system: y = A x_star exactly by construction.
struct LinearSystem {
  DenseMatrix A;
  Vec y;       // size m
  Vec x_star;  // size n
};

void validate_system(const LinearSystem& sys);

// A has standard Gaussian entries, x_star standard Gaussian, y = A x_star.
// Requires m >= n >= 1. Fill order: A row-major, then x_star.
LinearSystem generate_gaussian_system(std::size_t m, std::size_t n,
                                      std::uint64_t seed);

// F(x) = (1/2m) ||A x - y||^2
double objective(const LinearSystem& sys, const Vec& x);

// grad F(x) = (1/m) A^T (A x - y)
Vec full_gradient(const LinearSystem& sys, const Vec& x);

double error_sq(const Vec& x, const Vec& x_star);

// Directory layout: A.txt, y.txt, xstar.txt in the plain-text matrix format.
void save_system(const LinearSystem& sys, const std::string& dir);
LinearSystem load_system(const std::string& dir);

}  // namespace tmsgd
