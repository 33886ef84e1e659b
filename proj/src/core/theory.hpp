#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/linear_system.hpp"
#include "core/missing.hpp"
#include "core/solver.hpp"

namespace tmsgd {

struct MuResult {
  double mu = 0.0;          // sigma_min(A)^2 / m
  bool rank_deficient = false;
};

MuResult strong_convexity_mu(const DenseMatrix& A);

// G = (2B/(m p^3)) sum_i ||A_i||^4 + (2/(m p)) sum_i y_i^2 ||A_i||^2,
// a bound on E ||h_ell(x)||^2 over the ball ||x||^2 <= B.
double bound_G(const LinearSystem& sys, double p, double B);

// 17 G (1 + ln k) / (mu^2 k); the guaranteed mean squared error after k
// steps of the
// projected inv-mu-k schedule.
double convergence_bound(double G, double mu, std::size_t k);

// Expected gap E[h_msgd(x)] - grad F(x) under the tuple model:
// ((1-p)/(p m)) * ((L - I) (.) (A^T A)) x, computed tuple-locally.
// The within-tuple off-diagonal orientation (L - I) and the 1/(p m)
// normalization are fixed by the exact-enumeration oracle.
Vec bias_term(const DenseMatrix& A, double p, std::size_t ell, const Vec& x);

// Exact E over (uniform row) x (enumerated tuple masks) of the update
// direction. Budget-capped: requires n/ell <= 12 and m <= 10000.
Vec exact_expected_update(const LinearSystem& sys, Method method,
                          const TupleMissingModel& model, const Vec& x);

struct McUpdate {
  Vec mean;
  Vec stderr_coord;  // per-coordinate standard error of the mean
  std::size_t samples = 0;
};

McUpdate mc_expected_update(const LinearSystem& sys, Method method,
                            const TupleMissingModel& model, const Vec& x,
                            std::size_t samples, std::uint64_t seed);

// Monte-Carlo estimate of E ||h_tuple(x)||^2.
double mc_second_moment(const LinearSystem& sys, const TupleMissingModel& model,
                        const Vec& x, std::size_t samples, std::uint64_t seed);

struct CheckOptions {
  std::size_t m = 50;
  std::size_t n = 8;
  std::vector<std::size_t> ells = {1, 2, 4};
  std::vector<double> ps = {0.3, 0.6, 0.9};
  std::uint64_t seed = 1;
  std::size_t x_draws = 3;
  std::size_t mc_samples = 20000;
  // convergence suite instance
  std::size_t conv_m = 200;
  std::size_t conv_n = 5;
  std::size_t conv_ell = 5;
  double conv_p = 0.7;
  std::size_t conv_reps = 50;
  std::size_t conv_maxk = 1000;
};

// Tolerant parse: absent keys keep their defaults, "{}" is valid. Keys match
// the field names above.
CheckOptions check_options_from_json(const std::string& json_text);

struct CheckReport {
  bool all_pass = false;
  std::string json;
};

// suite: "all" | "unbiased" | "bias" | "bound" | "convergence"
CheckReport run_checks(const std::string& suite, const CheckOptions& options);

}  // namespace tmsgd
