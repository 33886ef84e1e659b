#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/linear_system.hpp"
#include "core/missing.hpp"

namespace tmsgd {

enum class Method { sgd, msgd, tuple_msgd };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

enum class ScheduleKind { fixed, inv_mu_k };

// fixed: alpha_k = alpha. inv_mu_k: alpha_k = 1/(mu k), k >= 1.
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::fixed;
  double alpha = 1e-3;
  double mu = 0.0;

  double at(std::size_t k) const;
};

struct ProjectionDomain {
  bool enabled = false;
  double radius = 0.0;
};

// Euclidean projection onto the ball of the given radius (identity inside).
Vec project_ball(const Vec& x, double radius);

struct SolverConfig {
  Method method = Method::tuple_msgd;
  TupleMissingModel model;
  StepSchedule schedule;
  ProjectionDomain projection;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  Vec x0;  // empty means the zero vector
  // When set, per-iteration masks are the rows of this matrix instead of
  // fresh samples; no mask randomness is consumed. model.p still supplies
  // the correction factor (e.g. the realized presence fraction).
  const MaskMatrix* fixed_mask = nullptr;
};

// One in-place update from the masked row arow (already zeroed where absent).
//
// The three functions deliberately share expression shapes: with p = 1 the
// tuple update performs bit-identical arithmetic to sgd_step, and with
// ell = 1 bit-identical arithmetic to msgd_step. The reduction tests rely on
// this, so keep the algebra aligned when editing (and keep fp contraction
// off, see the build flags).
void sgd_step(const double* arow, std::size_t n, double y, double alpha, Vec& x);
void msgd_step(const double* arow, std::size_t n, double y, double p,
               double alpha, Vec& x);
void tuple_msgd_step(const double* arow, std::size_t n, double y, double p,
                     std::size_t ell, double alpha, Vec& x);

// Update direction h(x) (the quantity multiplied by alpha), for analysis.
Vec update_direction(Method method, const double* arow, std::size_t n, double y,
                     double p, std::size_t ell, const Vec& x);

struct ErrorTrace {
  std::vector<double> errors;  // iterations + 1 entries, [0] is the start
  std::string config_json;     // resolved configuration echo
  double wall_seconds = 0.0;
};

ErrorTrace run_solver(const LinearSystem& sys, const SolverConfig& cfg);

// CSV with header "iteration,error"; rows where iteration % thin == 0, plus
// always the final iteration. Values are printed so they round-trip exactly.
void write_trace_csv(const ErrorTrace& trace, const std::string& path,
                     std::size_t thin = 1);
std::vector<std::pair<std::size_t, double>> read_trace_csv(
    const std::string& path);

}  // namespace tmsgd
