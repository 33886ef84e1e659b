#pragma once

#include <cstdint>
#include <vector>

#include "core/missing.hpp"
#include "core/solver.hpp"

namespace tmsgd {

struct ImputeResult {
  DenseMatrix completed;
  std::size_t fill_count = 0;               // number of entries written
  std::vector<std::size_t> empty_columns;   // columns with zero observations
};

// Missing entries replaced by the mean of the observed entries in the same
// column; a fully-missing column falls back to 0 and is reported.
ImputeResult column_mean_impute(const DenseMatrix& masked,
                                const MaskMatrix& mask);

// Missing entry (i, c) becomes the average of column c over the k nearest
// rows among those observing c. Row distance is squared Euclidean over the
// co-observed column set divided by its size; a pair with no co-observed
// columns gets +inf (such rows sort last but remain candidates). Ties break
// toward the lower row index. Fewer than k candidates means all of them; zero
// candidates falls back to the column mean. Distances use observed data only,
// so the result does not depend on fill order.
ImputeResult knn_impute(const DenseMatrix& masked, const MaskMatrix& mask,
                        std::size_t k = 5);

// Plain sgd on the completed (fully observed) matrix against the original
// x_star. Forces method = sgd, p = 1 and fresh all-ones masks, so with an
// untouched matrix the trace pairs exactly with run_solver(sgd, p = 1).
ErrorTrace solve_imputed(const DenseMatrix& completed, const Vec& y,
                         const Vec& x_star, SolverConfig cfg);

}  // namespace tmsgd
