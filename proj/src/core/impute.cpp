#include "core/impute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/util.hpp"

namespace tmsgd {

namespace {

void check_pair(const DenseMatrix& masked, const MaskMatrix& mask) {
  check_arg(masked.rows >= 1 && masked.cols >= 1, "matrix must be non-empty");
  check_arg(masked.rows == mask.rows && masked.cols == mask.cols,
            "mask dimensions must match the matrix");
}

Vec column_means(const DenseMatrix& masked, const MaskMatrix& mask,
                 std::vector<std::size_t>& empty_columns) {
  Vec mean(masked.cols, 0.0);
  for (std::size_t c = 0; c < masked.cols; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < masked.rows; ++i) {
      if (mask.at(i, c)) {
        sum += masked.at(i, c);
        ++count;
      }
    }
    if (count == 0)
      empty_columns.push_back(c);
    else
      mean[c] = sum / static_cast<double>(count);
  }
  return mean;
}

}  // namespace

ImputeResult column_mean_impute(const DenseMatrix& masked,
                                const MaskMatrix& mask) {
  check_pair(masked, mask);
  ImputeResult out;
  out.completed = masked;
  Vec mean = column_means(masked, mask, out.empty_columns);
  for (std::size_t i = 0; i < masked.rows; ++i)
    for (std::size_t c = 0; c < masked.cols; ++c)
      if (!mask.at(i, c)) {
        out.completed.at(i, c) = mean[c];
        ++out.fill_count;
      }
  return out;
}

ImputeResult knn_impute(const DenseMatrix& masked, const MaskMatrix& mask,
                        std::size_t k) {
  check_pair(masked, mask);
  check_arg(k >= 1, "k must be >= 1");
  const std::size_t m = masked.rows, n = masked.cols;
  ImputeResult out;
  out.completed = masked;
  Vec col_mean = column_means(masked, mask, out.empty_columns);

  Vec dist(m, 0.0);
  std::vector<std::size_t> order(m);
  std::vector<std::uint8_t> prev_col;
  std::vector<std::size_t> chosen;

  for (std::size_t i = 0; i < m; ++i) {
    const std::uint8_t* mrow = mask.row(i);
    bool any_missing = false;
    for (std::size_t c = 0; c < n; ++c) any_missing = any_missing || !mrow[c];
    if (!any_missing) continue;

    // one distance pass per row with missing entries, reused for all its gaps
    for (std::size_t r = 0; r < m; ++r) {
      if (r == i) {
        dist[r] = std::numeric_limits<double>::infinity();
        continue;
      }
      const std::uint8_t* rrow = mask.row(r);
      double acc = 0.0;
      std::size_t shared = 0;
      for (std::size_t c = 0; c < n; ++c) {
        if (mrow[c] && rrow[c]) {
          const double d = masked.at(i, c) - masked.at(r, c);
          acc += d * d;
          ++shared;
        }
      }
      dist[r] = shared ? acc / static_cast<double>(shared)
                       : std::numeric_limits<double>::infinity();
    }

    prev_col.clear();
    for (std::size_t c = 0; c < n; ++c) {
      if (mrow[c]) continue;
      std::vector<std::uint8_t> col(m);
      for (std::size_t r = 0; r < m; ++r) col[r] = mask.at(r, c);
      if (col != prev_col) {
        order.clear();
        for (std::size_t r = 0; r < m; ++r)
          if (col[r]) order.push_back(r);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                           if (dist[a] != dist[b]) return dist[a] < dist[b];
                           return a < b;
                         });
        chosen.assign(order.begin(),
                      order.begin() +
                          static_cast<std::ptrdiff_t>(std::min(k, order.size())));
        prev_col = col;
      }
      double v;
      if (chosen.empty()) {
        v = col_mean[c];
      } else {
        double sum = 0.0;
        for (std::size_t r : chosen) sum += masked.at(r, c);
        v = sum / static_cast<double>(chosen.size());
      }
      out.completed.at(i, c) = v;
      ++out.fill_count;
    }
  }
  return out;
}

ErrorTrace solve_imputed(const DenseMatrix& completed, const Vec& y,
                         const Vec& x_star, SolverConfig cfg) {
  LinearSystem sys;
  sys.A = completed;
  sys.y = y;
  sys.x_star = x_star;
  cfg.method = Method::sgd;
  cfg.model.p = 1.0;
  cfg.fixed_mask = nullptr;
  return run_solver(sys, cfg);
}

}  // namespace tmsgd
