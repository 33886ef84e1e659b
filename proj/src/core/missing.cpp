#include "core/missing.hpp"

#include <cmath>

#include "core/util.hpp"

namespace tmsgd {

void validate_model(const TupleMissingModel& model, std::size_t n) {
  check_arg(model.ell >= 1, "ell must be >= 1");
  check_arg(n >= 1, "n must be >= 1");
  check_arg(n % model.ell == 0, "ell must divide n");
  check_arg(model.p > 0.0 && model.p <= 1.0, "p must be in (0, 1]");
}

void sample_mask_row(const TupleMissingModel& model, std::size_t n, Rng& rng,
                     std::uint8_t* out) {
  const std::size_t tuples = n / model.ell;
  for (std::size_t t = 0; t < tuples; ++t) {
    const std::uint8_t present = rng.bernoulli(model.p) ? 1 : 0;
    for (std::size_t c = t * model.ell; c < (t + 1) * model.ell; ++c)
      out[c] = present;
  }
}

MaskMatrix sample_mask_matrix(const TupleMissingModel& model, std::size_t m,
                              std::size_t n, Rng& rng) {
  validate_model(model, n);
  check_arg(m >= 1, "m must be >= 1");
  MaskMatrix mask(m, n);
  for (std::size_t i = 0; i < m; ++i) sample_mask_row(model, n, rng, mask.row(i));
  return mask;
}

void apply_mask_row(const double* row, const std::uint8_t* mask, std::size_t n,
                    double* out) {
  for (std::size_t c = 0; c < n; ++c) out[c] = mask[c] ? row[c] : 0.0;
}

DenseMatrix apply_mask(const DenseMatrix& A, const MaskMatrix& mask) {
  check_arg(A.rows == mask.rows && A.cols == mask.cols,
            "mask dimensions must match the matrix");
  DenseMatrix out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    apply_mask_row(A.row(i), mask.row(i), A.cols, out.row(i));
  return out;
}

DenseMatrix build_L(std::size_t n, std::size_t ell) {
  check_arg(ell >= 1 && n >= 1, "n and ell must be >= 1");
  check_arg(n % ell == 0, "ell must divide n");
  DenseMatrix L(n, n);
  for (std::size_t t = 0; t < n / ell; ++t)
    for (std::size_t a = t * ell; a < (t + 1) * ell; ++a)
      for (std::size_t b = t * ell; b < (t + 1) * ell; ++b) L.at(a, b) = 1.0;
  return L;
}

MaskEnumeration enumerate_masks(std::size_t n, std::size_t ell, double p) {
  TupleMissingModel model{ell, p};
  validate_model(model, n);
  const std::size_t tuples = n / ell;
  check_arg(tuples <= 20, "enumeration capped at n/ell <= 20 tuples");
  MaskEnumeration e;
  const std::size_t count = std::size_t{1} << tuples;
  e.masks.reserve(count);
  e.probs.reserve(count);
  for (std::size_t bitsv = 0; bitsv < count; ++bitsv) {
    std::vector<std::uint8_t> mask(n, 0);
    double prob = 1.0;
    for (std::size_t t = 0; t < tuples; ++t) {
      const bool present = (bitsv >> t) & 1u;
      prob *= present ? p : (1.0 - p);
      if (present)
        for (std::size_t c = t * ell; c < (t + 1) * ell; ++c) mask[c] = 1;
    }
    e.masks.push_back(std::move(mask));
    e.probs.push_back(prob);
  }
  return e;
}

}  // namespace tmsgd
