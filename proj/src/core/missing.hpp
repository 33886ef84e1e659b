#pragma once

#include <cstdint>
#include <vector>

#include "core/dense.hpp"
#include "core/rng.hpp"

namespace tmsgd {

// Tuple-missing model: each row of length n splits into n/ell contiguous
// tuples; every tuple is independently present with probability p, otherwise
// all its entries are zeroed. p = 1 means fully observed; p = 0 is rejected
// because the corrected updates divide by p.
struct TupleMissingModel {
  std::size_t ell = 1;
  double p = 1.0;
};

void validate_model(const TupleMissingModel& model, std::size_t n);

// 0/1 presence mask per entry, row-major. Tuple-constant by construction when
// produced by the samplers here.
struct MaskMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  MaskMatrix() = default;
  MaskMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), bits(r * c, 1) {}
  std::uint8_t* row(std::size_t i) { return bits.data() + i * cols; }
  const std::uint8_t* row(std::size_t i) const { return bits.data() + i * cols; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * cols + j]; }
};

// One Bernoulli draw per tuple, left to right; the draw happens even when the
// outcome is forced (p = 1) so paired-seed runs stay aligned.
void sample_mask_row(const TupleMissingModel& model, std::size_t n, Rng& rng,
                     std::uint8_t* out);

MaskMatrix sample_mask_matrix(const TupleMissingModel& model, std::size_t m,
                              std::size_t n, Rng& rng);

void apply_mask_row(const double* row, const std::uint8_t* mask, std::size_t n,
                    double* out);

// Hadamard product D (.) A for a full mask matrix.
DenseMatrix apply_mask(const DenseMatrix& A, const MaskMatrix& mask);

// n x n block-diagonal matrix of ones with ell x ell blocks. L = I at ell = 1
// and the all-ones matrix at ell = n.
DenseMatrix build_L(std::size_t n, std::size_t ell);

// Exhaustive tuple presence patterns with their probabilities.
// Capped at n/ell <= 20 patterns to keep enumeration exact and bounded.
struct MaskEnumeration {
  std::vector<std::vector<std::uint8_t>> masks;  // each of length n
  std::vector<double> probs;
};

MaskEnumeration enumerate_masks(std::size_t n, std::size_t ell, double p);

}  // namespace tmsgd
