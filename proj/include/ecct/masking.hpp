#pragma once

#include "ecct/codes.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace ecct {

/// Attention support Omega over an L-length sequence. Entry (i, j) true means
/// position i may attend to j. Holds both a dense grid and per-row index lists.
class MaskMatrix {
 public:
  /// Validates symmetry, a full diagonal and nonempty rows.
  MaskMatrix(std::size_t size, std::vector<std::uint8_t> omega);

  static MaskMatrix full(std::size_t size);
  static MaskMatrix identity(std::size_t size);

  std::size_t size() const { return size_; }
  bool allowed(std::size_t i, std::size_t j) const { return omega_[i * size_ + j] != 0; }
  std::span<const std::uint32_t> row(std::size_t i) const { return support_[i]; }
  const std::vector<std::uint8_t>& omega() const { return omega_; }
  bool is_full() const;

  friend bool operator==(const MaskMatrix& a, const MaskMatrix& b) {
    return a.size_ == b.size_ && a.omega_ == b.omega_;
  }

 private:
  std::size_t size_;
  std::vector<std::uint8_t> omega_;
  std::vector<std::vector<std::uint32_t>> support_;
};

struct SparsityProfile {
  std::size_t P = 0;
  std::vector<std::size_t> row_counts;
  double density = 0.0;
};

/// Omega from the parity-check structure: the diagonal, bit-check incidences
/// (both directions) and bit pairs sharing a check.
MaskMatrix build_mask(const ParityCheckMatrix& h);

SparsityProfile sparsity(const MaskMatrix& mask);

/// (P / L)^(T / 2).
double contraction_factor(std::size_t P, std::size_t L, std::size_t T);

/// L lines of L space-separated 0/1 digits (1 = preserved).
void write_mask_grid(std::ostream& out, const MaskMatrix& mask);
/// CSV with header "i,j", one row per preserved pair.
void write_mask_pairs(std::ostream& out, const MaskMatrix& mask);

}  // namespace ecct
