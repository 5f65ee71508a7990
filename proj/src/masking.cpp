#include "ecct/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ecct {

MaskMatrix::MaskMatrix(std::size_t size, std::vector<std::uint8_t> omega)
    : size_(size), omega_(std::move(omega)), support_(size) {
  if (size_ == 0) throw std::invalid_argument("mask size must be positive");
  if (omega_.size() != size_ * size_) throw std::invalid_argument("mask grid must be L x L");
  for (std::size_t i = 0; i < size_; ++i) {
    if (!allowed(i, i)) throw std::invalid_argument("mask diagonal must be preserved");
    for (std::size_t j = 0; j < size_; ++j) {
      if (allowed(i, j) != allowed(j, i)) throw std::invalid_argument("mask must be symmetric");
      if (allowed(i, j)) support_[i].push_back(static_cast<std::uint32_t>(j));
    }
  }
}

MaskMatrix MaskMatrix::full(std::size_t size) {
  return MaskMatrix(size, std::vector<std::uint8_t>(size * size, 1));
}

MaskMatrix MaskMatrix::identity(std::size_t size) {
  std::vector<std::uint8_t> g(size * size, 0);
  for (std::size_t i = 0; i < size; ++i) g[i * size + i] = 1;
  return MaskMatrix(size, std::move(g));
}

bool MaskMatrix::is_full() const {
  return std::all_of(omega_.begin(), omega_.end(), [](auto v) { return v != 0; });
}

MaskMatrix build_mask(const ParityCheckMatrix& h) {
  const std::size_t n = h.cols(), r = h.rows(), L = n + r;
  std::vector<std::uint8_t> g(L * L, 0);
  for (std::size_t i = 0; i < L; ++i) g[i * L + i] = 1;
  for (std::size_t c = 0; c < r; ++c) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!h(c, j)) continue;
      g[(n + c) * L + j] = 1;
      g[j * L + n + c] = 1;
      for (std::size_t k = 0; k < n; ++k) {
        if (h(c, k)) {
          g[j * L + k] = 1;
          g[k * L + j] = 1;
        }
      }
    }
  }
  return MaskMatrix(L, std::move(g));
}

SparsityProfile sparsity(const MaskMatrix& mask) {
  SparsityProfile p;
  p.row_counts.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) p.row_counts[i] = mask.row(i).size();
  p.P = *std::max_element(p.row_counts.begin(), p.row_counts.end());
  const auto total = std::accumulate(p.row_counts.begin(), p.row_counts.end(), std::size_t{0});
  p.density = static_cast<double>(total) / static_cast<double>(mask.size() * mask.size());
  return p;
}

double contraction_factor(std::size_t P, std::size_t L, std::size_t T) {
  if (P < 1 || L < 1 || T < 1) throw std::invalid_argument("contraction_factor: P, L, T must be >= 1");
  if (P > L) throw std::invalid_argument("contraction_factor: P exceeds L");
  // Extended precision keeps the rounding of P / L from being raised to the power T / 2.
  const long double ratio = static_cast<long double>(P) / static_cast<long double>(L);
  return static_cast<double>(std::pow(ratio, static_cast<long double>(T) / 2.0L));
}

void write_mask_grid(std::ostream& out, const MaskMatrix& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t j = 0; j < mask.size(); ++j) out << (j ? " " : "") << (mask.allowed(i, j) ? 1 : 0);
    out << '\n';
  }
}

void write_mask_pairs(std::ostream& out, const MaskMatrix& mask) {
  out << "i,j\n";
  for (std::size_t i = 0; i < mask.size(); ++i)
    for (auto j : mask.row(i)) out << i << ',' << j << '\n';
}

}  // namespace ecct
