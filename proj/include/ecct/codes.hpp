#pragma once

#include "ecct/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecct {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line, const std::string& source = "")
      : std::runtime_error((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " + msg),
        message_(msg),
        line_(line) {}
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::size_t line_;
};

class RankError : public std::runtime_error {
 public:
  RankError(std::size_t rank, std::size_t rows)
      : std::runtime_error("parity-check matrix is rank deficient: rank " + std::to_string(rank) +
                           " < " + std::to_string(rows) + " rows"),
        rank_(rank) {}
  std::size_t rank() const { return rank_; }

 private:
  std::size_t rank_;
};

/// Binary r x n parity-check matrix. Immutable after construction.
class ParityCheckMatrix {
 public:
  ParityCheckMatrix(std::size_t rows, std::size_t cols, Bits entries, std::string name = "H");

  std::size_t rows() const { return r_; }
  std::size_t cols() const { return n_; }
  /// ECCT sequence length n + r.
  std::size_t seq_len() const { return n_ + r_; }
  const std::string& name() const { return name_; }

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  const Bits& entries() const { return entries_; }

  std::size_t ones() const;
  std::vector<std::size_t> row_weights() const;
  std::vector<std::size_t> col_weights() const;

  /// GF(2) rank; the code dimension is k = n - rank.
  std::size_t rank() const;
  std::size_t dimension() const { return n_ - rank(); }
  double rate() const { return static_cast<double>(dimension()) / static_cast<double>(n_); }

  ParityCheckMatrix renamed(std::string name) const;

  friend bool operator==(const ParityCheckMatrix& a, const ParityCheckMatrix& b) {
    return a.r_ == b.r_ && a.n_ == b.n_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t r_;
  std::size_t n_;
  Bits entries_;
  std::string name_;
};

struct GeneratorMatrix {
  std::size_t k = 0;
  std::size_t n = 0;
  Bits entries;  // row-major k x n

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
  /// Codeword u*G over GF(2).
  Bits encode(std::span<const std::uint8_t> message) const;
};

/// MacKay alist layout, 1-based indices, zero padding allowed.
ParityCheckMatrix parse_alist(std::string_view text, std::string name = "alist");
std::string serialize_alist(const ParityCheckMatrix& h);

/// r lines of n whitespace-separated 0/1 tokens. Blank lines are skipped.
ParityCheckMatrix parse_dense(std::string_view text, std::string name = "dense");
std::string serialize_dense(const ParityCheckMatrix& h);

/// The pinned systematic (7,4) Hamming matrix.
ParityCheckMatrix hamming_7_4();

Bits syndrome(const ParityCheckMatrix& h, std::span<const std::uint8_t> bits);

/// Generator for the null space of H, in the original bit order.
/// Throws RankError when H does not have full row rank.
GeneratorMatrix derive_generator(const ParityCheckMatrix& h);

/// Column-regular random LDPC matrix, rows balanced. Regenerates until every
/// row is nonempty and H has full rank.
ParityCheckMatrix random_regular_code(std::size_t n, std::size_t r, std::size_t col_weight,
                                      std::uint64_t seed, int max_retries = 1000);

enum class CodeFormat { auto_detect, alist, dense };
CodeFormat parse_code_format(const std::string& s);

/// Resolves "hamming74" or "regular:n:r:w:seed" or a file path (.alist or dense text).
ParityCheckMatrix load_code(const std::string& spec, CodeFormat format = CodeFormat::auto_detect);

}  // namespace ecct
