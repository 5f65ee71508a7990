#include "ecct/codes.hpp"

#include "ecct/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ecct {

ParityCheckMatrix::ParityCheckMatrix(std::size_t rows, std::size_t cols, Bits entries,
                                     std::string name)
    : r_(rows), n_(cols), entries_(std::move(entries)), name_(std::move(name)) {
  if (r_ < 1 || n_ < 2) throw std::invalid_argument("parity-check matrix needs r >= 1 and n >= 2");
  if (entries_.size() != r_ * n_) throw std::invalid_argument("entry count does not match r x n");
  for (auto e : entries_)
    if (e > 1) throw std::invalid_argument("parity-check entries must be 0 or 1");
}

std::size_t ParityCheckMatrix::ones() const {
  return static_cast<std::size_t>(std::count(entries_.begin(), entries_.end(), 1));
}

std::vector<std::size_t> ParityCheckMatrix::row_weights() const {
  std::vector<std::size_t> w(r_, 0);
  for (std::size_t i = 0; i < r_; ++i)
    for (std::size_t j = 0; j < n_; ++j) w[i] += (*this)(i, j);
  return w;
}

std::vector<std::size_t> ParityCheckMatrix::col_weights() const {
  std::vector<std::size_t> w(n_, 0);
  for (std::size_t i = 0; i < r_; ++i)
    for (std::size_t j = 0; j < n_; ++j) w[j] += (*this)(i, j);
  return w;
}

namespace {

// Reduced row echelon form over GF(2), leftmost available pivot per row.
struct Echelon {
  std::vector<Bits> rows;
  std::vector<std::size_t> pivots;  // pivot column of each reduced row
};

Echelon reduce(const ParityCheckMatrix& h) {
  const std::size_t r = h.rows(), n = h.cols();
  std::vector<Bits> m(r, Bits(n));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = h(i, j);

  Echelon out;
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < r; ++col) {
    std::size_t sel = row;
    while (sel < r && m[sel][col] == 0) ++sel;
    if (sel == r) continue;
    std::swap(m[row], m[sel]);
    for (std::size_t i = 0; i < r; ++i) {
      if (i != row && m[i][col]) {
        for (std::size_t j = 0; j < n; ++j) m[i][j] ^= m[row][j];
      }
    }
    out.pivots.push_back(col);
    ++row;
  }
  m.resize(row);
  out.rows = std::move(m);
  return out;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

std::vector<long long> parse_ints(const std::string& line, std::size_t lineno) {
  std::istringstream in(line);
  std::vector<long long> out;
  std::string tok;
  while (in >> tok) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
      throw ParseError("expected an integer, got '" + tok + "'", lineno);
    }
    if (pos != tok.size()) throw ParseError("expected an integer, got '" + tok + "'", lineno);
    out.push_back(v);
  }
  return out;
}

// Cursor over non-blank lines that remembers 1-based line numbers.
class LineCursor {
 public:
  explicit LineCursor(std::string_view text) : lines_(split_lines(text)) {}

  bool next(std::vector<long long>& values, std::size_t& lineno) {
    while (pos_ < lines_.size()) {
      lineno = pos_ + 1;
      const auto& line = lines_[pos_++];
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      values = parse_ints(line, lineno);
      return true;
    }
    lineno = lines_.size() + 1;
    return false;
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t ParityCheckMatrix::rank() const { return reduce(*this).pivots.size(); }

ParityCheckMatrix ParityCheckMatrix::renamed(std::string name) const {
  return ParityCheckMatrix(r_, n_, entries_, std::move(name));
}

Bits GeneratorMatrix::encode(std::span<const std::uint8_t> message) const {
  if (message.size() != k) throw std::invalid_argument("message length must equal k");
  Bits cw(n, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (!message[i]) continue;
    for (std::size_t j = 0; j < n; ++j) cw[j] ^= (*this)(i, j);
  }
  return cw;
}

ParityCheckMatrix parse_alist(std::string_view text, std::string name) {
  LineCursor cur(text);
  std::vector<long long> v;
  std::size_t ln = 0;

  if (!cur.next(v, ln)) throw ParseError("missing header 'n r'", ln);
  if (v.size() != 2 || v[0] < 2 || v[1] < 1) throw ParseError("malformed header, expected 'n r'", ln);
  const auto n = static_cast<std::size_t>(v[0]);
  const auto r = static_cast<std::size_t>(v[1]);

  if (!cur.next(v, ln)) throw ParseError("missing maximum degrees", ln);
  if (v.size() != 2 || v[0] < 0 || v[1] < 0) throw ParseError("malformed maximum degree line", ln);
  const auto max_col = static_cast<std::size_t>(v[0]);
  const auto max_row = static_cast<std::size_t>(v[1]);

  auto read_degrees = [&](std::size_t count, std::size_t max_deg, const char* what) {
    if (!cur.next(v, ln)) throw ParseError(std::string("missing ") + what + " degree list", ln);
    if (v.size() != count)
      throw ParseError(std::string(what) + " degree list has " + std::to_string(v.size()) +
                           " entries, expected " + std::to_string(count),
                       ln);
    std::vector<std::size_t> deg;
    for (auto d : v) {
      if (d < 0 || static_cast<std::size_t>(d) > max_deg)
        throw ParseError(std::string(what) + " degree out of range", ln);
      deg.push_back(static_cast<std::size_t>(d));
    }
    return deg;
  };
  const auto col_deg = read_degrees(n, max_col, "column");
  const auto row_deg = read_degrees(r, max_row, "row");

  Bits entries(r * n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!cur.next(v, ln)) throw ParseError("missing adjacency list for column " + std::to_string(j + 1), ln);
    std::size_t count = 0;
    for (auto idx : v) {
      if (idx == 0) continue;
      if (idx < 1 || static_cast<std::size_t>(idx) > r)
        throw ParseError("row index " + std::to_string(idx) + " out of range [1, " + std::to_string(r) + "]", ln);
      auto& e = entries[(static_cast<std::size_t>(idx) - 1) * n + j];
      if (e) throw ParseError("duplicate row index " + std::to_string(idx), ln);
      e = 1;
      ++count;
    }
    if (count != col_deg[j])
      throw ParseError("column " + std::to_string(j + 1) + " lists " + std::to_string(count) +
                           " entries, degree says " + std::to_string(col_deg[j]),
                       ln);
  }
  for (std::size_t i = 0; i < r; ++i) {
    if (!cur.next(v, ln)) throw ParseError("missing adjacency list for row " + std::to_string(i + 1), ln);
    std::set<std::size_t> listed;
    for (auto idx : v) {
      if (idx == 0) continue;
      if (idx < 1 || static_cast<std::size_t>(idx) > n)
        throw ParseError("column index " + std::to_string(idx) + " out of range [1, " + std::to_string(n) + "]", ln);
      if (!listed.insert(static_cast<std::size_t>(idx) - 1).second)
        throw ParseError("duplicate column index " + std::to_string(idx), ln);
    }
    if (listed.size() != row_deg[i])
      throw ParseError("row " + std::to_string(i + 1) + " lists " + std::to_string(listed.size()) +
                           " entries, degree says " + std::to_string(row_deg[i]),
                       ln);
    for (std::size_t j = 0; j < n; ++j) {
      if ((entries[i * n + j] != 0) != (listed.count(j) != 0))
        throw ParseError("row " + std::to_string(i + 1) + " adjacency disagrees with column lists", ln);
    }
  }
  return ParityCheckMatrix(r, n, std::move(entries), std::move(name));
}

std::string serialize_alist(const ParityCheckMatrix& h) {
  const auto cw = h.col_weights();
  const auto rw = h.row_weights();
  const auto max_c = *std::max_element(cw.begin(), cw.end());
  const auto max_r = *std::max_element(rw.begin(), rw.end());
  std::ostringstream out;
  auto write_list = [&out](const std::vector<std::size_t>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) out << (i ? " " : "") << xs[i];
    out << '\n';
  };
  out << h.cols() << ' ' << h.rows() << '\n' << max_c << ' ' << max_r << '\n';
  write_list(cw);
  write_list(rw);
  for (std::size_t j = 0; j < h.cols(); ++j) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < h.rows(); ++i)
      if (h(i, j)) idx.push_back(i + 1);
    idx.resize(max_c, 0);
    write_list(idx);
  }
  for (std::size_t i = 0; i < h.rows(); ++i) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < h.cols(); ++j)
      if (h(i, j)) idx.push_back(j + 1);
    idx.resize(max_r, 0);
    write_list(idx);
  }
  return out.str();
}

ParityCheckMatrix parse_dense(std::string_view text, std::string name) {
  const auto lines = split_lines(text);
  Bits entries;
  std::size_t n = 0, r = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::istringstream in(lines[li]);
    std::string tok;
    std::size_t count = 0;
    while (in >> tok) {
      if (tok != "0" && tok != "1") throw ParseError("non-binary token '" + tok + "'", li + 1);
      entries.push_back(tok == "1");
      ++count;
    }
    if (count == 0) continue;
    if (r == 0) n = count;
    else if (count != n)
      throw ParseError("ragged row: " + std::to_string(count) + " entries, expected " + std::to_string(n), li + 1);
    ++r;
  }
  if (r == 0) throw ParseError("empty matrix", lines.size() + 1);
  if (n < 2) throw ParseError("matrix needs at least 2 columns", 1);
  return ParityCheckMatrix(r, n, std::move(entries), std::move(name));
}

std::string serialize_dense(const ParityCheckMatrix& h) {
  std::ostringstream out;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) out << (j ? " " : "") << int(h(i, j));
    out << '\n';
  }
  return out.str();
}

ParityCheckMatrix hamming_7_4() {
  return ParityCheckMatrix(3, 7,
                           {1, 1, 1, 0, 1, 0, 0,  //
                            1, 1, 0, 1, 0, 1, 0,  //
                            1, 0, 1, 1, 0, 0, 1},
                           "hamming74");
}

Bits syndrome(const ParityCheckMatrix& h, std::span<const std::uint8_t> bits) {
  if (bits.size() != h.cols())
    throw std::invalid_argument("syndrome: word length " + std::to_string(bits.size()) +
                                " != n = " + std::to_string(h.cols()));
  Bits s(h.rows(), 0);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    std::uint8_t acc = 0;
    for (std::size_t j = 0; j < h.cols(); ++j) acc ^= static_cast<std::uint8_t>(h(i, j) & bits[j]);
    s[i] = acc;
  }
  return s;
}

GeneratorMatrix derive_generator(const ParityCheckMatrix& h) {
  const auto ech = reduce(h);
  const std::size_t rank = ech.pivots.size();
  if (rank < h.rows()) throw RankError(rank, h.rows());

  const std::size_t n = h.cols();
  std::vector<bool> is_pivot(n, false);
  for (auto p : ech.pivots) is_pivot[p] = true;

  GeneratorMatrix g;
  g.n = n;
  g.k = n - rank;
  g.entries.reserve(g.k * n);
  // One basis codeword per free column: set it, solve pivot bits from the RREF.
  for (std::size_t f = 0; f < n; ++f) {
    if (is_pivot[f]) continue;
    Bits cw(n, 0);
    cw[f] = 1;
    for (std::size_t i = 0; i < rank; ++i) cw[ech.pivots[i]] = ech.rows[i][f];
    g.entries.insert(g.entries.end(), cw.begin(), cw.end());
  }
  return g;
}

ParityCheckMatrix random_regular_code(std::size_t n, std::size_t r, std::size_t col_weight,
                                      std::uint64_t seed, int max_retries) {
  if (col_weight < 2) throw std::invalid_argument("random_regular_code: col_weight must be >= 2");
  if (col_weight > r) throw std::invalid_argument("random_regular_code: col_weight exceeds r");
  if (r >= n) throw std::invalid_argument("random_regular_code: need r < n");
  if ((n * col_weight) % r != 0)
    throw std::invalid_argument("random_regular_code: n * col_weight must be divisible by r");
  if (col_weight % 2 == 0)
    throw std::invalid_argument(
        "random_regular_code: even column weight makes the rows sum to zero, full rank is infeasible");

  const std::size_t row_weight = n * col_weight / r;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<std::size_t> sockets;
    sockets.reserve(n * col_weight);
    for (std::size_t i = 0; i < r; ++i) sockets.insert(sockets.end(), row_weight, i);
    std::shuffle(sockets.begin(), sockets.end(), rng);

    // Repair repeated rows within a column by swapping sockets with other columns.
    auto column_ok = [&](std::size_t c) {
      for (std::size_t a = 0; a < col_weight; ++a)
        for (std::size_t b = a + 1; b < col_weight; ++b)
          if (sockets[c * col_weight + a] == sockets[c * col_weight + b]) return false;
      return true;
    };
    std::uniform_int_distribution<std::size_t> pick(0, sockets.size() - 1);
    bool ok = true;
    for (std::size_t c = 0; c < n && ok; ++c) {
      int guard = 0;
      while (!column_ok(c)) {
        if (++guard > 10000) {
          ok = false;
          break;
        }
        const std::size_t a = c * col_weight + pick(rng) % col_weight;
        const std::size_t b = pick(rng);
        const std::size_t cb = b / col_weight;
        std::swap(sockets[a], sockets[b]);
        if (cb != c && !column_ok(cb)) std::swap(sockets[a], sockets[b]);
      }
    }
    if (!ok) continue;

    Bits entries(r * n, 0);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t a = 0; a < col_weight; ++a) entries[sockets[c * col_weight + a] * n + c] = 1;
    ParityCheckMatrix h(r, n, std::move(entries),
                        "regular_" + std::to_string(n) + "_" + std::to_string(r) + "_" +
                            std::to_string(col_weight) + "_s" + std::to_string(seed));
    const auto rw = h.row_weights();
    if (std::find(rw.begin(), rw.end(), 0u) != rw.end()) continue;
    if (h.rank() < r) continue;
    return h;
  }
  throw std::runtime_error("random_regular_code: retries exhausted without a full-rank matrix");
}

CodeFormat parse_code_format(const std::string& s) {
  if (s == "auto") return CodeFormat::auto_detect;
  if (s == "alist") return CodeFormat::alist;
  if (s == "dense") return CodeFormat::dense;
  throw std::invalid_argument("unknown code format '" + s + "' (expected auto, alist or dense)");
}

ParityCheckMatrix load_code(const std::string& spec, CodeFormat format) {
  if (spec == "hamming74" || spec == "hamming_7_4") return hamming_7_4();
  if (spec.rfind("regular:", 0) == 0) {
    std::vector<std::uint64_t> parts;
    std::istringstream in(spec.substr(8));
    std::string tok;
    while (std::getline(in, tok, ':')) parts.push_back(std::stoull(tok));
    if (parts.size() != 4) throw std::invalid_argument("expected regular:n:r:col_weight:seed");
    return random_regular_code(parts[0], parts[1], parts[2], parts[3]);
  }
  std::ifstream file(spec);
  if (!file) throw std::runtime_error("cannot open code file '" + spec + "'");
  std::stringstream buf;
  buf << file.rdbuf();
  const bool alist = format == CodeFormat::alist ||
                     (format == CodeFormat::auto_detect && spec.size() >= 6 && spec.substr(spec.size() - 6) == ".alist");
  try {
    return alist ? parse_alist(buf.str(), spec) : parse_dense(buf.str(), spec);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), spec);
  }
}

}  // namespace ecct
