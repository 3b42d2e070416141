#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace beamcode {

/// Dense 0/1 matrix over GF(2), row-major storage.
class BinaryMatrix {
 public:
  BinaryMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1)
      throw std::invalid_argument("BinaryMatrix: dimensions must be >= 1");
    bits_.assign(static_cast<std::size_t>(rows) * cols, 0);
  }

  static BinaryMatrix identity(int n) {
    BinaryMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.set(i, i, 1);
    return m;
  }

  static BinaryMatrix from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    BinaryMatrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw std::invalid_argument("BinaryMatrix::from_rows: ragged rows");
      int j = 0;
      for (int v : row) m.set(i, j++, v);
      ++i;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  std::uint8_t operator()(int i, int j) const { return bits_[idx(i, j)]; }

  void set(int i, int j, int v) {
    if (v != 0 && v != 1) throw std::invalid_argument("BinaryMatrix: entries must be 0 or 1");
    bits_[idx(i, j)] = static_cast<std::uint8_t>(v);
  }

  int row_weight(int i) const {
    int w = 0;
    for (int j = 0; j < cols_; ++j) w += (*this)(i, j);
    return w;
  }

  int max_row_weight() const {
    int w = 0;
    for (int i = 0; i < rows_; ++i) w = std::max(w, row_weight(i));
    return w;
  }

  double mean_row_weight() const {
    long total = 0;
    for (int i = 0; i < rows_; ++i) total += row_weight(i);
    return static_cast<double>(total) / rows_;
  }

  void swap_rows(int a, int b) {
    if (a == b) return;
    for (int j = 0; j < cols_; ++j) std::swap(bits_[idx(a, j)], bits_[idx(b, j)]);
  }

  void swap_cols(int a, int b) {
    if (a == b) return;
    for (int i = 0; i < rows_; ++i) std::swap(bits_[idx(i, a)], bits_[idx(i, b)]);
  }

  void xor_row(int dst, int src) {
    for (int j = 0; j < cols_; ++j) bits_[idx(dst, j)] ^= bits_[idx(src, j)];
  }

  /// Column j as a bit mask with bit i = entry (i, j). Requires rows <= 64.
  std::vector<std::uint64_t> column_masks() const {
    if (rows_ > 64)
      throw std::invalid_argument("BinaryMatrix::column_masks: more than 64 rows");
    std::vector<std::uint64_t> out(cols_, 0);
    for (int j = 0; j < cols_; ++j)
      for (int i = 0; i < rows_; ++i)
        if ((*this)(i, j)) out[j] |= (std::uint64_t{1} << i);
    return out;
  }

  /// Entries reinterpreted as real 0/1 scalars.
  Eigen::MatrixXd to_real() const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  bool operator==(const BinaryMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && bits_ == other.bits_;
  }

  // Plain-text format: first line "m n", then m lines of n space-separated 0/1 digits.
  std::string to_text() const {
    std::ostringstream out;
    out << rows_ << ' ' << cols_ << '\n';
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        if (j) out << ' ';
        out << int((*this)(i, j));
      }
      out << '\n';
    }
    return out.str();
  }

  static BinaryMatrix from_text(std::istream& in) {
    int r = 0, c = 0;
    if (!(in >> r >> c) || r < 1 || c < 1)
      throw std::runtime_error("BinaryMatrix::from_text: bad header");
    BinaryMatrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        int v;
        if (!(in >> v)) throw std::runtime_error("BinaryMatrix::from_text: truncated matrix body");
        if (v != 0 && v != 1) throw std::runtime_error("BinaryMatrix::from_text: entries must be 0 or 1");
        m.set(i, j, v);
      }
    return m;
  }

  static BinaryMatrix load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("BinaryMatrix::load: cannot open " + path);
    return from_text(in);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("BinaryMatrix::save: cannot open " + path);
    out << to_text();
  }

 private:
  std::size_t idx(int i, int j) const {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
      throw std::out_of_range("BinaryMatrix: index out of range");
    return static_cast<std::size_t>(i) * cols_ + j;
  }

  int rows_, cols_;
  std::vector<std::uint8_t> bits_;
};

/// Index set of the nonzero entries of a length-n vector, strictly increasing.
struct SupportVector {
  int length = 0;
  std::vector<int> ones;

  int weight() const { return static_cast<int>(ones.size()); }

  static SupportVector of(int length, std::vector<int> ones) {
    SupportVector s{length, std::move(ones)};
    for (std::size_t k = 0; k < s.ones.size(); ++k) {
      if (s.ones[k] < 0 || s.ones[k] >= length)
        throw std::invalid_argument("SupportVector: index out of range");
      if (k > 0 && s.ones[k] <= s.ones[k - 1])
        throw std::invalid_argument("SupportVector: indices must be strictly increasing");
    }
    return s;
  }

  template <class Derived>
  static SupportVector from_vector(const Eigen::MatrixBase<Derived>& v, double tol = 0.0) {
    std::vector<int> ones;
    for (int i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) > tol) ones.push_back(i);
    return {static_cast<int>(v.size()), std::move(ones)};
  }
};

/// Calls f(support) for every index set of size <= max_size over {0..n-1},
/// ordered by size ascending then lexicographically.
template <class F>
void for_each_support(int n, int max_size, F&& f) {
  std::vector<int> idx;
  f(static_cast<const std::vector<int>&>(idx));  // empty support first
  for (int s = 1; s <= std::min(max_size, n); ++s) {
    idx.resize(s);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      f(static_cast<const std::vector<int>&>(idx));
      int k = s - 1;
      while (k >= 0 && idx[k] == n - s + k) --k;
      if (k < 0) break;
      ++idx[k];
      for (int j = k + 1; j < s; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
}

namespace detail {

inline unsigned __int128 binomial128(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  const unsigned __int128 max128 = ~static_cast<unsigned __int128>(0);
  unsigned __int128 c = 1;
  for (int i = 1; i <= k; ++i) {
    if (c > max128 / static_cast<unsigned>(n))
      throw std::overflow_error("binomial128: value too large");
    c = c * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
  }
  return c;
}

}  // namespace detail

/// Number of supports of size <= max_weight over n positions (zero support included).
/// Throws std::overflow_error if the exact count does not fit 64 bits.
inline std::uint64_t support_count(int n, int max_weight) {
  const unsigned __int128 max128 = ~static_cast<unsigned __int128>(0);
  unsigned __int128 total = 0;
  for (int i = 0; i <= std::min(max_weight, n); ++i) {
    const unsigned __int128 b = detail::binomial128(n, i);
    if (total > max128 - b) throw std::overflow_error("support_count: value too large");
    total += b;
  }
  if (total > std::numeric_limits<std::uint64_t>::max())
    throw std::overflow_error("support_count: value too large");
  return static_cast<std::uint64_t>(total);
}

/// GF(2) row rank by Gaussian elimination on bit-packed rows.
inline int rank_gf2(const BinaryMatrix& m) {
  const int words = (m.cols() + 63) / 64;
  std::vector<std::uint64_t> rows(static_cast<std::size_t>(m.rows()) * words, 0);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m(i, j)) rows[static_cast<std::size_t>(i) * words + j / 64] |= std::uint64_t{1} << (j % 64);

  auto bit = [&](int row, int col) {
    return (rows[static_cast<std::size_t>(row) * words + col / 64] >> (col % 64)) & 1u;
  };
  auto xor_into = [&](int dst, int src) {
    for (int w = 0; w < words; ++w)
      rows[static_cast<std::size_t>(dst) * words + w] ^= rows[static_cast<std::size_t>(src) * words + w];
  };

  int rank = 0;
  for (int col = 0; col < m.cols() && rank < m.rows(); ++col) {
    int pivot = -1;
    for (int r = rank; r < m.rows(); ++r)
      if (bit(r, col)) { pivot = r; break; }
    if (pivot < 0) continue;
    for (int w = 0; w < words; ++w)
      std::swap(rows[static_cast<std::size_t>(pivot) * words + w],
                rows[static_cast<std::size_t>(rank) * words + w]);
    for (int r = 0; r < m.rows(); ++r)
      if (r != rank && bit(r, col)) xor_into(r, rank);
    ++rank;
  }
  return rank;
}

/// r x (2^r - 1) matrix whose columns are all distinct nonzero binary
/// r-vectors, ordered by increasing integer value (row 0 holds the most
/// significant bit). Column j maps measurement rows to angular bin j.
inline BinaryMatrix hamming_parity_check(int r) {
  if (r < 2) throw std::invalid_argument("hamming_parity_check: r must be >= 2");
  if (r > 24) throw std::invalid_argument("hamming_parity_check: r too large");
  const int n = (1 << r) - 1;
  BinaryMatrix g(r, n);
  for (int j = 0; j < n; ++j) {
    const unsigned value = static_cast<unsigned>(j + 1);
    for (int i = 0; i < r; ++i) g.set(i, j, (value >> (r - 1 - i)) & 1u);
  }
  return g;
}

/// 11x23 parity-check matrix of the (23,12) perfect binary Golay code,
/// assembled in standard form [I_11 | P].
///
/// Construction: the Golay code is cyclic with generator polynomial
/// x^11 + x^9 + x^7 + x^6 + x^5 + x + 1. Row-reducing the 12x23 matrix of
/// its shifts gives a systematic generator [I_12 | A]; [I_11 | A^T] is then
/// a parity-check matrix of the (equivalent, block-swapped) code. Minimum
/// distance 7 makes the weight-<=6 difference vectors all invertible, i.e.
/// the matrix is injective over supports with up to 3 nonzeros.
inline BinaryMatrix golay_parity_check() {
  // coefficients of the generator polynomial, x^0 .. x^11
  static constexpr std::array<int, 12> kGenPoly = {1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0, 1};
  BinaryMatrix gen(12, 23);
  for (int i = 0; i < 12; ++i)
    for (int k = 0; k < 12; ++k) gen.set(i, i + k, kGenPoly[k]);

  // Gauss-Jordan; pivots land on the first 12 columns because the
  // polynomial has a nonzero constant term.
  int row = 0;
  for (int col = 0; col < 23 && row < 12; ++col) {
    int pivot = -1;
    for (int r = row; r < 12; ++r)
      if (gen(r, col)) { pivot = r; break; }
    if (pivot < 0) continue;
    gen.swap_rows(pivot, row);
    for (int r = 0; r < 12; ++r)
      if (r != row && gen(r, col)) gen.xor_row(r, row);
    ++row;
  }
  if (row != 12) throw std::logic_error("golay_parity_check: construction lost rank");

  BinaryMatrix h(11, 23);
  for (int i = 0; i < 11; ++i) h.set(i, i, 1);
  for (int i = 0; i < 11; ++i)
    for (int k = 0; k < 12; ++k) h.set(i, 11 + k, gen(k, 12 + i));
  return h;
}

inline constexpr std::uint64_t kInjectivityBudget = 20'000'000;

/// True iff every nonzero binary vector v with weight(v) <= 2L satisfies
/// G v != 0 over GF(2). Equivalent to the encoding being one-to-one on all
/// supports of weight <= L, since a difference of two distinct supports has
/// weight at most 2L. Throws if the enumeration would exceed `budget`.
inline bool is_injective_over_supports(const BinaryMatrix& g, int l_max,
                                       std::uint64_t budget = kInjectivityBudget) {
  if (l_max < 0 || l_max > g.cols())
    throw std::invalid_argument("is_injective_over_supports: need 0 <= L <= cols");
  if (l_max == 0) return true;

  const int n = g.cols();
  const int max_w = std::min(2 * l_max, n);
  std::uint64_t work = 0;
  try {
    work = support_count(n, max_w) - 1;
  } catch (const std::overflow_error&) {
    work = std::numeric_limits<std::uint64_t>::max();
  }
  if (work > budget)
    throw std::runtime_error(
        "is_injective_over_supports: enumeration budget exceeded (" + std::to_string(work) +
        " difference vectors, budget " + std::to_string(budget) + ")");

  const std::vector<std::uint64_t> cols = g.column_masks();
  // depth-first over index combinations; XOR of the chosen columns is the
  // syndrome of the difference vector
  auto visit = [&](auto&& self, int start, std::uint64_t acc, int remaining) -> bool {
    for (int j = start; j < n; ++j) {
      const std::uint64_t x = acc ^ cols[j];
      if (x == 0) return false;
      if (remaining > 1 && !self(self, j + 1, x, remaining - 1)) return false;
    }
    return true;
  };
  return visit(visit, 0, 0, max_w);
}

/// ceil(log2(sum_{i=0}^{L} C(n, i))), computed with exact integer arithmetic.
/// The smallest number of fixed-rate measurements that can distinguish all
/// supports of weight <= L over n bins.
inline int min_measurements_lower_bound(int n, int l_max) {
  if (n < 1 || l_max < 0 || l_max > n)
    throw std::invalid_argument("min_measurements_lower_bound: need 1 <= n and 0 <= L <= n");
  const unsigned __int128 max128 = ~static_cast<unsigned __int128>(0);
  unsigned __int128 total = 0;
  for (int i = 0; i <= l_max; ++i) {
    const unsigned __int128 b = detail::binomial128(n, i);
    if (total > max128 - b) throw std::overflow_error("min_measurements_lower_bound: count too large");
    total += b;
  }
  int m = 0;
  while (m < 127 && (static_cast<unsigned __int128>(1) << m) < total) ++m;
  return m;
}

struct StandardForm {
  BinaryMatrix matrix;        // [I_m | P]
  std::vector<int> col_perm;  // column k of `matrix` came from input column col_perm[k]
};

/// Reduce a full-row-rank matrix to [I_m | P] by GF(2) row operations plus a
/// recorded column permutation. Throws std::invalid_argument when the input
/// is rank deficient.
inline StandardForm to_standard_form(const BinaryMatrix& g) {
  BinaryMatrix a = g;
  std::vector<int> perm(a.cols());
  std::iota(perm.begin(), perm.end(), 0);

  for (int i = 0; i < a.rows(); ++i) {
    int pr = -1, pc = -1;
    for (int c = i; c < a.cols() && pr < 0; ++c)
      for (int r = i; r < a.rows(); ++r)
        if (a(r, c)) { pr = r; pc = c; break; }
    if (pr < 0) throw std::invalid_argument("to_standard_form: matrix is not full row rank");
    a.swap_rows(i, pr);
    a.swap_cols(i, pc);
    std::swap(perm[i], perm[pc]);
    for (int r = 0; r < a.rows(); ++r)
      if (r != i && a(r, i)) a.xor_row(r, i);
  }
  return {std::move(a), std::move(perm)};
}

/// Smallest singular value of the matrix taken over the reals, computed from
/// the Gram matrix of the smaller dimension with a symmetric eigensolver.
inline double min_singular_value(const BinaryMatrix& g) {
  const Eigen::MatrixXd b = g.to_real();
  const Eigen::MatrixXd gram =
      b.rows() <= b.cols() ? Eigen::MatrixXd(b * b.transpose()) : Eigen::MatrixXd(b.transpose() * b);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("min_singular_value: eigensolver failed");
  return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}

/// Named code selection for a measurement design: a Hamming parity-check
/// matrix, the Golay parity-check matrix, or an explicit matrix.
struct CodeSpec {
  enum class Kind { hamming, golay23, explicit_matrix };

  Kind kind = Kind::golay23;
  int hamming_r = 0;
  std::optional<BinaryMatrix> matrix;
  std::string source;  // how this spec was written in a config, for reporting

  static CodeSpec hamming(int r) {
    if (r < 2) throw std::invalid_argument("CodeSpec::hamming: r must be >= 2");
    CodeSpec s;
    s.kind = Kind::hamming;
    s.hamming_r = r;
    s.source = "hamming:" + std::to_string(r);
    return s;
  }

  static CodeSpec golay23() {
    CodeSpec s;
    s.kind = Kind::golay23;
    s.source = "golay23";
    return s;
  }

  static CodeSpec explicit_matrix(BinaryMatrix m, std::string source = "explicit") {
    CodeSpec s;
    s.kind = Kind::explicit_matrix;
    s.matrix = std::move(m);
    s.source = std::move(source);
    return s;
  }

  /// Accepts "hamming:R", "golay23", or "file:PATH" (PATH resolved against
  /// base_dir when relative).
  static CodeSpec parse(const std::string& text, const std::string& base_dir = "") {
    if (text == "golay23") return golay23();
    if (text.rfind("hamming:", 0) == 0) return hamming(std::stoi(text.substr(8)));
    if (text.rfind("file:", 0) == 0) {
      std::string path = text.substr(5);
      if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
      return explicit_matrix(BinaryMatrix::load(path), text);
    }
    throw std::invalid_argument("CodeSpec::parse: unrecognized code spec '" + text + "'");
  }

  BinaryMatrix build() const {
    switch (kind) {
      case Kind::hamming: return hamming_parity_check(hamming_r);
      case Kind::golay23: return golay_parity_check();
      case Kind::explicit_matrix:
        if (!matrix) throw std::logic_error("CodeSpec: explicit kind without matrix");
        return *matrix;
    }
    throw std::logic_error("CodeSpec: bad kind");
  }

  int rows() const {
    switch (kind) {
      case Kind::hamming: return hamming_r;
      case Kind::golay23: return 11;
      case Kind::explicit_matrix: return matrix ? matrix->rows() : 0;
    }
    return 0;
  }

  int cols() const {
    switch (kind) {
      case Kind::hamming: return (1 << hamming_r) - 1;
      case Kind::golay23: return 23;
      case Kind::explicit_matrix: return matrix ? matrix->cols() : 0;
    }
    return 0;
  }
};

}  // namespace beamcode
