#pragma once

// Shared test utilities: random GF(2) matrices, an exact integer determinant,
// and a brute-force injectivity oracle kept independent of the library's
// difference-vector implementation.

#include <cstdint>
#include <random>
#include <vector>

#include "beamcode/gf2.hpp"
#include "beamcode/rng.hpp"

namespace testutil {

inline beamcode::BinaryMatrix random_binary_matrix(int rows, int cols, beamcode::Rng& rng,
                                                   double density = 0.5) {
  beamcode::BinaryMatrix m(rows, cols);
  std::bernoulli_distribution coin(density);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m.set(i, j, coin(rng) ? 1 : 0);
  return m;
}

/// Exact integer determinant of a small 0/1 matrix via the Bareiss
/// fraction-free elimination. Values stay within Hadamard's bound, which for
/// the sizes used in tests (n <= 16) fits comfortably in __int128.
inline __int128 integer_determinant(const beamcode::BinaryMatrix& m) {
  const int n = m.rows();
  if (n != m.cols()) throw std::invalid_argument("integer_determinant: square matrices only");
  std::vector<std::vector<__int128>> a(n, std::vector<__int128>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i][j] = m(i, j);

  __int128 sign = 1;
  __int128 prev = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (a[k][k] == 0) {
      int pivot = -1;
      for (int r = k + 1; r < n; ++r)
        if (a[r][k] != 0) { pivot = r; break; }
      if (pivot < 0) return 0;
      std::swap(a[k], a[pivot]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    prev = a[k][k];
  }
  return sign * a[n - 1][n - 1];
}

/// Brute force form of the injectivity condition: encode every pair of
/// supports with weight <= L and compare syndromes directly.
inline bool injective_by_pairwise_check(const beamcode::BinaryMatrix& g, int l_max) {
  std::vector<std::vector<int>> supports;
  beamcode::for_each_support(g.cols(), l_max,
                             [&](const std::vector<int>& s) { supports.push_back(s); });
  auto syndrome = [&](const std::vector<int>& s) {
    std::vector<int> y(g.rows(), 0);
    for (int j : s)
      for (int i = 0; i < g.rows(); ++i) y[i] ^= g(i, j);
    return y;
  };
  std::vector<std::vector<int>> syndromes;
  syndromes.reserve(supports.size());
  for (const auto& s : supports) syndromes.push_back(syndrome(s));
  for (std::size_t a = 0; a < syndromes.size(); ++a)
    for (std::size_t b = a + 1; b < syndromes.size(); ++b)
      if (syndromes[a] == syndromes[b]) return false;
  return true;
}

/// The 4x8 single-path discovery code used in the worked examples: the
/// leading identity block makes it full rank, and all eight columns are
/// distinct nonzero vectors.
inline beamcode::BinaryMatrix demo_code_4x8() {
  return beamcode::BinaryMatrix::from_rows({{1, 0, 0, 0, 1, 0, 0, 1},
                                            {0, 1, 0, 0, 1, 1, 0, 1},
                                            {0, 0, 1, 0, 0, 1, 1, 0},
                                            {0, 0, 0, 1, 0, 0, 1, 1}});
}

}  // namespace testutil
