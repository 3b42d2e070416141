#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "beamcode/channel.hpp"
#include "beamcode/decoders.hpp"
#include "beamcode/measurement.hpp"

namespace beamcode {

/// Compressed-sensing style beamformers: unit-modulus entries with i.i.d.
/// uniform phases, normalized so every vector has unit norm.
inline BeamformerBank cs_random_beamformers(int n, int m, Rng& rng) {
  if (n < 1 || m < 1) throw std::invalid_argument("cs_random_beamformers: bad dimensions");
  BeamformerBank bank;
  bank.vectors.resize(n, m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) bank.vectors(i, j) = std::polar(scale, phase(rng));
  bank.overlap_counts.assign(m, 1);  // unit-power beams, no overlapped directions
  return bank;
}

/// Linear map from the vectorized angular channel to the vectorized clean
/// measurement grid: row (i, j) is kron((U_t^H f_j)^T, w_i^H U_r), with
/// column-major stacking on both sides.
struct SensingMatrix {
  Eigen::MatrixXcd b;  // (m_r * m_t) x (n_r * n_t)
  int n_r = 0;
  int n_t = 0;
};

inline SensingMatrix build_sensing_matrix(const BeamformerBank& combiners,
                                          const BeamformerBank& precoders,
                                          const Eigen::MatrixXcd& rx_basis,
                                          const Eigen::MatrixXcd& tx_basis) {
  if (combiners.dim() != rx_basis.rows() || precoders.dim() != tx_basis.rows())
    throw std::invalid_argument("build_sensing_matrix: dimensions do not match");
  const int m_r = combiners.count();
  const int m_t = precoders.count();
  const int n_r = static_cast<int>(rx_basis.cols());
  const int n_t = static_cast<int>(tx_basis.cols());

  const Eigen::MatrixXcd a = combiners.vectors.adjoint() * rx_basis;   // m_r x n_r
  const Eigen::MatrixXcd bt = tx_basis.adjoint() * precoders.vectors;  // n_t x m_t

  SensingMatrix s;
  s.n_r = n_r;
  s.n_t = n_t;
  s.b.resize(m_r * m_t, n_r * n_t);
  for (int j = 0; j < m_t; ++j)
    for (int i = 0; i < m_r; ++i) {
      const int row = j * m_r + i;
      for (int t = 0; t < n_t; ++t)
        for (int r = 0; r < n_r; ++r) s.b(row, t * n_r + r) = bt(t, j) * a(i, r);
    }
  return s;
}

inline constexpr std::uint64_t kL0Budget = 10'000'000;

/// Exact l0 recovery against an arbitrary complex sensing matrix: least
/// squares over every support of size <= L, smallest residual wins, ties to
/// the smaller then lexicographically smaller support. Throws when the
/// enumeration would exceed `budget` supports.
inline Eigen::VectorXcd sparse_recover_l0(const Eigen::VectorXcd& y, const SensingMatrix& sensing,
                                          int max_paths, std::uint64_t budget = kL0Budget) {
  const auto& b = sensing.b;
  if (y.size() != b.rows()) throw std::invalid_argument("sparse_recover_l0: size mismatch");
  const int n = static_cast<int>(b.cols());
  if (max_paths < 0 || max_paths > n)
    throw std::invalid_argument("sparse_recover_l0: need 0 <= L <= columns");
  if (support_count(n, max_paths) > budget)
    throw std::runtime_error("sparse_recover_l0: enumeration budget exceeded");

  const double y_norm_sq = y.squaredNorm();
  const double tie_eps = 1e-12 * y_norm_sq;  // same tie rule as SearchDecoder
  double best = y_norm_sq;                   // empty support
  std::vector<int> best_support;
  Eigen::VectorXcd best_coeffs;

  Eigen::MatrixXcd cols(b.rows(), max_paths);
  for_each_support(n, max_paths, [&](const std::vector<int>& support) {
    if (support.empty()) return;
    const int k = static_cast<int>(support.size());
    for (int c = 0; c < k; ++c) cols.col(c) = b.col(support[c]);
    const auto block = cols.leftCols(k);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(block);
    const Eigen::VectorXcd x = qr.solve(y);
    const double res = (y - block * x).squaredNorm();
    if (res < best - tie_eps) {
      best = res;
      best_support = support;
      best_coeffs = x;
    }
  });

  Eigen::VectorXcd estimate = Eigen::VectorXcd::Zero(n);
  for (std::size_t c = 0; c < best_support.size(); ++c) estimate[best_support[c]] = best_coeffs[c];
  return estimate;
}

/// Column-major unstacking of a vectorized channel estimate.
inline Eigen::MatrixXcd unvec_channel(const Eigen::VectorXcd& x, int n_r, int n_t) {
  if (x.size() != static_cast<Eigen::Index>(n_r) * n_t)
    throw std::invalid_argument("unvec_channel: size mismatch");
  return Eigen::Map<const Eigen::MatrixXcd>(x.data(), n_r, n_t);
}

struct SweepResult {
  int rx_bin = 0;
  int tx_bin = 0;
  Complex rx_peak;  // strongest observation of the receive-sector phase
  Complex tx_peak;  // strongest observation of the transmit-sector phase
  bool no_signal = false;
  int n_measurements = 0;
};

/// IEEE 802.11ad style sector level sweep. Phase 1 transmits through every
/// tx sector beam while the receiver listens on a single element (the
/// quasi-omni pattern); phase 2 swaps roles. The strongest observation on
/// each side picks the (rx, tx) sector pair; exact ties resolve to the
/// lexicographically smallest bins. Costs exactly n_t + n_r measurements.
inline SweepResult sector_sweep_80211ad(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& rx_basis,
                                        const Eigen::MatrixXcd& tx_basis, double snr_db,
                                        AdcBits adc_bits, double v_fs, Rng& rng,
                                        NoiseFamily noise_family = NoiseFamily::gaussian) {
  const int n_r = static_cast<int>(q.rows());
  const int n_t = static_cast<int>(q.cols());
  if (rx_basis.rows() != n_r || tx_basis.rows() != n_t)
    throw std::invalid_argument("sector_sweep_80211ad: dimensions do not match");

  const bool noiseless = std::isinf(snr_db) && snr_db > 0;
  const double n0 = noiseless ? 0.0 : 1.0 / std::pow(10.0, snr_db / 10.0);  // unit-norm beams
  auto draw = [&]() {
    return noise_family == NoiseFamily::gaussian ? awgn(rng, n0) : uniform_noise(rng, n0);
  };

  SweepResult out;
  out.n_measurements = n_t + n_r;

  // phase 1: sweep tx sectors, single-element receive
  double best_tx = -1;
  for (int j = 0; j < n_t; ++j) {
    const Complex u = quantize((q.row(0) * tx_basis.col(j))(0) + draw(), adc_bits, v_fs);
    if (std::abs(u) > best_tx) {
      best_tx = std::abs(u);
      out.tx_bin = j;
      out.tx_peak = u;
    }
  }

  // phase 2: sweep rx sectors, single-element transmit
  double best_rx = -1;
  for (int i = 0; i < n_r; ++i) {
    const Complex u = quantize((rx_basis.col(i).adjoint() * q.col(0))(0) + draw(), adc_bits, v_fs);
    if (std::abs(u) > best_rx) {
      best_rx = std::abs(u);
      out.rx_bin = i;
      out.rx_peak = u;
    }
  }

  out.no_signal = std::max(best_tx, best_rx) < 1e-12;
  return out;
}

}  // namespace beamcode
