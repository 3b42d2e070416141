#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "beamcode/gf2.hpp"
#include "beamcode/rng.hpp"

namespace beamcode {

using Complex = std::complex<double>;

/// Uniform linear array: n elements at separation `delta` (in carrier
/// wavelengths). The normalized aperture n * delta is the only place the
/// carrier wavelength enters.
struct ArrayGeometry {
  int n = 1;
  double delta = 0.5;

  double length_norm() const { return n * delta; }
};

/// e(omega) = (1/sqrt(n)) (1, e^{-j2*pi*delta*omega}, ..., e^{-j2*pi*(n-1)*delta*omega})
inline Eigen::VectorXcd spatial_signature(const ArrayGeometry& geom, double omega) {
  if (geom.n < 1 || geom.delta <= 0)
    throw std::invalid_argument("spatial_signature: bad array geometry");
  Eigen::VectorXcd v(geom.n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(geom.n));
  for (int k = 0; k < geom.n; ++k)
    v[k] = std::polar(scale, -2.0 * M_PI * k * geom.delta * omega);
  return v;
}

/// Beamspace basis: column k is the spatial signature at directional cosine
/// k / (n*delta). Unitary exactly at critical spacing delta = 0.5.
inline Eigen::MatrixXcd dft_matrix(const ArrayGeometry& geom) {
  Eigen::MatrixXcd u(geom.n, geom.n);
  const double aperture = geom.length_norm();
  for (int k = 0; k < geom.n; ++k) u.col(k) = spatial_signature(geom, k / aperture);
  return u;
}

struct PathSpec {
  int rx_bin = 0;
  int tx_bin = 0;
  Complex gain;
};

/// Channel in the beamspace (angular) domain: an n_rx x n_tx complex matrix
/// whose nonzero entries sit exactly at the path bins.
struct AngularChannel {
  int n_rx = 0;
  int n_tx = 0;
  Eigen::MatrixXcd entries;
  std::vector<PathSpec> paths;

  int path_count() const { return static_cast<int>(paths.size()); }

  static AngularChannel zero(int n_rx, int n_tx) {
    if (n_rx < 1 || n_tx < 1) throw std::invalid_argument("AngularChannel: bad dimensions");
    AngularChannel ch;
    ch.n_rx = n_rx;
    ch.n_tx = n_tx;
    ch.entries = Eigen::MatrixXcd::Zero(n_rx, n_tx);
    return ch;
  }

  static AngularChannel from_paths(int n_rx, int n_tx, std::vector<PathSpec> paths) {
    AngularChannel ch = zero(n_rx, n_tx);
    for (const auto& p : paths) {
      if (p.rx_bin < 0 || p.rx_bin >= n_rx || p.tx_bin < 0 || p.tx_bin >= n_tx)
        throw std::invalid_argument("AngularChannel: path bin out of range");
      if (ch.entries(p.rx_bin, p.tx_bin) != Complex{0.0, 0.0})
        throw std::invalid_argument("AngularChannel: duplicate path bin");
      ch.entries(p.rx_bin, p.tx_bin) = p.gain;
    }
    ch.paths = std::move(paths);
    return ch;
  }
};

enum class SupportLaw {
  size_then_bins,        // size uniform on {0..L}, then bins uniform without replacement
  uniform_over_supports  // uniform over all supports of size <= L
};

/// Draw a sparse angular channel with at most l_max paths. Nonzero gains have
/// real and imaginary parts independently uniform on [-alpha_max, alpha_max].
inline AngularChannel sample_channel(int n_rx, int n_tx, int l_max, double alpha_max, Rng& rng,
                                     SupportLaw law = SupportLaw::size_then_bins) {
  const int total_bins = n_rx * n_tx;
  if (l_max < 0 || l_max > total_bins)
    throw std::invalid_argument("sample_channel: need 0 <= L <= n_rx*n_tx");

  int size = 0;
  if (law == SupportLaw::size_then_bins) {
    std::uniform_int_distribution<int> d(0, l_max);
    size = d(rng);
  } else {
    // P(size = k) proportional to C(total_bins, k)
    std::vector<double> cumulative(l_max + 1);
    double acc = 0;
    for (int k = 0; k <= l_max; ++k) {
      acc += static_cast<double>(detail::binomial128(total_bins, k));
      cumulative[k] = acc;
    }
    std::uniform_real_distribution<double> d(0.0, acc);
    const double u = d(rng);
    size = static_cast<int>(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                            cumulative.begin());
    size = std::min(size, l_max);
  }

  // partial Fisher-Yates over flat bin indices
  std::vector<int> pool(total_bins);
  std::iota(pool.begin(), pool.end(), 0);
  for (int d = 0; d < size; ++d) {
    std::uniform_int_distribution<int> pick(d, total_bins - 1);
    std::swap(pool[d], pool[pick(rng)]);
  }
  std::vector<int> bins(pool.begin(), pool.begin() + size);
  std::sort(bins.begin(), bins.end());

  std::uniform_real_distribution<double> gain(-alpha_max, alpha_max);
  std::vector<PathSpec> paths;
  paths.reserve(size);
  for (int b : bins) {
    const double re = gain(rng);
    const double im = gain(rng);
    paths.push_back({b / n_tx, b % n_tx, Complex{re, im}});
  }
  return AngularChannel::from_paths(n_rx, n_tx, std::move(paths));
}

/// Physical-domain channel: Q = U_r * Q^a * U_t^H.
inline Eigen::MatrixXcd to_physical(const AngularChannel& ch, const Eigen::MatrixXcd& rx_basis,
                                    const Eigen::MatrixXcd& tx_basis) {
  if (rx_basis.rows() != ch.n_rx || rx_basis.cols() != ch.n_rx || tx_basis.rows() != ch.n_tx ||
      tx_basis.cols() != ch.n_tx)
    throw std::invalid_argument("to_physical: basis dimensions do not match channel");
  return rx_basis * ch.entries * tx_basis.adjoint();
}

/// Inverse of to_physical: Q^a = U_r^H * Q * U_t.
inline Eigen::MatrixXcd to_angular(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& rx_basis,
                                   const Eigen::MatrixXcd& tx_basis) {
  if (rx_basis.rows() != q.rows() || tx_basis.rows() != q.cols())
    throw std::invalid_argument("to_angular: basis dimensions do not match channel");
  return rx_basis.adjoint() * q * tx_basis;
}

/// ADC resolution: b bits or ideal (infinite).
struct AdcBits {
  int value = 0;
  bool finite = false;

  static constexpr AdcBits infinite() { return {}; }

  static AdcBits of(int b) {
    if (b < 1 || b > 62) throw std::invalid_argument("AdcBits: need 1 <= b <= 62");
    AdcBits a;
    a.value = b;
    a.finite = true;
    return a;
  }

  bool operator==(const AdcBits& o) const {
    return finite == o.finite && (!finite || value == o.value);
  }

  std::string str() const { return finite ? std::to_string(value) : "inf"; }

  static AdcBits parse(const std::string& s) {
    if (s == "inf" || s == "infinite" || s == "ideal") return infinite();
    return of(std::stoi(s));
  }
};

/// Mid-tread quantizer with 2^b + 1 levels on [-v_fs, v_fs]: clip, then round
/// to the nearest multiple of v_fs / 2^(b-1). Zero is a level; so are the two
/// full-scale values. Infinite resolution is the identity.
inline double quantize_real(double x, AdcBits adc, double v_fs) {
  if (!adc.finite) return x;
  if (v_fs <= 0) throw std::invalid_argument("quantize: full scale must be positive");
  const double step = std::ldexp(v_fs, -(adc.value - 1));
  const double clipped = std::clamp(x, -v_fs, v_fs);
  return step * std::round(clipped / step);
}

/// Quantize real and imaginary parts independently (one ADC per rail).
inline Complex quantize(Complex x, AdcBits adc, double v_fs) {
  if (!adc.finite) return x;
  return {quantize_real(x.real(), adc, v_fs), quantize_real(x.imag(), adc, v_fs)};
}

/// Circularly symmetric complex Gaussian sample with E|z|^2 = n0.
inline Complex awgn(Rng& rng, double n0) {
  if (n0 < 0) throw std::invalid_argument("awgn: noise power must be >= 0");
  if (n0 == 0) return {0.0, 0.0};
  std::normal_distribution<double> d(0.0, std::sqrt(n0 / 2));
  const double re = d(rng);
  const double im = d(rng);
  return {re, im};
}

/// Uniform-distribution counterpart of awgn with the same per-component
/// variance: each rail uniform on [-a, a] with a^2/3 = n0/2.
inline Complex uniform_noise(Rng& rng, double n0) {
  if (n0 < 0) throw std::invalid_argument("uniform_noise: noise power must be >= 0");
  if (n0 == 0) return {0.0, 0.0};
  const double a = std::sqrt(1.5 * n0);
  std::uniform_real_distribution<double> d(-a, a);
  const double re = d(rng);
  const double im = d(rng);
  return {re, im};
}

inline nlohmann::json to_json(const AngularChannel& ch) {
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : ch.paths)
    paths.push_back({{"rx", p.rx_bin}, {"tx", p.tx_bin}, {"re", p.gain.real()}, {"im", p.gain.imag()}});
  return {{"n_r", ch.n_rx}, {"n_t", ch.n_tx}, {"paths", std::move(paths)}};
}

inline AngularChannel angular_channel_from_json(const nlohmann::json& j) {
  std::vector<PathSpec> paths;
  for (const auto& p : j.at("paths"))
    paths.push_back({p.at("rx").get<int>(), p.at("tx").get<int>(),
                     Complex{p.at("re").get<double>(), p.at("im").get<double>()}});
  return AngularChannel::from_paths(j.at("n_r").get<int>(), j.at("n_t").get<int>(), std::move(paths));
}

}  // namespace beamcode
