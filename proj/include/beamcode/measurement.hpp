#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "beamcode/channel.hpp"
#include "beamcode/gf2.hpp"

namespace beamcode {

/// A set of combining (or precoding) vectors, one per measurement row. For
/// code-driven banks, vector i is the sum of the beamspace basis columns
/// selected by row i of the code, so ||v_i||^2 equals the row weight.
struct BeamformerBank {
  Eigen::MatrixXcd vectors;  // dim x count, one beamformer per column
  std::optional<BinaryMatrix> code;
  std::vector<int> overlap_counts;  // combined directions per beamformer

  int count() const { return static_cast<int>(vectors.cols()); }
  int dim() const { return static_cast<int>(vectors.rows()); }

  int max_overlap() const {
    int o = 0;
    for (int c : overlap_counts) o = std::max(o, c);
    return o;
  }

  double mean_overlap() const {
    double total = 0;
    for (int c : overlap_counts) total += c;
    return overlap_counts.empty() ? 0.0 : total / overlap_counts.size();
  }
};

namespace detail {

inline BeamformerBank build_code_bank(const BinaryMatrix& code, const Eigen::MatrixXcd& basis,
                                      const char* what) {
  if (basis.rows() != code.cols() || basis.cols() != code.cols())
    throw std::invalid_argument(std::string(what) + ": basis must be n x n with n = code columns");
  const int n = code.cols();
  const int m = code.rows();

  BeamformerBank bank;
  bank.vectors = Eigen::MatrixXcd::Zero(n, m);
  bank.overlap_counts.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j)
      if (code(i, j)) bank.vectors.col(i) += basis.col(j);
    bank.overlap_counts[i] = code.row_weight(i);
  }

  // the defining property: v_i^H * basis reproduces row i of the code
  const Eigen::MatrixXcd reproduced = bank.vectors.adjoint() * basis;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(reproduced(i, j) - Complex(code(i, j), 0.0)) > 1e-9)
        throw std::runtime_error(std::string(what) +
                                 ": beamformer bank does not reproduce the code rows "
                                 "(basis not orthonormal?)");
  bank.code = code;
  return bank;
}

}  // namespace detail

/// Receive combiners w_i = sum of rx-basis columns selected by row i of G_r.
inline BeamformerBank build_combiners(const BinaryMatrix& rx_code, const Eigen::MatrixXcd& rx_basis) {
  return detail::build_code_bank(rx_code, rx_basis, "build_combiners");
}

/// Transmit precoders f_j = sum of tx-basis columns selected by row j of G_t.
inline BeamformerBank build_precoders(const BinaryMatrix& tx_code, const Eigen::MatrixXcd& tx_basis) {
  return detail::build_code_bank(tx_code, tx_basis, "build_precoders");
}

enum class NoiseFamily { gaussian, uniform };

/// Clean and observed measurement grids for one acquisition sweep.
struct MeasurementSet {
  Eigen::MatrixXcd clean;     // m_r x m_t, entry (i,j) = w_i^H Q f_j
  Eigen::MatrixXcd observed;  // noisy, quantized counterpart
  double snr_db = std::numeric_limits<double>::infinity();
  AdcBits adc_bits = AdcBits::infinite();
};

/// Measure a physical channel with every combiner/precoder pair (unit pilot).
///
/// SNR bookkeeping: the configured SNR is per beam, so a unit-gain path seen
/// through single-direction beams at both ends gets noise variance 1/snr per
/// measurement. Combining o_r overlapped directions scales the noise variance
/// by ||w_i||^2. Quantization applies per rail at full scale v_fs.
inline MeasurementSet acquire(const Eigen::MatrixXcd& q, const BeamformerBank& combiners,
                              const BeamformerBank& precoders, double snr_db, AdcBits adc_bits,
                              double v_fs, Rng& rng,
                              NoiseFamily noise_family = NoiseFamily::gaussian) {
  if (combiners.dim() != q.rows() || precoders.dim() != q.cols())
    throw std::invalid_argument("acquire: beamformer dimensions do not match channel");

  MeasurementSet ms;
  ms.snr_db = snr_db;
  ms.adc_bits = adc_bits;
  ms.clean = combiners.vectors.adjoint() * q * precoders.vectors;

  const bool noiseless = std::isinf(snr_db) && snr_db > 0;
  const double snr_linear = noiseless ? 0.0 : std::pow(10.0, snr_db / 10.0);

  ms.observed = ms.clean;
  const int m_r = combiners.count();
  const int m_t = precoders.count();
  for (int i = 0; i < m_r; ++i) {
    const double w_norm_sq = combiners.vectors.col(i).squaredNorm();
    const double n0 = noiseless ? 0.0 : w_norm_sq / snr_linear;
    for (int j = 0; j < m_t; ++j) {
      const Complex z = noise_family == NoiseFamily::gaussian ? awgn(rng, n0) : uniform_noise(rng, n0);
      ms.observed(i, j) = quantize(ms.clean(i, j) + z, adc_bits, v_fs);
    }
  }
  return ms;
}

/// Total energy in millijoules spent on a measurement sweep:
/// m measurements, o_t * o_r overlapped beams at power snr * n0 / mu each,
/// tau seconds per measurement.
inline double total_energy_mj(int m, int o_t, int o_r, double snr_linear, double n0_mw,
                              double mu_linear, double tau_s) {
  if (m < 1 || o_t < 1 || o_r < 1 || snr_linear < 0 || n0_mw <= 0 || mu_linear <= 0 || tau_s <= 0)
    throw std::invalid_argument("total_energy_mj: bad arguments");
  return m * static_cast<double>(o_t) * o_r * snr_linear * (n0_mw / mu_linear) * tau_s;
}

inline nlohmann::json to_json(const MeasurementSet& ms) {
  auto grid = [](const Eigen::MatrixXcd& m, bool real_part) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < m.cols(); ++j) row.push_back(real_part ? m(i, j).real() : m(i, j).imag());
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json j{{"m_r", ms.clean.rows()},
                   {"m_t", ms.clean.cols()},
                   {"adc_bits", ms.adc_bits.str()},
                   {"clean_re", grid(ms.clean, true)},
                   {"clean_im", grid(ms.clean, false)},
                   {"observed_re", grid(ms.observed, true)},
                   {"observed_im", grid(ms.observed, false)}};
  if (std::isinf(ms.snr_db))
    j["snr_db"] = "inf";
  else
    j["snr_db"] = ms.snr_db;
  return j;
}

inline MeasurementSet measurement_set_from_json(const nlohmann::json& j) {
  const int m_r = j.at("m_r").get<int>();
  const int m_t = j.at("m_t").get<int>();
  auto grid = [&](const char* re_key, const char* im_key) {
    Eigen::MatrixXcd m(m_r, m_t);
    const auto& re = j.at(re_key);
    const auto& im = j.at(im_key);
    for (int i = 0; i < m_r; ++i)
      for (int jj = 0; jj < m_t; ++jj)
        m(i, jj) = Complex{re.at(i).at(jj).get<double>(), im.at(i).at(jj).get<double>()};
    return m;
  };
  MeasurementSet ms;
  ms.clean = grid("clean_re", "clean_im");
  ms.observed = grid("observed_re", "observed_im");
  ms.adc_bits = AdcBits::parse(j.at("adc_bits").get<std::string>());
  if (j.at("snr_db").is_string())
    ms.snr_db = std::numeric_limits<double>::infinity();
  else
    ms.snr_db = j.at("snr_db").get<double>();
  return ms;
}

}  // namespace beamcode
