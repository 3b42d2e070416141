#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "beamcode/gf2.hpp"
#include "beamcode/measurement.hpp"
#include "beamcode/mlp.hpp"

namespace beamcode {

/// Exact l0 decoding of one measurement vector: over every support S with
/// |S| <= L, solve the least-squares problem min_x ||G_S x - y|| on the
/// real-valued column submatrix and return the estimate with the smallest
/// residual. Ties go to the smaller support, then the lexicographically
/// smallest one (supports are enumerated in exactly that order). The QR
/// factors of all column submatrices are precomputed, so a decoder instance
/// is built once per (code, L) and decode() stays cheap.
class SearchDecoder {
 public:
  SearchDecoder(BinaryMatrix code, int max_paths, std::uint64_t budget = kInjectivityBudget)
      : code_(std::move(code)), max_paths_(max_paths) {
    if (max_paths_ < 0 || max_paths_ > code_.cols())
      throw std::invalid_argument("SearchDecoder: need 0 <= L <= code columns");
    if (!is_injective_over_supports(code_, max_paths_, budget))
      throw std::invalid_argument(
          "SearchDecoder: code is not injective over supports with <= L nonzeros");

    const Eigen::MatrixXd real = code_.to_real();
    for_each_support(code_.cols(), max_paths_, [&](const std::vector<int>& support) {
      if (support.empty()) return;  // the empty support needs no factorization
      Entry e;
      e.support = support;
      Eigen::MatrixXd cols(code_.rows(), support.size());
      for (std::size_t k = 0; k < support.size(); ++k) cols.col(k) = real.col(support[k]);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(cols);
      e.q = qr.householderQ() * Eigen::MatrixXd::Identity(code_.rows(), support.size());
      e.r = qr.matrixQR().topRows(support.size()).template triangularView<Eigen::Upper>();
      entries_.push_back(std::move(e));
    });
  }

  int measurement_size() const { return code_.rows(); }
  int channel_size() const { return code_.cols(); }
  int max_paths() const { return max_paths_; }
  const BinaryMatrix& code() const { return code_; }

  struct Detail {
    Eigen::VectorXcd estimate;
    double residual = 0;
    std::vector<int> support;
  };

  Detail decode_detail(const Eigen::VectorXcd& y) const {
    if (y.size() != code_.rows())
      throw std::invalid_argument("SearchDecoder: measurement size mismatch");

    const Eigen::VectorXd y_re = y.real();
    const Eigen::VectorXd y_im = y.imag();
    const double y_norm_sq = y_re.squaredNorm() + y_im.squaredNorm();

    // residuals closer than this are numerically tied and keep the earlier
    // (smaller, then lexicographically smaller) support
    const double tie_eps = 1e-12 * y_norm_sq;
    double best = y_norm_sq;  // empty support
    const Entry* winner = nullptr;
    for (const Entry& e : entries_) {
      const Eigen::VectorXd c_re = e.q.transpose() * y_re;
      const Eigen::VectorXd c_im = e.q.transpose() * y_im;
      const double res = y_norm_sq - c_re.squaredNorm() - c_im.squaredNorm();
      if (res < best - tie_eps) {
        best = res;
        winner = &e;
      }
    }

    Detail out;
    out.estimate = Eigen::VectorXcd::Zero(code_.cols());
    out.residual = std::sqrt(std::max(0.0, best));
    if (winner) {
      const Eigen::VectorXd x_re =
          winner->r.triangularView<Eigen::Upper>().solve(winner->q.transpose() * y_re);
      const Eigen::VectorXd x_im =
          winner->r.triangularView<Eigen::Upper>().solve(winner->q.transpose() * y_im);
      Eigen::VectorXd fit_re = -y_re;
      Eigen::VectorXd fit_im = -y_im;
      for (std::size_t k = 0; k < winner->support.size(); ++k) {
        out.estimate[winner->support[k]] = Complex{x_re[k], x_im[k]};
        // accumulate the fitted vector for a cancellation-free residual
        for (int i = 0; i < code_.rows(); ++i)
          if (code_(i, winner->support[k])) {
            fit_re[i] += x_re[k];
            fit_im[i] += x_im[k];
          }
      }
      out.residual = std::sqrt(fit_re.squaredNorm() + fit_im.squaredNorm());
      out.support = winner->support;
    }
    return out;
  }

  Eigen::VectorXcd decode(const Eigen::VectorXcd& y) const { return decode_detail(y).estimate; }

 private:
  struct Entry {
    std::vector<int> support;
    Eigen::MatrixXd q;  // thin orthonormal factor, m x |S|
    Eigen::MatrixXd r;  // upper-triangular factor, |S| x |S|
  };

  BinaryMatrix code_;
  int max_paths_;
  std::vector<Entry> entries_;
};

/// The real and imaginary rails of a measurement never mix: the estimate is
/// forward(Re y) + j forward(Im y) through the same real-valued network.
template <class Scalar>
Eigen::VectorXcd mlp_decode_simo(const Eigen::VectorXcd& y, const MlpModel<Scalar>& model) {
  if (y.size() != model.input_size())
    throw std::invalid_argument("mlp_decode_simo: measurement size mismatch");
  using Vector = typename MlpModel<Scalar>::Vector;
  const Vector re = model.forward(y.real().template cast<Scalar>());
  const Vector im = model.forward(y.imag().template cast<Scalar>());
  Eigen::VectorXcd out(model.output_size());
  for (int i = 0; i < model.output_size(); ++i)
    out[i] = Complex{static_cast<double>(re[i]), static_cast<double>(im[i])};
  return out;
}

/// Neural measurement decoder; models are trained and stored in float.
struct MlpDecoder {
  MlpModel<float> model;

  Eigen::VectorXcd decode(const Eigen::VectorXcd& y) const { return mlp_decode_simo(y, model); }
};

using SimoDecoder = std::variant<SearchDecoder, MlpDecoder>;

inline int decoder_input_size(const SimoDecoder& d) {
  return std::visit(
      [](const auto& dec) {
        if constexpr (std::is_same_v<std::decay_t<decltype(dec)>, SearchDecoder>)
          return dec.measurement_size();
        else
          return dec.model.input_size();
      },
      d);
}

inline int decoder_output_size(const SimoDecoder& d) {
  return std::visit(
      [](const auto& dec) {
        if constexpr (std::is_same_v<std::decay_t<decltype(dec)>, SearchDecoder>)
          return dec.channel_size();
        else
          return dec.model.output_size();
      },
      d);
}

inline Eigen::VectorXcd decode_simo(const SimoDecoder& d, const Eigen::VectorXcd& y) {
  return std::visit([&](const auto& dec) { return dec.decode(y); }, d);
}

struct MimoEstimate {
  Eigen::MatrixXcd q_hat;         // n_r x n_t
  Eigen::MatrixXcd intermediate;  // n_r x m_t, the column-decoded stage
  double residual = 0;  // combined search-stage least-squares residual (0 for MLP stages)
};

/// Two-step decoding of a full measurement grid: decode each of the m_t
/// columns with the receive-side decoder to build the n_r x m_t intermediate
/// matrix, then decode each of its n_r rows with the transmit-side decoder to
/// form the rows of the channel estimate.
inline MimoEstimate decode_mimo(const MeasurementSet& ms, const SimoDecoder& rx_dec,
                                const SimoDecoder& tx_dec) {
  const int m_r = static_cast<int>(ms.observed.rows());
  const int m_t = static_cast<int>(ms.observed.cols());
  if (decoder_input_size(rx_dec) != m_r || decoder_input_size(tx_dec) != m_t)
    throw std::invalid_argument("decode_mimo: decoder sizes do not match the measurement grid");
  const int n_r = decoder_output_size(rx_dec);
  const int n_t = decoder_output_size(tx_dec);

  double res_sq = 0;
  auto run = [&res_sq](const SimoDecoder& d, const Eigen::VectorXcd& y) {
    if (const auto* search = std::get_if<SearchDecoder>(&d)) {
      auto detail = search->decode_detail(y);
      res_sq += detail.residual * detail.residual;
      return std::move(detail.estimate);
    }
    return decode_simo(d, y);
  };

  MimoEstimate est;
  est.intermediate.resize(n_r, m_t);
  for (int j = 0; j < m_t; ++j) est.intermediate.col(j) = run(rx_dec, ms.observed.col(j));

  est.q_hat.resize(n_r, n_t);
  for (int k = 0; k < n_r; ++k)
    est.q_hat.row(k) = run(tx_dec, est.intermediate.row(k).transpose()).transpose();

  est.residual = std::sqrt(res_sq);
  return est;
}

/// The L strongest entries of an estimate, magnitude descending; exact ties
/// break toward the lexicographically smaller (rx, tx) position. Entries that
/// are exactly zero never count as paths.
inline std::vector<PathSpec> top_l_paths(const Eigen::MatrixXcd& q_hat, int l_max) {
  if (l_max < 1) throw std::invalid_argument("top_l_paths: L must be >= 1");
  std::vector<PathSpec> all;
  for (int i = 0; i < q_hat.rows(); ++i)
    for (int j = 0; j < q_hat.cols(); ++j)
      if (q_hat(i, j) != Complex{0.0, 0.0}) all.push_back({i, j, q_hat(i, j)});
  std::sort(all.begin(), all.end(), [](const PathSpec& a, const PathSpec& b) {
    const double ma = std::abs(a.gain), mb = std::abs(b.gain);
    if (ma != mb) return ma > mb;
    if (a.rx_bin != b.rx_bin) return a.rx_bin < b.rx_bin;
    return a.tx_bin < b.tx_bin;
  });
  if (static_cast<int>(all.size()) > l_max) all.resize(l_max);
  return all;
}

/// Zero out numerically negligible entries so support-based metrics are well
/// defined; threshold 1e-6 * alpha_max.
inline Eigen::MatrixXcd denoise_estimate(Eigen::MatrixXcd q_hat, double alpha_max) {
  const double threshold = 1e-6 * alpha_max;
  for (int i = 0; i < q_hat.rows(); ++i)
    for (int j = 0; j < q_hat.cols(); ++j)
      if (std::abs(q_hat(i, j)) < threshold) q_hat(i, j) = Complex{0.0, 0.0};
  return q_hat;
}

}  // namespace beamcode
