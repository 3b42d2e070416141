#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "beamcode/channel.hpp"
#include "beamcode/gf2.hpp"
#include "beamcode/rng.hpp"

namespace beamcode {

/// Fully connected network: affine layers with ReLU on every hidden layer and
/// a linear output layer.
template <class Scalar>
struct MlpModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> layer_sizes;  // input, hidden..., output
  std::vector<Matrix> weights;   // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Vector> biases;

  int input_size() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  int output_size() const { return layer_sizes.empty() ? 0 : layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }

  Vector forward(const Vector& x) const {
    if (x.size() != input_size()) throw std::invalid_argument("MlpModel::forward: input size mismatch");
    Vector a = x;
    for (int l = 0; l < num_layers(); ++l) {
      Vector z = weights[l] * a + biases[l];
      if (l + 1 < num_layers()) z = z.cwiseMax(Scalar(0));
      a = std::move(z);
    }
    return a;
  }

  /// Forward pass over a batch; columns are samples.
  Matrix forward_batch(const Matrix& x) const {
    if (x.rows() != input_size())
      throw std::invalid_argument("MlpModel::forward_batch: input size mismatch");
    Matrix a = x;
    for (int l = 0; l < num_layers(); ++l) {
      Matrix z = (weights[l] * a).colwise() + biases[l];
      if (l + 1 < num_layers()) z = z.cwiseMax(Scalar(0));
      a = std::move(z);
    }
    return a;
  }
};

/// He-uniform initialization (the standard pairing with ReLU), biases zero.
/// Weight coefficients are filled row by row so the layout is seed-stable.
template <class Scalar>
MlpModel<Scalar> init_mlp(const std::vector<int>& arch, Rng& rng) {
  if (arch.size() < 2) throw std::invalid_argument("init_mlp: need at least input and output layers");
  for (int s : arch)
    if (s < 1) throw std::invalid_argument("init_mlp: layer sizes must be >= 1");

  MlpModel<Scalar> model;
  model.layer_sizes = arch;
  for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
    const int fan_in = arch[l];
    const int fan_out = arch[l + 1];
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> d(-limit, limit);
    typename MlpModel<Scalar>::Matrix w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = static_cast<Scalar>(d(rng));
    model.weights.push_back(std::move(w));
    model.biases.push_back(MlpModel<Scalar>::Vector::Zero(fan_out));
  }
  return model;
}

/// Measurement corruption applied to training inputs (none for the plain
/// decoder, channel noise plus ADC quantization for the selective-defense
/// variant).
struct NoiseSpec {
  bool enabled = false;
  double snr_db = std::numeric_limits<double>::infinity();
  AdcBits adc = AdcBits::infinite();
  double v_fs = 1.0;

  static NoiseSpec none() { return {}; }

  static NoiseSpec corrupted(double snr_db, AdcBits adc, double v_fs) {
    NoiseSpec s;
    s.enabled = true;
    s.snr_db = snr_db;
    s.adc = adc;
    s.v_fs = v_fs;
    return s;
  }

  std::string describe() const {
    if (!enabled) return "none";
    char buf[64];
    std::snprintf(buf, sizeof buf, "snr=%gdB,b=%s", snr_db, adc.str().c_str());
    return buf;
  }
};

template <class Scalar>
struct TrainingSet {
  using Matrix = typename MlpModel<Scalar>::Matrix;
  Matrix inputs;   // input_dim x count
  Matrix targets;  // output_dim x count
  std::string provenance;

  std::int64_t count() const { return inputs.cols(); }
};

/// Generate supervised pairs (code * channel, channel) for every support of
/// size <= l_max, with `samples_per_support` draws each. Gains are uniform on
/// [-alpha_max, alpha_max] per component; real and imaginary rails of a
/// complex decode are served by independent real-valued samples, so the data
/// here is purely real.
template <class Scalar>
TrainingSet<Scalar> gen_training_data(const BinaryMatrix& code, int l_max, int samples_per_support,
                                      double alpha_max, const NoiseSpec& noise, Rng& rng,
                                      std::uint64_t max_total_samples = 8'000'000) {
  const int n = code.cols();
  const int m = code.rows();
  if (l_max < 0 || l_max > n) throw std::invalid_argument("gen_training_data: need 0 <= L <= n");
  if (samples_per_support < 1)
    throw std::invalid_argument("gen_training_data: samples_per_support must be >= 1");

  const std::uint64_t supports = support_count(n, l_max);
  const std::uint64_t total = supports * static_cast<std::uint64_t>(samples_per_support);
  if (total > max_total_samples)
    throw std::runtime_error("gen_training_data: " + std::to_string(total) +
                             " samples exceed the budget of " + std::to_string(max_total_samples));

  TrainingSet<Scalar> data;
  data.inputs.resize(m, static_cast<Eigen::Index>(total));
  data.targets.resize(n, static_cast<Eigen::Index>(total));
  data.provenance = noise.describe();

  // per-row noise std in the real rail: complex variance ||w_i||^2 / snr
  std::vector<double> row_sd(m, 0.0);
  if (noise.enabled && std::isfinite(noise.snr_db)) {
    const double snr_linear = std::pow(10.0, noise.snr_db / 10.0);
    for (int i = 0; i < m; ++i) row_sd[i] = std::sqrt(code.row_weight(i) / (2.0 * snr_linear));
  }

  std::uniform_real_distribution<double> gain(-alpha_max, alpha_max);
  std::vector<double> target(n), input(m);
  Eigen::Index col = 0;
  for_each_support(n, l_max, [&](const std::vector<int>& support) {
    for (int s = 0; s < samples_per_support; ++s) {
      std::fill(target.begin(), target.end(), 0.0);
      for (int j : support) target[j] = gain(rng);
      std::fill(input.begin(), input.end(), 0.0);
      for (int j : support)
        for (int i = 0; i < m; ++i)
          if (code(i, j)) input[i] += target[j];
      if (noise.enabled) {
        for (int i = 0; i < m; ++i) {
          if (row_sd[i] > 0) {
            std::normal_distribution<double> d(0.0, row_sd[i]);
            input[i] += d(rng);
          }
          input[i] = quantize_real(input[i], noise.adc, noise.v_fs);
        }
      }
      for (int i = 0; i < m; ++i) data.inputs(i, col) = static_cast<Scalar>(input[i]);
      for (int j = 0; j < n; ++j) data.targets(j, col) = static_cast<Scalar>(target[j]);
      ++col;
    }
  });
  return data;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  AdamConfig adam;
  double val_fraction = 0.30;
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_mse = 0;
  double val_mse = 0;
};

template <class Scalar>
struct TrainResult {
  MlpModel<Scalar> model;  // snapshot with the lowest validation MSE
  std::vector<EpochStats> curve;
  double best_val_mse = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
};

namespace detail {

/// Per-layer scratch buffers reused across batches.
template <class Scalar>
struct MlpWorkspace {
  using Matrix = typename MlpModel<Scalar>::Matrix;
  std::vector<Matrix> acts;    // acts[0] = input, acts[l+1] = layer l output
  std::vector<Matrix> deltas;  // gradients w.r.t. pre-activations
};

/// MSE loss (mean over samples and output components) and its gradients.
/// Gradients are accumulated into grad_w / grad_b, which must be pre-sized.
template <class Scalar>
double backprop(const MlpModel<Scalar>& model, const typename MlpModel<Scalar>::Matrix& x,
                const typename MlpModel<Scalar>::Matrix& t,
                std::vector<typename MlpModel<Scalar>::Matrix>& grad_w,
                std::vector<typename MlpModel<Scalar>::Vector>& grad_b, MlpWorkspace<Scalar>& ws) {
  const int layers = model.num_layers();
  const auto batch = x.cols();
  const auto out_dim = model.output_size();

  ws.acts.resize(layers + 1);
  ws.deltas.resize(layers);
  ws.acts[0] = x;
  for (int l = 0; l < layers; ++l) {
    ws.acts[l + 1] = (model.weights[l] * ws.acts[l]).colwise() + model.biases[l];
    if (l + 1 < layers) ws.acts[l + 1] = ws.acts[l + 1].cwiseMax(Scalar(0));
  }

  const auto diff = (ws.acts[layers] - t).eval();
  const double loss = diff.template cast<double>().squaredNorm() / (double(batch) * out_dim);

  const Scalar scale = Scalar(2.0 / (double(batch) * out_dim));
  ws.deltas[layers - 1] = diff * scale;
  for (int l = layers - 1; l >= 0; --l) {
    grad_w[l] = ws.deltas[l] * ws.acts[l].transpose();
    grad_b[l] = ws.deltas[l].rowwise().sum();
    if (l > 0) {
      ws.deltas[l - 1] = model.weights[l].transpose() * ws.deltas[l];
      // ReLU mask: activations of hidden layer l are zero exactly where the
      // pre-activation was clamped
      ws.deltas[l - 1].array() *= (ws.acts[l].array() > Scalar(0)).template cast<Scalar>();
    }
  }
  return loss;
}

template <class Scalar>
double mse_of(const MlpModel<Scalar>& model, const typename MlpModel<Scalar>::Matrix& x,
              const typename MlpModel<Scalar>::Matrix& t, Eigen::Index chunk = 4096) {
  double sq_sum = 0;
  for (Eigen::Index start = 0; start < x.cols(); start += chunk) {
    const Eigen::Index width = std::min(chunk, x.cols() - start);
    const auto pred = model.forward_batch(x.middleCols(start, width));
    sq_sum += (pred - t.middleCols(start, width)).template cast<double>().squaredNorm();
  }
  return sq_sum / (double(x.cols()) * model.output_size());
}

}  // namespace detail

/// Evaluate the mean squared error of a model on a labelled set.
template <class Scalar>
double mse_loss(const MlpModel<Scalar>& model, const typename MlpModel<Scalar>::Matrix& x,
                const typename MlpModel<Scalar>::Matrix& t) {
  if (x.cols() != t.cols() || x.rows() != model.input_size() || t.rows() != model.output_size())
    throw std::invalid_argument("mse_loss: shape mismatch");
  return detail::mse_of(model, x, t);
}

template <class Scalar>
struct MlpGradients {
  std::vector<typename MlpModel<Scalar>::Matrix> weights;
  std::vector<typename MlpModel<Scalar>::Vector> biases;
  double loss = 0;
};

/// MSE loss plus per-layer gradients; used directly by the gradient tests.
template <class Scalar>
MlpGradients<Scalar> mse_gradients(const MlpModel<Scalar>& model,
                                   const typename MlpModel<Scalar>::Matrix& x,
                                   const typename MlpModel<Scalar>::Matrix& t) {
  MlpGradients<Scalar> g;
  g.weights.resize(model.num_layers());
  g.biases.resize(model.num_layers());
  detail::MlpWorkspace<Scalar> ws;
  g.loss = detail::backprop(model, x, t, g.weights, g.biases, ws);
  return g;
}

/// Mini-batch ADAM on the MSE loss. Shuffles every epoch, tracks validation
/// MSE on a held-out split, and returns the parameter snapshot with the
/// lowest validation error. Deterministic for a fixed (data, arch, config).
template <class Scalar>
TrainResult<Scalar> train(const TrainingSet<Scalar>& data, const std::vector<int>& arch,
                          const TrainConfig& cfg) {
  using Matrix = typename MlpModel<Scalar>::Matrix;
  using Vector = typename MlpModel<Scalar>::Vector;

  if (data.count() < 2) throw std::invalid_argument("train: need at least two samples");
  if (arch.size() < 2 || arch.front() != data.inputs.rows() || arch.back() != data.targets.rows())
    throw std::invalid_argument("train: architecture endpoints must match the data dimensions");
  if (cfg.val_fraction <= 0 || cfg.val_fraction >= 1)
    throw std::invalid_argument("train: val_fraction must be in (0, 1)");
  if (cfg.batch_size < 1 || cfg.epochs < 1)
    throw std::invalid_argument("train: batch_size and epochs must be >= 1");

  Rng rng(cfg.seed);
  MlpModel<Scalar> model = init_mlp<Scalar>(arch, rng);

  // one shuffled split, then per-epoch shuffles of the training part
  const Eigen::Index total = data.count();
  std::vector<Eigen::Index> perm(total);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::Index n_val = std::max<Eigen::Index>(1, std::llround(total * cfg.val_fraction));
  n_val = std::min(n_val, total - 1);
  const Eigen::Index n_train = total - n_val;

  const int in_dim = model.input_size();
  const int out_dim = model.output_size();
  Matrix x_train(in_dim, n_train), t_train(out_dim, n_train);
  Matrix x_val(in_dim, n_val), t_val(out_dim, n_val);
  for (Eigen::Index k = 0; k < n_train; ++k) {
    x_train.col(k) = data.inputs.col(perm[k]);
    t_train.col(k) = data.targets.col(perm[k]);
  }
  for (Eigen::Index k = 0; k < n_val; ++k) {
    x_val.col(k) = data.inputs.col(perm[n_train + k]);
    t_val.col(k) = data.targets.col(perm[n_train + k]);
  }

  const int layers = model.num_layers();
  std::vector<Matrix> grad_w(layers), adam_m_w(layers), adam_v_w(layers);
  std::vector<Vector> grad_b(layers), adam_m_b(layers), adam_v_b(layers);
  for (int l = 0; l < layers; ++l) {
    adam_m_w[l] = Matrix::Zero(model.weights[l].rows(), model.weights[l].cols());
    adam_v_w[l] = adam_m_w[l];
    adam_m_b[l] = Vector::Zero(model.biases[l].size());
    adam_v_b[l] = adam_m_b[l];
  }

  const Scalar lr = Scalar(cfg.adam.learning_rate);
  const Scalar b1 = Scalar(cfg.adam.beta1);
  const Scalar b2 = Scalar(cfg.adam.beta2);
  const Scalar eps = Scalar(cfg.adam.epsilon);
  std::int64_t step = 0;
  Scalar bc1 = Scalar(1), bc2 = Scalar(1);  // bias corrections for the current step

  auto adam_update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };

  detail::MlpWorkspace<Scalar> ws;
  std::vector<Eigen::Index> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  TrainResult<Scalar> result;
  Matrix x_batch, t_batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sq_sum = 0;
    for (Eigen::Index start = 0; start < n_train; start += cfg.batch_size) {
      const Eigen::Index width = std::min<Eigen::Index>(cfg.batch_size, n_train - start);
      x_batch.resize(in_dim, width);
      t_batch.resize(out_dim, width);
      for (Eigen::Index k = 0; k < width; ++k) {
        x_batch.col(k) = x_train.col(order[start + k]);
        t_batch.col(k) = t_train.col(order[start + k]);
      }
      const double loss = detail::backprop(model, x_batch, t_batch, grad_w, grad_b, ws);
      train_sq_sum += loss * double(width) * out_dim;
      ++step;
      bc1 = Scalar(1) - Scalar(std::pow(double(b1), double(step)));
      bc2 = Scalar(1) - Scalar(std::pow(double(b2), double(step)));
      for (int l = 0; l < layers; ++l) {
        adam_update(model.weights[l], adam_m_w[l], adam_v_w[l], grad_w[l]);
        adam_update(model.biases[l], adam_m_b[l], adam_v_b[l], grad_b[l]);
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = train_sq_sum / (double(n_train) * out_dim);
    stats.val_mse = detail::mse_of(model, x_val, t_val);
    if (!std::isfinite(stats.train_mse) || !std::isfinite(stats.val_mse))
      throw std::runtime_error("train: loss diverged to NaN/inf at epoch " + std::to_string(epoch) +
                               "; lower the learning rate or check the data");
    result.curve.push_back(stats);
    if (stats.val_mse < result.best_val_mse) {
      result.best_val_mse = stats.val_mse;
      result.best_epoch = epoch;
      result.model = model;
    }
    if (cfg.verbose)
      std::fprintf(stderr, "epoch %3d  train_mse %.6g  val_mse %.6g\n", epoch, stats.train_mse,
                   stats.val_mse);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model container: magic "BMLP", version u32, scalar width u32 (4 or 8),
// layer count u32, layer sizes u32[], activation tag u8 per weight layer
// (1 = relu, 0 = linear), then per layer the weight matrix row-major and the
// bias vector, little-endian IEEE values. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("model file truncated");
  return v;
}

}  // namespace detail

template <class Scalar>
void save_model(const MlpModel<Scalar>& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out.write("BMLP", 4);
  detail::write_pod(out, std::uint32_t{1});
  detail::write_pod(out, std::uint32_t{sizeof(Scalar)});
  detail::write_pod(out, static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (int s : model.layer_sizes) detail::write_pod(out, static_cast<std::uint32_t>(s));
  for (int l = 0; l < model.num_layers(); ++l)
    detail::write_pod(out, static_cast<std::uint8_t>(l + 1 < model.num_layers() ? 1 : 0));
  for (int l = 0; l < model.num_layers(); ++l) {
    const auto& w = model.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) detail::write_pod(out, w(r, c));
    const auto& b = model.biases[l];
    for (Eigen::Index r = 0; r < b.size(); ++r) detail::write_pod(out, b(r));
  }
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

template <class Scalar>
MlpModel<Scalar> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "BMLP")
    throw std::runtime_error("load_model: bad magic in " + path);
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != 1) throw std::runtime_error("load_model: unsupported version");
  const auto scalar_bytes = detail::read_pod<std::uint32_t>(in);
  if (scalar_bytes != sizeof(Scalar))
    throw std::runtime_error("load_model: scalar width mismatch (file has " +
                             std::to_string(scalar_bytes) + "-byte values)");
  const auto n_sizes = detail::read_pod<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("load_model: bad layer count");

  MlpModel<Scalar> model;
  for (std::uint32_t i = 0; i < n_sizes; ++i) {
    const auto s = detail::read_pod<std::uint32_t>(in);
    if (s < 1 || s > (1u << 24)) throw std::runtime_error("load_model: bad layer size");
    model.layer_sizes.push_back(static_cast<int>(s));
  }
  for (std::uint32_t l = 0; l + 1 < n_sizes; ++l) {
    const auto tag = detail::read_pod<std::uint8_t>(in);
    const std::uint8_t expected = (l + 2 < n_sizes) ? 1 : 0;
    if (tag != expected) throw std::runtime_error("load_model: unexpected activation tag");
  }
  for (std::uint32_t l = 0; l + 1 < n_sizes; ++l) {
    typename MlpModel<Scalar>::Matrix w(model.layer_sizes[l + 1], model.layer_sizes[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = detail::read_pod<Scalar>(in);
    typename MlpModel<Scalar>::Vector b(model.layer_sizes[l + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = detail::read_pod<Scalar>(in);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

inline void write_curve_csv(const std::vector<EpochStats>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_curve_csv: cannot open " + path);
  out << "epoch,train_mse,val_mse\n";
  char buf[96];
  for (const auto& e : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
    out << buf;
  }
}

}  // namespace beamcode
