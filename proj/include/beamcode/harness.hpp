#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "beamcode/baselines.hpp"
#include "beamcode/channel.hpp"
#include "beamcode/decoders.hpp"
#include "beamcode/gf2.hpp"
#include "beamcode/measurement.hpp"
#include "beamcode/mlp.hpp"

namespace beamcode {

enum class Method { source_search, source_dnn, source_dnn_sd, cs_search, sweep_80211ad };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::source_search: return "source_search";
    case Method::source_dnn: return "source_dnn";
    case Method::source_dnn_sd: return "source_dnn_sd";
    case Method::cs_search: return "cs_search";
    case Method::sweep_80211ad: return "sweep_80211ad";
  }
  throw std::logic_error("to_string(Method): bad value");
}

inline Method method_from_string(const std::string& s) {
  if (s == "source_search") return Method::source_search;
  if (s == "source_dnn") return Method::source_dnn;
  if (s == "source_dnn_sd") return Method::source_dnn_sd;
  if (s == "cs_search") return Method::cs_search;
  if (s == "sweep_80211ad") return Method::sweep_80211ad;
  throw std::invalid_argument("unknown method '" + s + "'");
}

enum class OverlapStat { max, mean };

/// Link-budget constants for energy accounting.
struct LinkBudget {
  double mu_db = -88.0;    // average path loss
  double n0_dbm = -88.0;   // noise power
  double tau_s = 23e-6;    // duration of one measurement
};

struct ScenarioConfig {
  int n_rx = 0;
  int n_tx = 0;
  int l_max = 0;
  std::optional<CodeSpec> rx_code;
  std::optional<CodeSpec> tx_code;
  Method method = Method::source_search;
  std::vector<double> snr_grid_db;
  std::vector<double> energy_grid_mj;  // alternative x axis; exactly one grid may be set
  AdcBits adc_bits = AdcBits::infinite();
  int trials = 2000;
  std::uint64_t seed = 1;
  double alpha_max = 1.0;
  LinkBudget link;
  SupportLaw support_law = SupportLaw::size_then_bins;
  OverlapStat overlap_stat = OverlapStat::max;
  NoiseFamily noise_family = NoiseFamily::gaussian;
  std::string model_dir;
  double v_fs = 0;  // 0 selects the default L * alpha_max
  int threads = 0;  // 0 selects hardware concurrency
  std::uint64_t l0_budget = kL0Budget;

  double full_scale() const { return v_fs > 0 ? v_fs : l_max * alpha_max; }

  bool needs_codes() const { return method != Method::sweep_80211ad; }

  void validate() const {
    if (n_rx < 1 || n_tx < 1) throw std::invalid_argument("config: n_r and n_t must be >= 1");
    if (l_max < 0 || l_max > n_rx * n_tx) throw std::invalid_argument("config: bad L");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (alpha_max <= 0) throw std::invalid_argument("config: alpha_max must be > 0");
    if (snr_grid_db.empty() == energy_grid_mj.empty())
      throw std::invalid_argument("config: exactly one of snr_grid_db / energy_grid_mj required");
    if (needs_codes()) {
      if (!rx_code || !tx_code)
        throw std::invalid_argument("config: rx_code and tx_code required for this method");
      const BinaryMatrix gr = rx_code->build();
      const BinaryMatrix gt = tx_code->build();
      if (gr.cols() != n_rx)
        throw std::invalid_argument("config: rx_code has " + std::to_string(gr.cols()) +
                                    " columns, expected n_r = " + std::to_string(n_rx));
      if (gt.cols() != n_tx)
        throw std::invalid_argument("config: tx_code has " + std::to_string(gt.cols()) +
                                    " columns, expected n_t = " + std::to_string(n_tx));
      if (!is_injective_over_supports(gr, l_max))
        throw std::invalid_argument("config: rx_code is not injective over supports for L");
      if (!is_injective_over_supports(gt, l_max))
        throw std::invalid_argument("config: tx_code is not injective over supports for L");
    }
    if ((method == Method::source_dnn || method == Method::source_dnn_sd) && model_dir.empty())
      throw std::invalid_argument("config: model_dir required for DNN methods");
  }

  static ScenarioConfig parse(std::istream& in, const std::string& base_dir = "");
  static ScenarioConfig load(const std::string& path);
};

/// Measurement sweep size and beam-overlap factors of the configured method.
struct MeasurementBudget {
  int n_measurements = 0;
  double o_t = 1;
  double o_r = 1;
};

inline MeasurementBudget measurement_budget(const ScenarioConfig& cfg) {
  MeasurementBudget b;
  if (cfg.method == Method::sweep_80211ad) {
    b.n_measurements = cfg.n_rx + cfg.n_tx;
    return b;
  }
  const BinaryMatrix gr = cfg.rx_code->build();
  const BinaryMatrix gt = cfg.tx_code->build();
  b.n_measurements = gr.rows() * gt.rows();
  if (cfg.method == Method::cs_search) return b;  // unit-norm beams
  b.o_r = cfg.overlap_stat == OverlapStat::max ? gr.max_row_weight() : gr.mean_row_weight();
  b.o_t = cfg.overlap_stat == OverlapStat::max ? gt.max_row_weight() : gt.mean_row_weight();
  return b;
}

/// Fraction of measurements saved against an exhaustive n_r * n_t scan.
inline double measurement_reduction(const ScenarioConfig& cfg) {
  const auto b = measurement_budget(cfg);
  return 1.0 - static_cast<double>(b.n_measurements) / (static_cast<double>(cfg.n_rx) * cfg.n_tx);
}

/// Energy for one full sweep, in millijoules, with fractional overlap factors
/// allowed (mean row-weight accounting).
inline double sweep_energy_mj(int m, double o_t, double o_r, double snr_linear,
                              const LinkBudget& link) {
  const double n0_mw = std::pow(10.0, link.n0_dbm / 10.0);
  const double mu_linear = std::pow(10.0, link.mu_db / 10.0);
  return m * o_t * o_r * snr_linear * (n0_mw / mu_linear) * link.tau_s;
}

/// Inverse of sweep_energy_mj: the per-beam SNR a method may spend when the
/// whole sweep is capped at energy_mj.
inline double snr_for_energy(double energy_mj, int m, double o_t, double o_r,
                             const LinkBudget& link) {
  const double n0_mw = std::pow(10.0, link.n0_dbm / 10.0);
  const double mu_linear = std::pow(10.0, link.mu_db / 10.0);
  const double denom = m * o_t * o_r * (n0_mw / mu_linear) * link.tau_s;
  if (denom <= 0 || energy_mj < 0) throw std::invalid_argument("snr_for_energy: bad arguments");
  return energy_mj / denom;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// ||Q^a - Q_hat||_F^2 / ||Q^a||_F^2. Undefined (throws) for a zero true
/// channel; the experiment loop excludes those trials and counts them apart.
inline double normalized_mse(const AngularChannel& truth, const Eigen::MatrixXcd& estimate) {
  if (truth.entries.rows() != estimate.rows() || truth.entries.cols() != estimate.cols())
    throw std::invalid_argument("normalized_mse: shape mismatch");
  const double denom = truth.entries.squaredNorm();
  if (denom == 0) throw std::invalid_argument("normalized_mse: zero true channel");
  return (truth.entries - estimate).squaredNorm() / denom;
}

/// Number of true paths whose bins appear among the L strongest entries of
/// the estimate.
inline int path_detection(const AngularChannel& truth, const Eigen::MatrixXcd& estimate, int l_max) {
  const auto top = top_l_paths(estimate, l_max);
  int k = 0;
  for (const auto& p : truth.paths)
    for (const auto& t : top)
      if (t.rx_bin == p.rx_bin && t.tx_bin == p.tx_bin) {
        ++k;
        break;
      }
  return k;
}

/// MIMO capacity with equal power allocation over the singular modes:
/// sum_i log2(1 + (snr / n_t) * sigma_i(Q)^2).
inline double channel_capacity(const Eigen::MatrixXcd& q, double snr_linear) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(q);
  const auto& s = svd.singularValues();
  double c = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    // zero modes contribute nothing even at infinite SNR
    if (s[i] > 0) c += std::log2(1.0 + snr_linear / q.cols() * s[i] * s[i]);
  }
  return c;
}

/// Capacity counted only when every true path was discovered; zero on outage.
inline double outage_rate(const Eigen::MatrixXcd& q, bool detected_ok, double snr_linear) {
  return detected_ok ? channel_capacity(q, snr_linear) : 0.0;
}

struct MetricsRecord {
  std::string method;
  double energy_mj = 0;
  double snr_db = 0;
  AdcBits adc_bits = AdcBits::infinite();
  int n_measurements = 0;
  double normalized_mse = 0;          // mean over trials with a nonzero channel
  std::vector<double> p_detect;       // P(k >= j), j = 1..L, over trials with >= 1 path
  double outage_rate_bps_hz = 0;      // mean over all trials
  double perfect_csi_rate_bps_hz = 0;  // mean capacity over all trials
  int trials = 0;
  int zero_channel_trials = 0;
};

// ---------------------------------------------------------------------------
// DNN model bank
// ---------------------------------------------------------------------------

/// manifest.json written by `train-dnn`: a list of model file pairs, each
/// optionally pinned to the (snr_db, adc_bits) point it was trained for.
struct ModelManifest {
  struct Entry {
    bool has_point = false;
    double snr_db = 0;
    AdcBits adc = AdcBits::infinite();
    std::string rx_file;
    std::string tx_file;
  };
  std::string kind;  // "plain" or "sd"
  std::vector<Entry> entries;

  static ModelManifest load(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw std::runtime_error("cannot open " + dir + "/manifest.json");
    nlohmann::json j;
    in >> j;
    ModelManifest m;
    m.kind = j.at("kind").get<std::string>();
    for (const auto& e : j.at("models")) {
      Entry entry;
      entry.rx_file = e.at("rx").get<std::string>();
      entry.tx_file = e.at("tx").get<std::string>();
      if (e.contains("snr_db")) {
        entry.has_point = true;
        entry.snr_db = e.at("snr_db").get<double>();
        entry.adc = AdcBits::parse(e.at("adc_bits").get<std::string>());
      }
      m.entries.push_back(std::move(entry));
    }
    return m;
  }

  void save(const std::string& dir) const {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& e : entries) {
      nlohmann::json je{{"rx", e.rx_file}, {"tx", e.tx_file}};
      if (e.has_point) {
        je["snr_db"] = e.snr_db;
        je["adc_bits"] = e.adc.str();
      }
      models.push_back(std::move(je));
    }
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw std::runtime_error("cannot write " + dir + "/manifest.json");
    out << nlohmann::json{{"version", 1}, {"kind", kind}, {"models", models}}.dump(2) << '\n';
  }

  /// Nearest entry in the (snr_db, bits) plane; infinite resolution counts
  /// as 32 bits for distance purposes.
  const Entry& select(double snr_db, AdcBits adc) const {
    if (entries.empty()) throw std::runtime_error("model manifest is empty");
    auto bits_of = [](AdcBits b) { return b.finite ? std::min(b.value, 32) : 32; };
    const Entry* best = &entries.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) {
      if (!e.has_point) return e;  // a plain model serves every point
      const double ds = e.snr_db - snr_db;
      const double db = bits_of(e.adc) - bits_of(adc);
      const double d = ds * ds + db * db;
      if (d < best_d) {
        best_d = d;
        best = &e;
      }
    }
    return *best;
  }
};

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

namespace detail {

/// Numerically stable fixed-order reduction; result is independent of how
/// trials were scheduled across the worker pool.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

template <class Fn>
void run_parallel(int count, int threads, Fn&& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
      next.store(count);  // drain remaining work
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct TrialOutcome {
  int true_paths = 0;
  double mse = 0;
  std::array<std::uint8_t, 8> detect{};  // d_j = 1{k >= min(j, true_paths)}, j = 1..L
  bool detected_all = false;
  double capacity = 0;
};

}  // namespace detail

inline std::vector<MetricsRecord> run_experiment(const ScenarioConfig& cfg) {
  cfg.validate();
  if (cfg.l_max > 8) throw std::invalid_argument("run_experiment: L > 8 not supported");

  const Eigen::MatrixXcd rx_basis = dft_matrix({cfg.n_rx, 0.5});
  const Eigen::MatrixXcd tx_basis = dft_matrix({cfg.n_tx, 0.5});

  std::optional<BinaryMatrix> rx_code, tx_code;
  std::optional<BeamformerBank> combiners, precoders;
  if (cfg.needs_codes()) {
    rx_code = cfg.rx_code->build();
    tx_code = cfg.tx_code->build();
    if (cfg.method != Method::cs_search) {
      combiners = build_combiners(*rx_code, rx_basis);
      precoders = build_precoders(*tx_code, tx_basis);
    }
  }

  std::optional<SimoDecoder> rx_search, tx_search;
  if (cfg.method == Method::source_search) {
    rx_search.emplace(SearchDecoder(*rx_code, cfg.l_max));
    tx_search.emplace(SearchDecoder(*tx_code, cfg.l_max));
  }

  std::optional<ModelManifest> manifest;
  if (cfg.method == Method::source_dnn || cfg.method == Method::source_dnn_sd)
    manifest = ModelManifest::load(cfg.model_dir);

  const MeasurementBudget budget = measurement_budget(cfg);
  const double v_fs = cfg.full_scale();
  const bool energy_axis = !cfg.energy_grid_mj.empty();
  const std::vector<double>& grid = energy_axis ? cfg.energy_grid_mj : cfg.snr_grid_db;

  std::vector<MetricsRecord> records;
  for (double grid_value : grid) {
    double snr_db, snr_linear, energy_mj;
    if (energy_axis) {
      energy_mj = grid_value;
      snr_linear = snr_for_energy(energy_mj, budget.n_measurements, budget.o_t, budget.o_r, cfg.link);
      snr_db = 10.0 * std::log10(snr_linear);
    } else {
      snr_db = grid_value;
      snr_linear = std::pow(10.0, snr_db / 10.0);
      energy_mj = sweep_energy_mj(budget.n_measurements, budget.o_t, budget.o_r, snr_linear, cfg.link);
    }

    // decoders for this grid point
    std::optional<SimoDecoder> rx_dec_storage, tx_dec_storage;
    const SimoDecoder* rx_dec = nullptr;
    const SimoDecoder* tx_dec = nullptr;
    if (cfg.method == Method::source_search) {
      rx_dec = &*rx_search;
      tx_dec = &*tx_search;
    } else if (manifest) {
      const auto& entry = manifest->select(snr_db, cfg.adc_bits);
      MlpDecoder rx_mlp{load_model<float>(cfg.model_dir + "/" + entry.rx_file)};
      MlpDecoder tx_mlp{load_model<float>(cfg.model_dir + "/" + entry.tx_file)};
      if (rx_mlp.model.input_size() != rx_code->rows() || rx_mlp.model.output_size() != rx_code->cols())
        throw std::runtime_error("run_experiment: rx model shape does not match the rx code");
      if (tx_mlp.model.input_size() != tx_code->rows() || tx_mlp.model.output_size() != tx_code->cols())
        throw std::runtime_error("run_experiment: tx model shape does not match the tx code");
      rx_dec_storage.emplace(std::move(rx_mlp));
      tx_dec_storage.emplace(std::move(tx_mlp));
      rx_dec = &*rx_dec_storage;
      tx_dec = &*tx_dec_storage;
    }

    std::vector<detail::TrialOutcome> outcomes(cfg.trials);
    detail::run_parallel(cfg.trials, cfg.threads, [&](int trial) {
      Rng rng = trial_rng(cfg.seed, static_cast<std::uint64_t>(trial));
      const AngularChannel truth =
          sample_channel(cfg.n_rx, cfg.n_tx, cfg.l_max, cfg.alpha_max, rng, cfg.support_law);
      const Eigen::MatrixXcd q = to_physical(truth, rx_basis, tx_basis);

      Eigen::MatrixXcd estimate;
      switch (cfg.method) {
        case Method::source_search:
        case Method::source_dnn:
        case Method::source_dnn_sd: {
          const MeasurementSet ms = acquire(q, *combiners, *precoders, snr_db, cfg.adc_bits, v_fs,
                                            rng, cfg.noise_family);
          estimate = decode_mimo(ms, *rx_dec, *tx_dec).q_hat;
          break;
        }
        case Method::cs_search: {
          const BeamformerBank w = cs_random_beamformers(cfg.n_rx, rx_code->rows(), rng);
          const BeamformerBank f = cs_random_beamformers(cfg.n_tx, tx_code->rows(), rng);
          const MeasurementSet ms =
              acquire(q, w, f, snr_db, cfg.adc_bits, v_fs, rng, cfg.noise_family);
          const SensingMatrix sensing = build_sensing_matrix(w, f, rx_basis, tx_basis);
          const Eigen::VectorXcd y =
              Eigen::Map<const Eigen::VectorXcd>(ms.observed.data(), ms.observed.size());
          estimate =
              unvec_channel(sparse_recover_l0(y, sensing, cfg.l_max, cfg.l0_budget), cfg.n_rx, cfg.n_tx);
          break;
        }
        case Method::sweep_80211ad: {
          const SweepResult sweep = sector_sweep_80211ad(q, rx_basis, tx_basis, snr_db, cfg.adc_bits,
                                                         v_fs, rng, cfg.noise_family);
          estimate = Eigen::MatrixXcd::Zero(cfg.n_rx, cfg.n_tx);
          if (!sweep.no_signal) {
            // single-element patterns see the path through a 1/sqrt(n) gain
            const Complex gain = 0.5 * (sweep.rx_peak * std::sqrt(double(cfg.n_tx)) +
                                        sweep.tx_peak * std::sqrt(double(cfg.n_rx)));
            estimate(sweep.rx_bin, sweep.tx_bin) = gain;
          }
          break;
        }
      }

      estimate = denoise_estimate(std::move(estimate), cfg.alpha_max);

      detail::TrialOutcome& out = outcomes[trial];
      out.true_paths = truth.path_count();
      if (out.true_paths > 0) {
        out.mse = normalized_mse(truth, estimate);
        const int k = path_detection(truth, estimate, std::max(1, cfg.l_max));
        for (int j = 1; j <= cfg.l_max; ++j)
          out.detect[j - 1] = k >= std::min(j, out.true_paths) ? 1 : 0;
        out.detected_all = k >= out.true_paths;
      } else {
        out.detected_all = true;  // nothing to miss
      }
      out.capacity = channel_capacity(q, snr_linear);
    });

    // fixed-order aggregation
    std::vector<double> mse_values, outage_values, capacity_values;
    std::vector<std::vector<double>> detect_values(cfg.l_max);
    int zero_channels = 0;
    for (const auto& out : outcomes) {
      capacity_values.push_back(out.capacity);
      outage_values.push_back(out.detected_all ? out.capacity : 0.0);
      if (out.true_paths == 0) {
        ++zero_channels;
        continue;
      }
      mse_values.push_back(out.mse);
      for (int j = 0; j < cfg.l_max; ++j) detect_values[j].push_back(out.detect[j]);
    }

    MetricsRecord rec;
    rec.method = to_string(cfg.method);
    rec.energy_mj = energy_mj;
    rec.snr_db = snr_db;
    rec.adc_bits = cfg.adc_bits;
    rec.n_measurements = budget.n_measurements;
    rec.normalized_mse =
        mse_values.empty() ? 0.0 : detail::pairwise_sum(mse_values) / mse_values.size();
    for (int j = 0; j < cfg.l_max; ++j)
      rec.p_detect.push_back(detect_values[j].empty()
                                 ? 0.0
                                 : detail::pairwise_sum(detect_values[j]) / detect_values[j].size());
    rec.outage_rate_bps_hz = detail::pairwise_sum(outage_values) / cfg.trials;
    rec.perfect_csi_rate_bps_hz = detail::pairwise_sum(capacity_values) / cfg.trials;
    rec.trials = cfg.trials;
    rec.zero_channel_trials = zero_channels;
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Result emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void emit_csv(const std::vector<MetricsRecord>& records, std::ostream& out) {
  std::size_t max_l = 0;
  for (const auto& r : records) max_l = std::max(max_l, r.p_detect.size());
  out << "method,energy_mj,snr_db,adc_bits,n_measurements,mse";
  for (std::size_t j = 1; j <= max_l; ++j) out << ",p_k" << j;
  out << ",outage,perfect_csi,trials\n";
  for (const auto& r : records) {
    out << r.method << ',' << detail::format_double(r.energy_mj) << ','
        << detail::format_double(r.snr_db) << ',' << r.adc_bits.str() << ',' << r.n_measurements
        << ',' << detail::format_double(r.normalized_mse);
    for (std::size_t j = 0; j < max_l; ++j)
      out << ',' << (j < r.p_detect.size() ? detail::format_double(r.p_detect[j]) : "");
    out << ',' << detail::format_double(r.outage_rate_bps_hz) << ','
        << detail::format_double(r.perfect_csi_rate_bps_hz) << ',' << r.trials << '\n';
  }
}

namespace detail {

// JSON has no literal for infinities; encode non-finite values as strings
inline nlohmann::json double_to_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);  // "inf", "-inf", "nan"
}

inline double double_from_json(const nlohmann::json& j) {
  if (j.is_string()) return std::stod(j.get<std::string>());
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const MetricsRecord& r) {
  return {{"method", r.method},
          {"energy_mj", detail::double_to_json(r.energy_mj)},
          {"snr_db", detail::double_to_json(r.snr_db)},
          {"adc_bits", r.adc_bits.str()},
          {"n_measurements", r.n_measurements},
          {"mse", r.normalized_mse},
          {"p_detect", r.p_detect},
          {"outage", detail::double_to_json(r.outage_rate_bps_hz)},
          {"perfect_csi", detail::double_to_json(r.perfect_csi_rate_bps_hz)},
          {"trials", r.trials},
          {"zero_channel_trials", r.zero_channel_trials}};
}

inline MetricsRecord metrics_record_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.method = j.at("method").get<std::string>();
  r.energy_mj = detail::double_from_json(j.at("energy_mj"));
  r.snr_db = detail::double_from_json(j.at("snr_db"));
  r.adc_bits = AdcBits::parse(j.at("adc_bits").get<std::string>());
  r.n_measurements = j.at("n_measurements").get<int>();
  r.normalized_mse = j.at("mse").get<double>();
  r.p_detect = j.at("p_detect").get<std::vector<double>>();
  r.outage_rate_bps_hz = detail::double_from_json(j.at("outage"));
  r.perfect_csi_rate_bps_hz = detail::double_from_json(j.at("perfect_csi"));
  r.trials = j.at("trials").get<int>();
  r.zero_channel_trials = j.at("zero_channel_trials").get<int>();
  return r;
}

inline void emit_results(const std::vector<MetricsRecord>& records, const std::string& path,
                         const std::string& format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_results: cannot open " + path);
  if (format == "csv") {
    emit_csv(records, out);
  } else if (format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    out << arr.dump(2) << '\n';
  } else {
    throw std::invalid_argument("emit_results: format must be csv or json");
  }
  if (!out) throw std::runtime_error("emit_results: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Config file parsing: '#' comments and blank lines ignored, otherwise
// "key = value" with comma-separated lists.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace detail

inline ScenarioConfig ScenarioConfig::parse(std::istream& in, const std::string& base_dir) {
  ScenarioConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "n_r") cfg.n_rx = std::stoi(value);
    else if (key == "n_t") cfg.n_tx = std::stoi(value);
    else if (key == "L") cfg.l_max = std::stoi(value);
    else if (key == "rx_code") cfg.rx_code = CodeSpec::parse(value, base_dir);
    else if (key == "tx_code") cfg.tx_code = CodeSpec::parse(value, base_dir);
    else if (key == "method") cfg.method = method_from_string(value);
    else if (key == "snr_grid_db") cfg.snr_grid_db = detail::parse_double_list(value);
    else if (key == "energy_grid_mj") cfg.energy_grid_mj = detail::parse_double_list(value);
    else if (key == "adc_bits") cfg.adc_bits = AdcBits::parse(value);
    else if (key == "trials") cfg.trials = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "alpha_max") cfg.alpha_max = std::stod(value);
    else if (key == "mu_db") cfg.link.mu_db = std::stod(value);
    else if (key == "n0_dbm") cfg.link.n0_dbm = std::stod(value);
    else if (key == "tau_s") cfg.link.tau_s = std::stod(value);
    else if (key == "support_law")
      cfg.support_law = value == "uniform_over_supports" ? SupportLaw::uniform_over_supports
                                                         : SupportLaw::size_then_bins;
    else if (key == "overlap_stat")
      cfg.overlap_stat = value == "mean" ? OverlapStat::mean : OverlapStat::max;
    else if (key == "noise_family")
      cfg.noise_family = value == "uniform" ? NoiseFamily::uniform : NoiseFamily::gaussian;
    else if (key == "model_dir")
      cfg.model_dir = (!value.empty() && value[0] != '/' && !base_dir.empty())
                          ? base_dir + "/" + value
                          : value;
    else if (key == "v_fs") cfg.v_fs = std::stod(value);
    else if (key == "threads") cfg.threads = std::stoi(value);
    else if (key == "l0_budget") cfg.l0_budget = std::stoull(value);
    else
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
  }
  return cfg;
}

inline ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return parse(in, dir);
}

}  // namespace beamcode
