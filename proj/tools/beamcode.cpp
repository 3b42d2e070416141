// Command-line front end: Monte Carlo simulation, decoder training, and code
// verification for source-coded beam measurement experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beamcode/baselines.hpp"
#include "beamcode/decoders.hpp"
#include "beamcode/harness.hpp"
#include "beamcode/mlp.hpp"

namespace {

using namespace beamcode;

std::vector<int> scaled_hidden_ladder(int output_dim) {
  // reference ladder tuned for a 23-bin decoder, scaled by output width
  static constexpr int kBase[] = {1024, 512, 512, 128, 128};
  std::vector<int> hidden;
  for (int w : kBase)
    hidden.push_back(std::max(16, static_cast<int>(std::llround(w * output_dim / 23.0))));
  return hidden;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

struct TrainJob {
  std::string tag;  // "rx" or "tx"
  BinaryMatrix code;
  NoiseSpec noise;
  std::string file_name;
};

int run_train_dnn(const std::string& config_path, const std::string& out_dir, bool sd,
                  const std::string& snr_grid_text, const std::string& bits_grid_text,
                  int samples_per_support, int epochs, bool fast, const std::string& hidden_text,
                  std::uint64_t seed) {
  ScenarioConfig cfg = ScenarioConfig::load(config_path);
  if (!cfg.rx_code || !cfg.tx_code)
    throw std::runtime_error("train-dnn: config must name rx_code and tx_code");
  if (fast) {
    samples_per_support = std::min(samples_per_support, 50);
    epochs = std::min(epochs, 60);
  }

  const BinaryMatrix rx_code = cfg.rx_code->build();
  const BinaryMatrix tx_code = cfg.tx_code->build();
  const bool shared_code = rx_code == tx_code;
  const double v_fs = cfg.full_scale();

  std::vector<std::pair<double, AdcBits>> grid;  // (snr_db, bits) points for sd training
  if (sd) {
    std::vector<double> snrs = detail::parse_double_list(
        snr_grid_text.empty() ? std::string() : snr_grid_text);
    if (snrs.empty()) snrs = cfg.snr_grid_db;
    if (snrs.empty())
      throw std::runtime_error("train-dnn --sd: provide --snr-grid or an snr_grid_db config");
    std::vector<AdcBits> bits;
    if (bits_grid_text.empty()) {
      bits.push_back(cfg.adc_bits);
    } else {
      std::stringstream ss(bits_grid_text);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) bits.push_back(AdcBits::parse(detail::trim(item)));
    }
    for (double s : snrs)
      for (AdcBits b : bits) grid.emplace_back(s, b);
  }

  std::filesystem::create_directories(out_dir);
  ModelManifest manifest;
  manifest.kind = sd ? "sd" : "plain";

  auto train_one = [&](const TrainJob& job) {
    const int m = job.code.rows();
    const int n = job.code.cols();
    std::vector<int> arch{m};
    std::vector<int> hidden =
        hidden_text.empty() ? scaled_hidden_ladder(n) : parse_int_list(hidden_text);
    arch.insert(arch.end(), hidden.begin(), hidden.end());
    arch.push_back(n);

    Rng rng(seed);
    const auto data = gen_training_data<float>(job.code, cfg.l_max, samples_per_support,
                                               cfg.alpha_max, job.noise, rng);
    TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = seed;
    std::printf("training %s: %lld samples, arch", job.file_name.c_str(),
                static_cast<long long>(data.count()));
    for (int a : arch) std::printf(" %d", a);
    std::printf(", noise %s\n", job.noise.describe().c_str());
    std::fflush(stdout);

    const auto result = train(data, arch, tc);
    save_model(result.model, out_dir + "/" + job.file_name);
    write_curve_csv(result.curve, out_dir + "/" + job.file_name + ".curve.csv");
    std::printf("  best val mse %.6g at epoch %d\n", result.best_val_mse, result.best_epoch);
    std::fflush(stdout);
  };

  auto add_entry = [&](const NoiseSpec& noise, bool has_point, double snr_db, AdcBits adc,
                       const std::string& suffix) {
    ModelManifest::Entry entry;
    entry.has_point = has_point;
    entry.snr_db = snr_db;
    entry.adc = adc;
    entry.rx_file = "rx" + suffix + ".mlp";
    entry.tx_file = shared_code ? entry.rx_file : "tx" + suffix + ".mlp";
    train_one({"rx", rx_code, noise, entry.rx_file});
    if (!shared_code) train_one({"tx", tx_code, noise, entry.tx_file});
    manifest.entries.push_back(entry);
  };

  if (!sd) {
    add_entry(NoiseSpec::none(), false, 0, AdcBits::infinite(), "");
  } else {
    for (const auto& [snr_db, bits] : grid) {
      char suffix[64];
      std::snprintf(suffix, sizeof suffix, "_snr%g_b%s", snr_db, bits.str().c_str());
      add_entry(NoiseSpec::corrupted(snr_db, bits, v_fs), true, snr_db, bits, suffix);
    }
  }
  manifest.save(out_dir);
  std::printf("wrote %zu model entr%s to %s\n", manifest.entries.size(),
              manifest.entries.size() == 1 ? "y" : "ies", out_dir.c_str());
  return 0;
}

int run_verify_code(const std::string& code_text, int n, int l_max, std::uint64_t budget) {
  const CodeSpec spec = CodeSpec::parse(code_text, std::filesystem::current_path().string());
  const BinaryMatrix g = spec.build();
  std::printf("code %s: %d x %d\n", spec.source.c_str(), g.rows(), g.cols());
  std::printf("gf2 rank: %d\n", rank_gf2(g));
  std::printf("row weight: max %d, mean %.3f\n", g.max_row_weight(), g.mean_row_weight());
  std::printf("sigma_min: %.9f\n", min_singular_value(g));

  bool ok = true;
  if (g.cols() != n) {
    std::printf("MISMATCH: code has %d columns but n = %d\n", g.cols(), n);
    ok = false;
  }
  const int bound = min_measurements_lower_bound(n, l_max);
  std::printf("lower bound for (n=%d, L=%d): %d measurements (code uses %d)\n", n, l_max, bound,
              g.rows());
  const bool injective = is_injective_over_supports(g, l_max, budget);
  std::printf("injective over supports with <= %d nonzeros: %s\n", l_max,
              injective ? "yes" : "NO");
  ok = ok && injective;
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"source-coded mmWave channel estimation toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo scenario and write metrics");
  std::string sim_config, sim_out, sim_format = "csv";
  bool sim_fast = false;
  int sim_trials = -1, sim_threads = -1;
  std::int64_t sim_seed = -1;
  sim->add_option("--config", sim_config, "scenario config file")->required();
  sim->add_option("--out", sim_out, "output path")->required();
  sim->add_option("--format", sim_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  sim->add_flag("--fast", sim_fast, "cut trials to a tenth (min 100) for a quick look");
  sim->add_option("--trials", sim_trials, "override trial count");
  sim->add_option("--seed", sim_seed, "override RNG seed");
  sim->add_option("--threads", sim_threads, "override worker count");

  // train-dnn
  auto* tr = app.add_subcommand("train-dnn", "train measurement-decoding models for a scenario");
  std::string tr_config, tr_out, tr_snr_grid, tr_bits_grid, tr_hidden;
  bool tr_sd = false, tr_fast = false;
  int tr_samples = 300, tr_epochs = 200;
  std::uint64_t tr_seed = 7;
  tr->add_option("--config", tr_config, "scenario config file")->required();
  tr->add_option("--out", tr_out, "model directory")->required();
  tr->add_flag("--sd", tr_sd, "train per-(SNR, ADC) models on corrupted measurements");
  tr->add_option("--snr-grid", tr_snr_grid, "comma list of SNR points for --sd");
  tr->add_option("--bits-grid", tr_bits_grid, "comma list of ADC resolutions for --sd");
  tr->add_option("--samples", tr_samples, "training channels per support (default 300)");
  tr->add_option("--epochs", tr_epochs, "training epochs (default 200)");
  tr->add_flag("--fast", tr_fast, "desk scale: 50 samples per support, 60 epochs");
  tr->add_option("--hidden", tr_hidden, "override hidden layer sizes, comma list");
  tr->add_option("--seed", tr_seed, "training RNG seed");

  // verify-code
  auto* ver = app.add_subcommand("verify-code", "check a code against a channel configuration");
  std::string ver_code;
  int ver_n = 0, ver_l = 0;
  std::uint64_t ver_budget = beamcode::kInjectivityBudget;
  ver->add_option("--code", ver_code, "hamming:R | golay23 | file:PATH")->required();
  ver->add_option("--n", ver_n, "number of angular bins")->required();
  ver->add_option("--L", ver_l, "maximum number of paths")->required();
  ver->add_option("--budget", ver_budget, "injectivity enumeration budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      beamcode::ScenarioConfig cfg = beamcode::ScenarioConfig::load(sim_config);
      if (sim_trials > 0) cfg.trials = sim_trials;
      if (sim_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sim_seed);
      if (sim_threads >= 0) cfg.threads = sim_threads;
      if (sim_fast && cfg.trials > 100) cfg.trials = std::max(100, cfg.trials / 10);
      const auto budget = beamcode::measurement_budget(cfg);
      std::printf("method %s: %d measurements (%.1f%% reduction vs %d exhaustive), %d trials\n",
                  beamcode::to_string(cfg.method).c_str(), budget.n_measurements,
                  100.0 * beamcode::measurement_reduction(cfg), cfg.n_rx * cfg.n_tx, cfg.trials);
      std::fflush(stdout);
      const auto records = beamcode::run_experiment(cfg);
      beamcode::emit_results(records, sim_out, sim_format);
      std::printf("wrote %zu records to %s\n", records.size(), sim_out.c_str());
      return 0;
    }
    if (*tr)
      return run_train_dnn(tr_config, tr_out, tr_sd, tr_snr_grid, tr_bits_grid, tr_samples,
                           tr_epochs, tr_fast, tr_hidden, tr_seed);
    if (*ver) return run_verify_code(ver_code, ver_n, ver_l, ver_budget);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
