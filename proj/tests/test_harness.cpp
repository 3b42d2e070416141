#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamcode/harness.hpp"
#include "helpers.hpp"

using namespace beamcode;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig golay_23x23(Method method) {
  ScenarioConfig cfg;
  cfg.n_rx = 23;
  cfg.n_tx = 23;
  cfg.l_max = 3;
  cfg.rx_code = CodeSpec::golay23();
  cfg.tx_code = CodeSpec::golay23();
  cfg.method = method;
  cfg.adc_bits = AdcBits::infinite();
  cfg.trials = 20;
  cfg.seed = 5;
  cfg.snr_grid_db = {kInf};
  return cfg;
}

ScenarioConfig small_scenario(Method method) {
  ScenarioConfig cfg;
  cfg.n_rx = 7;
  cfg.n_tx = 3;
  cfg.l_max = 1;
  cfg.rx_code = CodeSpec::hamming(3);
  cfg.tx_code = CodeSpec::hamming(2);
  cfg.method = method;
  cfg.adc_bits = AdcBits::of(6);
  cfg.trials = 64;
  cfg.seed = 11;
  cfg.snr_grid_db = {10.0};
  return cfg;
}

}  // namespace

TEST_CASE("normalized mse") {
  Rng rng(1);
  auto ch = sample_channel(4, 4, 2, 1.0, rng);
  while (ch.path_count() == 0) ch = sample_channel(4, 4, 2, 1.0, rng);

  CHECK(normalized_mse(ch, ch.entries) == 0.0);
  CHECK(normalized_mse(ch, Eigen::MatrixXcd::Zero(4, 4)) == Catch::Approx(1.0));
  CHECK(normalized_mse(ch, 2.0 * ch.entries) == Catch::Approx(1.0));
  CHECK_THROWS_AS(normalized_mse(AngularChannel::zero(4, 4), Eigen::MatrixXcd::Zero(4, 4)),
                  std::invalid_argument);
}

TEST_CASE("path detection") {
  SECTION("an exact estimate finds every path") {
    const auto ch = AngularChannel::from_paths(
        5, 5, {{0, 1, {1, 0}}, {2, 3, {0, 0.5}}, {4, 4, {-0.25, 0}}});
    CHECK(path_detection(ch, ch.entries, 3) == 3);
  }

  SECTION("a zero estimate finds nothing") {
    const auto ch = AngularChannel::from_paths(5, 5, {{1, 1, {1, 0}}});
    CHECK(path_detection(ch, Eigen::MatrixXcd::Zero(5, 5), 3) == 0);
  }

  SECTION("true paths ranked 1, 2 and 4 by magnitude count two of three") {
    const auto ch = AngularChannel::from_paths(
        4, 4, {{0, 0, {1.0, 0}}, {1, 1, {0.9, 0}}, {2, 2, {0.5, 0}}});
    Eigen::MatrixXcd est = ch.entries;
    est(3, 3) = Complex{0.7, 0.0};  // a ghost outranks the weakest true path
    CHECK(path_detection(ch, est, 3) == 2);
  }
}

TEST_CASE("outage rate and capacity") {
  SECTION("outage contributes zero") {
    Eigen::MatrixXcd q = Eigen::MatrixXcd::Identity(3, 3);
    CHECK(outage_rate(q, false, 10.0) == 0.0);
  }

  SECTION("zero channel has zero capacity") {
    CHECK(outage_rate(Eigen::MatrixXcd::Zero(3, 3), true, 10.0) == 0.0);
  }

  SECTION("rank-1 channel matches the single-mode formula") {
    Rng rng(3);
    const Eigen::MatrixXcd u_r = dft_matrix({4, 0.5});
    const Eigen::MatrixXcd u_t = dft_matrix({6, 0.5});
    const Complex alpha{1.25, -0.5};
    const auto ch = AngularChannel::from_paths(4, 6, {{2, 3, alpha}});
    const auto q = to_physical(ch, u_r, u_t);
    const double snr = 5.0;
    const double expected = std::log2(1.0 + snr / 6.0 * std::norm(alpha));
    CHECK(outage_rate(q, true, snr) == Catch::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("measurement budgets per method") {
  auto cfg = small_scenario(Method::source_search);
  auto b = measurement_budget(cfg);
  CHECK(b.n_measurements == 3 * 2);
  CHECK(b.o_r == 4);  // hamming(3) max row weight
  CHECK(b.o_t == 2);  // hamming(2) max row weight

  cfg.overlap_stat = OverlapStat::mean;
  b = measurement_budget(cfg);
  CHECK(b.o_r == Catch::Approx(4.0));  // all hamming rows weigh 2^(r-1)
  CHECK(b.o_t == Catch::Approx(2.0));

  cfg.method = Method::cs_search;
  b = measurement_budget(cfg);
  CHECK(b.n_measurements == 6);
  CHECK(b.o_r == 1);
  CHECK(b.o_t == 1);

  cfg.method = Method::sweep_80211ad;
  b = measurement_budget(cfg);
  CHECK(b.n_measurements == 10);
}

TEST_CASE("energy accounting round trip") {
  LinkBudget link;
  const double snr = std::pow(10.0, 0.7);
  const double e = sweep_energy_mj(121, 8, 8, snr, link);
  CHECK(snr_for_energy(e, 121, 8, 8, link) == Catch::Approx(snr).epsilon(1e-12));
}

TEST_CASE("noise-free search on the golay scenario recovers exactly") {
  auto cfg = golay_23x23(Method::source_search);
  cfg.trials = 8;
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.n_measurements == 121);
  CHECK(r.normalized_mse < 1e-12);
  REQUIRE(r.p_detect.size() == 3);
  CHECK(r.p_detect[0] == 1.0);
  CHECK(r.p_detect[2] == 1.0);
  // at infinite SNR every path is found, so the two capacity sums agree
  // exactly (both are +inf unless all draws were zero channels)
  CHECK(r.outage_rate_bps_hz == r.perfect_csi_rate_bps_hz);
  CHECK(r.trials == 8);
}

TEST_CASE("detection probabilities are monotone in j") {
  auto cfg = golay_23x23(Method::source_search);
  cfg.snr_grid_db = {-5.0};
  cfg.trials = 100;
  cfg.adc_bits = AdcBits::of(4);
  const auto records = run_experiment(cfg);
  for (const auto& r : records) {
    REQUIRE(r.p_detect.size() == 3);
    CHECK(r.p_detect[0] >= r.p_detect[1]);
    CHECK(r.p_detect[1] >= r.p_detect[2]);
    CHECK(r.outage_rate_bps_hz <= r.perfect_csi_rate_bps_hz + 1e-12);
  }
}

TEST_CASE("energy parity across methods at an energy grid point") {
  auto source = small_scenario(Method::source_search);
  source.snr_grid_db.clear();
  source.energy_grid_mj = {0.05, 0.2};
  source.trials = 4;

  auto cs = small_scenario(Method::cs_search);
  cs.snr_grid_db.clear();
  cs.energy_grid_mj = {0.05, 0.2};
  cs.trials = 4;

  const auto a = run_experiment(source);
  const auto b = run_experiment(cs);
  REQUIRE(a.size() == 2);
  REQUIRE(b.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(a[i].energy_mj == Catch::Approx(b[i].energy_mj).epsilon(1e-9));
    // equal energy with fewer overlapped beams means cs spends more per beam
    CHECK(b[i].snr_db > a[i].snr_db);
  }
}

TEST_CASE("cs and sweep methods run through the harness") {
  auto cs = small_scenario(Method::cs_search);
  cs.trials = 16;
  const auto cs_records = run_experiment(cs);
  REQUIRE(cs_records.size() == 1);
  CHECK(cs_records[0].n_measurements == 6);
  CHECK(cs_records[0].p_detect.size() == 1);

  ScenarioConfig sweep;
  sweep.n_rx = 15;
  sweep.n_tx = 31;
  sweep.l_max = 1;
  sweep.method = Method::sweep_80211ad;
  sweep.trials = 16;
  sweep.seed = 3;
  sweep.snr_grid_db = {20.0};
  sweep.adc_bits = AdcBits::of(6);
  const auto sw_records = run_experiment(sweep);
  REQUIRE(sw_records.size() == 1);
  CHECK(sw_records[0].n_measurements == 46);

  SECTION("noise-free sweep always finds the single path") {
    sweep.snr_grid_db = {kInf};
    sweep.adc_bits = AdcBits::infinite();
    sweep.trials = 32;
    const auto clean = run_experiment(sweep);
    CHECK(clean[0].p_detect[0] == 1.0);
  }
}

TEST_CASE("dnn method trains, saves and decodes through the harness") {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "beamcode_dnn_models").string();
  std::filesystem::create_directories(dir);

  auto cfg = small_scenario(Method::source_dnn);
  cfg.model_dir = dir;
  cfg.snr_grid_db = {kInf};
  cfg.adc_bits = AdcBits::infinite();
  cfg.trials = 32;

  // train small decoders for both sides
  TrainConfig tc;
  tc.epochs = 150;
  tc.seed = 9;
  Rng rng(4);
  const auto rx_data =
      gen_training_data<float>(cfg.rx_code->build(), 1, 200, 1.0, NoiseSpec::none(), rng);
  const auto rx_model = train(rx_data, {3, 64, 64, 7}, tc);
  save_model(rx_model.model, dir + "/rx.mlp");
  const auto tx_data =
      gen_training_data<float>(cfg.tx_code->build(), 1, 200, 1.0, NoiseSpec::none(), rng);
  const auto tx_model = train(tx_data, {2, 32, 32, 3}, tc);
  save_model(tx_model.model, dir + "/tx.mlp");

  ModelManifest manifest;
  manifest.kind = "plain";
  manifest.entries.push_back({false, 0, AdcBits::infinite(), "rx.mlp", "tx.mlp"});
  manifest.save(dir);

  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 1);
  // a trained decoder is approximate: just require it beats the zero guess
  CHECK(records[0].normalized_mse < 0.9);
  CHECK(records[0].p_detect[0] > 0.5);

  SECTION("missing model directory fails cleanly") {
    cfg.model_dir = dir + "_missing";
    CHECK_THROWS(run_experiment(cfg));
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("manifest selection picks the nearest grid point") {
  ModelManifest m;
  m.kind = "sd";
  m.entries.push_back({true, -10.0, AdcBits::of(4), "a_rx", "a_tx"});
  m.entries.push_back({true, 0.0, AdcBits::of(4), "b_rx", "b_tx"});
  m.entries.push_back({true, 0.0, AdcBits::of(7), "c_rx", "c_tx"});
  CHECK(m.select(-8.0, AdcBits::of(4)).rx_file == "a_rx");
  CHECK(m.select(-1.0, AdcBits::of(5)).rx_file == "b_rx");
  CHECK(m.select(2.0, AdcBits::infinite()).rx_file == "c_rx");
}

TEST_CASE("determinism: same seed gives byte-identical outputs") {
  auto cfg = small_scenario(Method::source_search);
  cfg.trials = 50;
  cfg.adc_bits = AdcBits::of(5);
  cfg.snr_grid_db = {0.0, 10.0};
  cfg.threads = 4;  // exercise the worker pool

  const auto dir = std::filesystem::temp_directory_path();
  const std::string a = (dir / "beamcode_det_a.csv").string();
  const std::string b = (dir / "beamcode_det_b.csv").string();
  emit_results(run_experiment(cfg), a, "csv");
  emit_results(run_experiment(cfg), b, "csv");
  CHECK(slurp(a) == slurp(b));

  const std::string ja = (dir / "beamcode_det_a.json").string();
  emit_results(run_experiment(cfg), ja, "json");
  const std::string jb = (dir / "beamcode_det_b.json").string();
  emit_results(run_experiment(cfg), jb, "json");
  CHECK(slurp(ja) == slurp(jb));

  for (const auto& p : {a, b, ja, jb}) std::filesystem::remove(p);
}

TEST_CASE("csv and json emission") {
  SECTION("empty record list emits only the header") {
    std::ostringstream out;
    emit_csv({}, out);
    CHECK(out.str() == "method,energy_mj,snr_db,adc_bits,n_measurements,mse,outage,perfect_csi,trials\n");
  }

  SECTION("json round trip preserves every field") {
    auto cfg = small_scenario(Method::source_search);
    cfg.trials = 10;
    const auto records = run_experiment(cfg);
    for (const auto& r : records) {
      const auto back = metrics_record_from_json(to_json(r));
      CHECK(back.method == r.method);
      CHECK(back.energy_mj == r.energy_mj);
      CHECK(back.snr_db == r.snr_db);
      CHECK(back.adc_bits == r.adc_bits);
      CHECK(back.n_measurements == r.n_measurements);
      CHECK(back.normalized_mse == r.normalized_mse);
      CHECK(back.p_detect == r.p_detect);
      CHECK(back.outage_rate_bps_hz == r.outage_rate_bps_hz);
      CHECK(back.perfect_csi_rate_bps_hz == r.perfect_csi_rate_bps_hz);
      CHECK(back.trials == r.trials);
    }
  }
}

TEST_CASE("config parsing") {
  const std::string text = R"(
# scenario: small hamming setup
n_r = 7
n_t = 3
L = 1
rx_code = hamming:3
tx_code = hamming:2
method = source_search
snr_grid_db = -10, 0, 10
adc_bits = 6
trials = 25
seed = 42
alpha_max = 1.5
mu_db = -88
n0_dbm = -88
tau_s = 23e-6
support_law = uniform_over_supports
overlap_stat = mean
noise_family = uniform
threads = 2
)";
  std::istringstream in(text);
  const auto cfg = ScenarioConfig::parse(in);
  CHECK(cfg.n_rx == 7);
  CHECK(cfg.n_tx == 3);
  CHECK(cfg.l_max == 1);
  CHECK(cfg.rx_code->source == "hamming:3");
  CHECK(cfg.method == Method::source_search);
  CHECK(cfg.snr_grid_db == std::vector<double>{-10, 0, 10});
  CHECK(cfg.adc_bits == AdcBits::of(6));
  CHECK(cfg.trials == 25);
  CHECK(cfg.seed == 42);
  CHECK(cfg.alpha_max == 1.5);
  CHECK(cfg.support_law == SupportLaw::uniform_over_supports);
  CHECK(cfg.overlap_stat == OverlapStat::mean);
  CHECK(cfg.noise_family == NoiseFamily::uniform);
  CHECK(cfg.threads == 2);
  CHECK_NOTHROW(cfg.validate());

  SECTION("unknown keys are rejected") {
    std::istringstream bad("n_rx = 7\n");
    CHECK_THROWS_AS(ScenarioConfig::parse(bad), std::invalid_argument);
  }

  SECTION("validation catches inconsistent codes") {
    std::istringstream mismatched(
        "n_r = 8\nn_t = 3\nL = 1\nrx_code = hamming:3\ntx_code = hamming:2\n"
        "method = source_search\nsnr_grid_db = 0\n");
    const auto bad_cfg = ScenarioConfig::parse(mismatched);
    CHECK_THROWS_AS(bad_cfg.validate(), std::invalid_argument);
  }

  SECTION("both grids set is rejected") {
    std::istringstream both(
        "n_r = 7\nn_t = 3\nL = 1\nrx_code = hamming:3\ntx_code = hamming:2\n"
        "method = source_search\nsnr_grid_db = 0\nenergy_grid_mj = 1\n");
    CHECK_THROWS_AS(ScenarioConfig::parse(both).validate(), std::invalid_argument);
  }
}

TEST_CASE("shipped scenario configs load and report the expected budgets") {
  const std::string base = std::string(BEAMCODE_SOURCE_DIR) + "/configs";
  struct Expect {
    const char* file;
    int measurements;
    int exhaustive;
  };
  for (const auto& e : {Expect{"scenario_15x31.cfg", 20, 465}, Expect{"scenario_23x23.cfg", 121, 529},
                        Expect{"scenario_15x32.cfg", 176, 480}}) {
    const auto cfg = ScenarioConfig::load(base + "/" + std::string(e.file));
    CHECK_NOTHROW(cfg.validate());
    const auto b = measurement_budget(cfg);
    CHECK(b.n_measurements == e.measurements);
    CHECK(cfg.n_rx * cfg.n_tx == e.exhaustive);
  }
}

TEST_CASE("golden file regression for a seeded 10-trial run") {
  ScenarioConfig cfg;
  cfg.n_rx = 7;
  cfg.n_tx = 3;
  cfg.l_max = 1;
  cfg.rx_code = CodeSpec::hamming(3);
  cfg.tx_code = CodeSpec::hamming(2);
  cfg.method = Method::source_search;
  cfg.adc_bits = AdcBits::of(6);
  cfg.trials = 10;
  cfg.seed = 2024;
  cfg.alpha_max = 4.58257569495584;  // sqrt(21)
  cfg.snr_grid_db = {0.0, 10.0};
  cfg.threads = 1;

  std::ostringstream out;
  emit_csv(run_experiment(cfg), out);
  const std::string golden =
      slurp(std::string(BEAMCODE_SOURCE_DIR) + "/tests/golden/source_search_7x3.csv");
  CHECK(out.str() == golden);
}

TEST_CASE("median normalized mse falls as snr rises on the golay scenario") {
  // medians computed at the trial level, outside the record aggregation
  const BinaryMatrix code = golay_parity_check();
  const Eigen::MatrixXcd u = dft_matrix({23, 0.5});
  const auto combiners = build_combiners(code, u);
  const auto precoders = build_precoders(code, u);
  const SimoDecoder dec = SearchDecoder(code, 3);

  auto median_mse = [&](double snr_db) {
    std::vector<double> values;
    for (int trial = 0; trial < 500; ++trial) {
      Rng rng = trial_rng(77, trial);
      const auto ch = sample_channel(23, 23, 3, 1.0, rng);
      const auto q = to_physical(ch, u, u);
      const auto ms = acquire(q, combiners, precoders, snr_db, AdcBits::infinite(), 3.0, rng);
      if (ch.path_count() == 0) continue;
      const auto est = decode_mimo(ms, dec, dec);
      values.push_back(normalized_mse(ch, denoise_estimate(est.q_hat, 1.0)));
    }
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
  };

  const double low = median_mse(-10.0);
  const double mid = median_mse(0.0);
  const double high = median_mse(10.0);
  CHECK(low >= mid);
  CHECK(mid >= high);
}
