#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "volfilter/checks.hpp"
#include "volfilter/config.hpp"
#include "volfilter/csv_io.hpp"
#include "volfilter/errors.hpp"
#include "volfilter/exact_sum.hpp"
#include "volfilter/experiment.hpp"
#include "volfilter/parallel.hpp"
#include "volfilter/rng.hpp"

using namespace volfilter;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("volfilter_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse_experiment_config(R"(
# comment
[model]
kind = "LogOU"
rho = -0.3   # trailing comment
sigma_V = 0.25

[grid]
T = 2.0
n_steps = 400

[utility]
kind = "Power"
p = 0.3

[run]
n_paths = 500
seed = 99
theta_mode = "TimeVarying"
checks = ["riccati", "degenerate"]
output_dir = "out dir"
plots = true
)");
  CHECK(cfg.model.rho == -0.3);
  CHECK(cfg.model.sigma_V == 0.25);
  CHECK(cfg.model.lambda_V == canonical_params().lambda_V);
  CHECK(cfg.grid.T == 2.0);
  CHECK(cfg.grid.n_steps == 400);
  CHECK(cfg.utility.kind == UtilityKind::Power);
  CHECK(cfg.utility.p == 0.3);
  CHECK(cfg.n_paths == 500);
  CHECK(cfg.seed == 99);
  CHECK(cfg.theta_mode == ThetaMode::TimeVarying);
  CHECK(cfg.checks == std::vector<std::string>{"riccati", "degenerate"});
  CHECK(cfg.output_dir == "out dir");
  CHECK(cfg.plots);

  const ExperimentConfig back = parse_experiment_config(render_experiment_config(cfg));
  CHECK(render_experiment_config(back) == render_experiment_config(cfg));
  CHECK(back.model.sigma0 == cfg.model.sigma0);

  const ExperimentConfig defaults = parse_experiment_config("");
  CHECK(defaults.checks == known_checks());
  CHECK(render_experiment_config(parse_experiment_config(render_experiment_config(defaults))) ==
        render_experiment_config(defaults));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_experiment_config("[model]\nfoo = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[extra]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[run]\nchecks = [\"nope\"]\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[run]\nseed = \"abc\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[model\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[model]\nrho = 1.0\n"), ValidationError);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/volfilter.toml"), ConfigError);
  try {
    parse_experiment_config("[run]\n\nn_paths = = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("an empty check list runs nothing") {
  ExperimentConfig cfg = parse_experiment_config("[run]\nchecks = []\n");
  CHECK(cfg.checks.empty());
  const VerificationReport rep = run_checks(cfg);
  CHECK(rep.checks.empty());
  CHECK(rep.all_pass());
  CHECK_THROWS_AS(run_check("nope", cfg), ConfigError);
}

TEST_CASE("check result lines") {
  CheckResult r;
  r.name = "demo";
  r.pass = true;
  r.statistic = 0.5;
  r.tolerance = 1.0;
  r.add("n", 3.0);
  const std::string line = r.line();
  CHECK(line.rfind("[PASS] demo", 0) == 0);
  CHECK(line.find("<=") != std::string::npos);
  r.pass = false;
  CHECK(r.line().rfind("[FAIL]", 0) == 0);
}

TEST_CASE("shortest round-trip doubles") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0, true).find_first_of(".e") != std::string::npos);
}

TEST_CASE("CSV round trip") {
  const auto dir = scratch_dir("csv");
  const std::vector<double> wealth{1.0, 1.25, 0.8};
  std::ostringstream os;
  write_wealth_csv(os, wealth, UtilitySpec::log_utility());
  write_text_file((dir / "nested" / "w.csv").string(), os.str());
  const CsvTable t = read_csv((dir / "nested" / "w.csv").string());
  REQUIRE(t.rows.size() == 3);
  CHECK(t.header == std::vector<std::string>{"path_id", "R_T", "U"});
  CHECK(t.rows[1][t.column("R_T")] == 1.25);
  CHECK(t.rows[2][t.column("U")] == std::log(0.8));
  CHECK_THROWS_AS(t.column("missing"), DimensionError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exact summation is order independent") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> xs(10000);
  for (double& x : xs) x = u(gen) * std::pow(10.0, static_cast<int>(gen() % 12) - 6);
  const double forward = ExactSum::of(xs);
  std::shuffle(xs.begin(), xs.end(), gen);
  CHECK(ExactSum::of(xs) == forward);
  std::reverse(xs.begin(), xs.end());
  CHECK(ExactSum::of(xs) == forward);

  ExactSum s;
  s.add(1e9);
  s.add(1e-9);
  s.add(-1e9);
  CHECK(s.value() == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK_THROWS_AS(s.add(std::nan("")), RangeError);
}

TEST_CASE("parallel_for covers the range and propagates exceptions") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) hits[i] += 1;
  }, 7);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

  std::atomic<int> calls{0};
  parallel_for(0, [&](std::size_t, std::size_t) { ++calls; }, 4);
  CHECK(calls == 0);

  CHECK_THROWS_AS(parallel_for(100, [](std::size_t b, std::size_t) {
    if (b > 0) throw DomainError("worker failed");
  }, 4), DomainError);
  CHECK(worker_count() >= 1);
}

TEST_CASE("random streams are keyed") {
  NormalStream a(5, StreamTag::Test, 1, 2);
  NormalStream b(5, StreamTag::Test, 1, 2);
  NormalStream c(5, StreamTag::Test, 2, 1);
  const double xa = a.normal();
  CHECK(xa == b.normal());
  CHECK(xa != c.normal());
  CHECK(stream_key(5, StreamTag::Test, 1, 2) != stream_key(6, StreamTag::Test, 1, 2));
}

TEST_CASE("stage errors keep the module error nested") {
  ExperimentConfig cfg;
  cfg.model.kind = ModelKind::Heston;
  cfg.model.theta = 0.04;
  cfg.model.V0 = 0.04;
  cfg.model.sigma_V = 0.3;
  cfg.n_paths = 4;
  cfg.grid = TimeGrid::make(0.0, 1.0, 20);
  cfg.output_dir = scratch_dir("stage").string();
  try {
    run_filter_stage(cfg, 1);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "filter");
    bool nested_kind = false;
    try {
      std::rethrow_if_nested(e);
    } catch (const KindError&) {
      nested_kind = true;
    } catch (...) {
    }
    CHECK(nested_kind);
  }
  std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("simulate stage writes the exported paths") {
  ExperimentConfig cfg;
  cfg.n_paths = 8;
  cfg.export_paths = 3;
  cfg.grid = TimeGrid::make(0.0, 1.0, 10);
  cfg.output_dir = scratch_dir("simulate").string();
  const StageReport r = run_simulate_stage(cfg, 2);
  REQUIRE(r.files.size() == 1);
  const CsvTable t = read_csv(cfg.output_dir + "/paths.csv");
  CHECK(t.rows.size() == 3 * 11);
  CHECK(std::isnan(t.rows[10][t.column("dW1")]));
  std::filesystem::remove_all(cfg.output_dir);
}

TEST_CASE("degenerate limits match their closed forms") {
  ExperimentConfig cfg;
  cfg.grid = TimeGrid::make(0.0, 1.0, 200);
  cfg.n_paths = 50;
  const CheckResult r = check_degenerate(cfg);
  CHECK(r.pass);
  CHECK(r.statistic <= 1e-10);
}
