#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "nce/experiment.hpp"

using namespace nce;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(const std::string& backend, std::size_t budget, std::uint64_t seed = 1) {
  std::ostringstream s;
  s << "[family]\ntheta_star = 3\n[objective]\nbackend = " << backend
    << "\nbatch_size = 64\n[optimizer]\nalgos = gd, ngd\neta_gd = 0.5\neta_ngd = 0.1\nbudget = " << budget
    << "\ngrad_tol = 0\n[run]\nruns = 2\nseed = " << seed << "\n";
  return parse_config_text(s.str(), "small");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("row count formula") {
  const ResultTable t = run_experiment(small("quadrature", 1));
  CHECK(t.rows.size() == 2 * 2 * 2 * 2);
  const ResultTable u = run_experiment(small("batch", 7));
  CHECK(u.rows.size() == 2 * 2 * 2 * 8);
  for (std::size_t i = 1; i < u.rows.size(); ++i) {
    const ResultRow& a = u.rows[i - 1];
    const ResultRow& b = u.rows[i];
    const auto key = [](const ResultRow& r) {
      return std::tuple{loss_kind_from_string(r.loss), algorithm_from_string(r.algo), r.run, r.step};
    };
    CHECK(key(a) < key(b));
  }
}

TEST_CASE("first row starts at the noise distribution") {
  ExperimentConfig c = parse_config("gauss1d_r16");
  c.budget = 1;
  c.runs = 1;
  c.algos = {Algorithm::NGD};
  c.losses = {LossKind::NCE};
  const ResultTable t = run_experiment(c);
  REQUIRE(!t.rows.empty());
  CHECK(t.rows[0].step == 0);
  CHECK(t.rows[0].dist == doctest::Approx(std::hypot(16.0, 128.0)).epsilon(1e-12));
}

TEST_CASE("csv round trip") {
  const ResultTable t = run_experiment(small("batch", 5));
  write_csv(t, "test_experiment_rt.csv");
  const ResultTable back = read_csv("test_experiment_rt.csv");
  CHECK(back.rows == t.rows);
  ResultTable empty;
  write_csv(empty, "test_experiment_empty.csv");
  CHECK(slurp("test_experiment_empty.csv") == "loss,algo,run,step,loss_value,grad_norm,dist,min_dist,status\n");
  CHECK(read_csv("test_experiment_empty.csv").rows.empty());
  CHECK_THROWS(write_csv(t, "/nonexistent_dir/x.csv"));
  fs::remove("test_experiment_rt.csv");
  fs::remove("test_experiment_empty.csv");
}

TEST_CASE("plot data") {
  ExperimentConfig c = small("quadrature", 20);
  const ResultTable t = run_experiment(c);
  const auto files = emit_plot_data(t, "test_plot");
  CHECK(files.size() == 8);
  // quadrature cells are identical across runs: zero spread
  std::ifstream in("test_plot_nce_ngd.dat");
  REQUIRE(in);
  std::string line;
  double prev = 1e300;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    double step, mean, sd, best;
    row >> step >> mean >> sd >> best;
    CHECK(sd == 0.0);
    CHECK(mean <= prev);
    prev = mean;
    ++n;
  }
  CHECK(n == 21);
  for (const auto& f : files) fs::remove(f);
  CHECK_THROWS(emit_plot_data(ResultTable{}, "test_plot"));
}

TEST_CASE("seed isolation") {
  const ResultTable q1 = run_experiment(small("quadrature", 5, 1));
  const ResultTable q2 = run_experiment(small("quadrature", 5, 99));
  CHECK(q1.rows == q2.rows);
  const ResultTable b1 = run_experiment(small("batch", 5, 1));
  const ResultTable b2 = run_experiment(small("batch", 5, 99));
  const ResultTable b3 = run_experiment(small("batch", 5, 1));
  CHECK(b1.rows != b2.rows);
  CHECK(b1.rows == b3.rows);
}

TEST_CASE("cell errors are recorded, not thrown") {
  ExperimentConfig c = small("quadrature", 3);
  c.algos = {Algorithm::GD};
  c.eta_gd = 1e200;
  c.losses = {LossKind::ENCE};
  const ResultTable t = run_experiment(c);
  REQUIRE(!t.rows.empty());
  bool flagged = false;
  for (const ResultRow& r : t.rows) flagged |= r.status != "ok";
  CHECK(flagged);
  for (const ResultRow& r : t.rows) CHECK(r.status.find(',') == std::string::npos);
}

TEST_CASE("commands write their files") {
  const fs::path dir = fs::temp_directory_path() / "nce_test_experiment_out";
  fs::remove_all(dir);
  ExperimentConfig c = small("quadrature", 3);
  c.output_dir = dir.string();
  std::ostringstream log;
  CHECK(run_command(c, log) == 0);
  CHECK(fs::exists(dir / "small.csv"));
  CHECK(fs::exists(dir / "small_summary.txt"));
  CHECK(fs::exists(dir / "small_nce_gd.dat"));
  CHECK(landscape_command(c, log) == 0);
  CHECK(fs::exists(dir / "small_landscape_nce.dat"));

  ExperimentConfig z = parse_config_text("[family]\ntheta_star = 0\nallow_equal = true\nradii = 0\n[run]\nngd_certificate = false\n", "zero");
  z.output_dir = dir.string();
  CHECK(verify_command(z, log) == 0);
  CHECK(slurp((dir / "zero_verify.txt").string()).find("SKIP") != std::string::npos);
  fs::remove_all(dir);
}
