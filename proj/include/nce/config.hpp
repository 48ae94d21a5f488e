#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nce/expfam.hpp"
#include "nce/objective.hpp"
#include "nce/optim.hpp"

namespace nce {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Every violated invariant, one per line.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class BackendKind { Quadrature, MonteCarlo, ClosedForm, Batch };
std::string to_string(BackendKind b);

struct ExperimentConfig {
  std::string name = "experiment";

  // [family]
  FamilyKind family = FamilyKind::GaussianMean1D;
  int dim = 1;
  double theta_star = 16.0;  // 1-d mean family
  double theta_q = 0.0;
  std::vector<double> mean_star;  // diag_gaussian; one entry broadcasts
  std::vector<double> mean_q;
  std::vector<double> var_q;
  std::vector<double> var_star;  // explicit data variances, or drawn from the range below
  double var_star_low = 6.0;
  double var_star_high = 12.0;
  std::vector<double> radii;  // verify/landscape; defaults to |theta_star - theta_q|
  bool allow_equal = false;

  // [objective]
  std::vector<LossKind> losses{LossKind::NCE, LossKind::ENCE};
  BackendKind backend = BackendKind::Quadrature;
  std::size_t mc_samples = 100'000;
  std::size_t batch_size = 512;
  std::optional<double> grad_norm_cap;
  bool log_ratio_cap_auto = true;
  std::optional<double> log_ratio_cap;

  // [optimizer]
  std::vector<Algorithm> algos{Algorithm::GD, Algorithm::NGD};
  std::optional<double> eta_gd;  // empty = auto
  std::optional<double> eta_ngd;
  std::optional<double> eta_newton;
  std::optional<double> delta;  // NGD auto target; empty = 0.05 |tau0 - tau*|
  std::size_t budget = 100;
  double grad_tol = 1e-14;

  // [run]
  std::size_t runs = 5;
  std::uint64_t seed = 1;
  std::size_t annulus_points = 50;
  std::size_t neighborhood_samples = 64;
  bool ngd_certificate = true;
  double bound_scale = 1.0;

  // [output]
  std::string output_dir = "results";
  std::string prefix;  // defaults to name
  bool plot = true;

  ClipPolicy clip_for(LossKind kind) const;
  std::string file_prefix() const { return prefix.empty() ? name : prefix; }
};

// INI text: [section] headers, key = value lines, '#' or ';' comments.
ExperimentConfig parse_config_text(const std::string& text, const std::string& name = "experiment");
// A path, or the name of a shipped preset when no such file exists.
ExperimentConfig parse_config(const std::string& path_or_preset);
void validate(const ExperimentConfig& config);

// Data and noise parameters built from the [family] section.
TauParam config_tau_star(const ExperimentConfig& config);
TauParam config_tau_q(const ExperimentConfig& config);
Family config_family(const ExperimentConfig& config);

struct Preset {
  std::string name;
  std::string description;
  std::string text;
};

const std::vector<Preset>& presets();
const Preset* find_preset(const std::string& name);

}  // namespace nce
