#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nce/objective.hpp"

namespace nce {

enum class Algorithm { GD, NGD, Newton };

std::string to_string(Algorithm algo);
Algorithm algorithm_from_string(const std::string& name);

struct AlgoConfig {
  Algorithm algo = Algorithm::GD;
  double eta = 0.0;
  std::size_t max_steps = 100;
  std::optional<double> target_delta;  // diagnostics unless stop_at_target
  bool stop_at_target = false;
  double grad_tol = 1e-14;
  // Keep every k-th record (plus the last). min_dist still covers every step.
  std::size_t record_stride = 1;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NGD asked to normalize a zero gradient: the iterate is already optimal.
class ZeroGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularHessian : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The update to subtract from tau.
//   GD: eta g   NGD: eta g/|g|   Newton: eta H^{-1} g (LDLT solve)
// Newton rejects H whose smallest eigenvalue is below 1e-14 times the largest.
Vector step(const AlgoConfig& config, const Vector& grad, const std::optional<Matrix>& hess = std::nullopt);

struct StepConstants {
  std::optional<double> sigma_max_global;
  std::optional<double> sigma_min_global;
  std::optional<double> kappa_star;
  std::optional<double> beta_u;
  std::optional<double> beta_l;
  std::optional<double> delta;
};

// GD: 1/sigma_max   Newton: sigma_min/sigma_max   NGD: sqrt(beta_l/(beta_u kappa)) delta
double default_step_size(Algorithm algo, const StepConstants& constants);

struct Evaluation {
  double loss = 0.0;
  Vector grad;
  std::optional<Matrix> hess;
};

// Maps a stacked tau to loss/gradient (and Hessian on request).
using Oracle = std::function<Evaluation(const Vector& tau, bool want_hessian)>;

Oracle population_oracle(const Objective& objective);
// Every call draws a fresh batch of `batch_size` per side from (seed, call index).
Oracle batch_oracle(const Objective& objective, std::size_t batch_size, std::uint64_t seed, ClipPolicy clip);

struct TraceRecord {
  std::size_t step = 0;
  Vector tau;
  double loss = 0.0;
  double grad_norm = 0.0;
  double dist = 0.0;
  double min_dist = 0.0;
};

struct Trace {
  std::vector<TraceRecord> records;
  double min_dist = 0.0;
  bool reached_target = false;
  std::optional<std::size_t> first_hit_step;
  std::size_t steps_taken = 0;
  std::string stop_reason;  // "budget", "gradient", or the error text
};

class RunError : public std::runtime_error {
 public:
  RunError(const std::string& what, Trace partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const Trace& partial_trace() const { return partial_; }

 private:
  Trace partial_;
};

class DivergenceError : public RunError {
 public:
  using RunError::RunError;
};

Trace run(const Oracle& oracle, const AlgoConfig& config, const Vector& tau0, const Vector& tau_star);
// Population oracle of `objective`, distances measured to its tau_star.
Trace run(const Objective& objective, const AlgoConfig& config, const TauParam& tau0);

}  // namespace nce
