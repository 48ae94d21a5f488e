#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "nce/expfam.hpp"
#include "nce/numerics.hpp"

namespace nce {

enum class LossKind { NCE, ENCE };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

// Population integrals by adaptive quadrature (one-dimensional sample spaces).
// The integration domain is rebuilt per evaluation: it covers every Gaussian
// component of the integrand plus `margin` standard deviations, cut into
// panels of one standard deviation. Bounds inside `spec` are ignored.
struct QuadratureBackend {
  QuadratureSpec spec{};
  double margin = 12.0;
};

// Population estimates from n fresh draws of each distribution per evaluation.
struct MonteCarloBackend {
  std::size_t n = 100'000;
  std::uint64_t seed = 1;
};

// Exact Gaussian integrals. Only the eNCE loss reduces to partition-function
// ratios, so this backend is rejected for NCE.
struct ClosedFormBackend {};

using Backend = std::variant<QuadratureBackend, MonteCarloBackend, ClosedFormBackend>;

// n draws from P* (data) and n from Q (noise), one draw per row.
struct Batch {
  Matrix data;
  Matrix noise;
};

struct ClipPolicy {
  std::optional<double> grad_norm_cap;
  std::optional<double> log_ratio_cap;

  static ClipPolicy none() { return {}; }
  // eNCE gets a log-ratio cap of 80 so that exp(+/- psi/2) stays below e^40.
  static ClipPolicy defaults_for(LossKind kind);
};

template <class T>
struct Estimate {
  T value;
  T std_error;
};

// An NCE or eNCE problem: data P* = tau_star, noise Q = tau_q, both normalized
// members of `family`.
class Objective {
 public:
  Objective(LossKind kind, Family family, TauParam tau_star, TauParam tau_q, Backend backend);
  Objective(const Objective& other);
  Objective& operator=(const Objective& other);
  Objective(Objective&&) noexcept = default;
  Objective& operator=(Objective&&) noexcept = default;
  ~Objective() = default;

  // Unit-variance Gaussian mean task with P* = N(theta_star, 1), Q = N(theta_q, 1).
  static Objective gaussian_1d(LossKind kind, double theta_star, double theta_q,
                               Backend backend = QuadratureBackend{});

  LossKind kind() const { return kind_; }
  const Family& family() const { return family_; }
  const TauParam& tau_star() const { return tau_star_; }
  const TauParam& tau_q() const { return tau_q_; }
  const Backend& backend() const { return backend_; }
  // Distance between the natural parameters of P* and Q.
  double separation() const { return (tau_star_.theta - tau_q_.theta).norm(); }

  Objective with_kind(LossKind kind) const;
  Objective with_backend(Backend backend) const;

  // Monte Carlo evaluation counter; each population evaluation takes the next value.
  std::uint64_t next_evaluation() const;
  void reset_evaluations(std::uint64_t value = 0) const;

 private:
  LossKind kind_;
  Family family_;
  TauParam tau_star_;
  TauParam tau_q_;
  Backend backend_;
  std::unique_ptr<std::atomic<std::uint64_t>> counter_;
};

// log p_tau(x) - log q(x) = (tau - tau_q)^T T(x); densities are never formed.
double log_ratio(const Objective& objective, const TauParam& tau, const Vector& x);

double population_loss(const Objective& objective, const TauParam& tau);
Vector population_gradient(const Objective& objective, const TauParam& tau);
Matrix population_hessian(const Objective& objective, const TauParam& tau);

// Monte Carlo population estimates with standard errors (any backend's
// family; always samples, using the objective's MonteCarloBackend settings or
// the supplied ones).
Estimate<double> mc_population_loss(const Objective& objective, const TauParam& tau,
                                    const MonteCarloBackend& mc);
Estimate<Vector> mc_population_gradient(const Objective& objective, const TauParam& tau,
                                        const MonteCarloBackend& mc);
Matrix mc_population_hessian(const Objective& objective, const TauParam& tau,
                             const MonteCarloBackend& mc);

Batch draw_batch(const Objective& objective, std::size_t n, std::uint64_t seed);

double empirical_loss(const Objective& objective, const TauParam& tau, const Batch& batch,
                      const ClipPolicy& clip = {});
// Sample mean with its standard error (no clipping).
Estimate<double> empirical_loss_estimate(const Objective& objective, const TauParam& tau,
                                         const Batch& batch);
Vector empirical_gradient(const Objective& objective, const TauParam& tau, const Batch& batch,
                          const ClipPolicy& clip = {});
Estimate<Vector> empirical_gradient_estimate(const Objective& objective, const TauParam& tau,
                                             const Batch& batch);
Matrix empirical_hessian(const Objective& objective, const TauParam& tau, const Batch& batch);

}  // namespace nce
