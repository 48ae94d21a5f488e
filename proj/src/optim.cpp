#include "nce/optim.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "nce/rng.hpp"

namespace nce {

std::string to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::GD: return "gd";
    case Algorithm::NGD: return "ngd";
    case Algorithm::Newton: return "newton";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "gd") return Algorithm::GD;
  if (name == "ngd") return Algorithm::NGD;
  if (name == "newton") return Algorithm::Newton;
  throw ConfigError("unknown algorithm '" + name + "' (expected gd, ngd or newton)");
}

Vector step(const AlgoConfig& config, const Vector& grad, const std::optional<Matrix>& hess) {
  switch (config.algo) {
    case Algorithm::GD:
      return config.eta * grad;
    case Algorithm::NGD: {
      const double n = grad.norm();
      if (n == 0.0) throw ZeroGradient("ngd: zero gradient");
      return (config.eta / n) * grad;
    }
    case Algorithm::Newton: {
      if (!hess) throw ConfigError("newton: Hessian required");
      const EigenResult e = sym_eigen(*hess);
      if (!(e.min() >= 1e-14 * e.max()) || !(e.max() > 0.0)) {
        throw SingularHessian("newton: Hessian is singular to working precision");
      }
      const Eigen::LDLT<Matrix> ldlt(0.5 * (*hess + hess->transpose()));
      return ldlt.solve(config.eta * grad);
    }
  }
  throw ConfigError("step: unknown algorithm");
}

namespace {

double need(const std::optional<double>& v, const char* name) {
  if (!v) throw ConfigError(std::string("default_step_size: missing constant ") + name);
  if (!(*v > 0.0) || !std::isfinite(*v)) {
    throw ConfigError(std::string("default_step_size: constant ") + name + " must be positive");
  }
  return *v;
}

}  // namespace

double default_step_size(Algorithm algo, const StepConstants& c) {
  switch (algo) {
    case Algorithm::GD:
      return 1.0 / need(c.sigma_max_global, "sigma_max_global");
    case Algorithm::Newton:
      return need(c.sigma_min_global, "sigma_min_global") / need(c.sigma_max_global, "sigma_max_global");
    case Algorithm::NGD:
      return std::sqrt(need(c.beta_l, "beta_l") / (need(c.beta_u, "beta_u") * need(c.kappa_star, "kappa_star"))) *
             need(c.delta, "delta");
  }
  throw ConfigError("default_step_size: unknown algorithm");
}

Oracle population_oracle(const Objective& objective) {
  auto obj = std::make_shared<const Objective>(objective);
  return [obj](const Vector& tau, bool want_hessian) {
    const TauParam t = TauParam::from_stacked(tau);
    Evaluation e;
    e.loss = population_loss(*obj, t);
    e.grad = population_gradient(*obj, t);
    if (want_hessian) e.hess = population_hessian(*obj, t);
    return e;
  };
}

Oracle batch_oracle(const Objective& objective, std::size_t batch_size, std::uint64_t seed, ClipPolicy clip) {
  if (batch_size == 0) throw ConfigError("batch_oracle: batch size must be positive");
  auto obj = std::make_shared<const Objective>(objective);
  auto calls = std::make_shared<std::uint64_t>(0);
  return [obj, calls, batch_size, seed, clip](const Vector& tau, bool want_hessian) {
    const TauParam t = TauParam::from_stacked(tau);
    const Batch batch = draw_batch(*obj, batch_size, mix_seed({seed, (*calls)++}));
    Evaluation e;
    e.loss = empirical_loss(*obj, t, batch, clip);
    e.grad = empirical_gradient(*obj, t, batch, clip);
    if (want_hessian) e.hess = empirical_hessian(*obj, t, batch);
    return e;
  };
}

Trace run(const Oracle& oracle, const AlgoConfig& config, const Vector& tau0, const Vector& tau_star) {
  if (!(config.eta > 0.0) || !std::isfinite(config.eta)) throw ConfigError("run: eta must be positive");
  if (config.max_steps < 1) throw ConfigError("run: max_steps must be at least 1");
  if (config.record_stride < 1) throw ConfigError("run: record_stride must be at least 1");
  if (!tau0.allFinite()) throw ConfigError("run: initial point is not finite");
  if (tau0.size() != tau_star.size()) throw ConfigError("run: initial point has the wrong dimension");

  Trace trace;
  trace.min_dist = std::numeric_limits<double>::infinity();
  Vector tau = tau0;
  const bool want_hessian = config.algo == Algorithm::Newton;

  for (std::size_t t = 0;; ++t) {
    trace.steps_taken = t;
    Evaluation e;
    try {
      e = oracle(tau, want_hessian);
    } catch (const std::exception& ex) {
      trace.stop_reason = ex.what();
      throw RunError(std::string("evaluation failed at step ") + std::to_string(t) + ": " + ex.what(), trace);
    }
    const double dist = (tau - tau_star).norm();
    trace.min_dist = std::min(trace.min_dist, dist);
    if (config.target_delta && dist <= *config.target_delta && !trace.first_hit_step) {
      trace.first_hit_step = t;
      trace.reached_target = true;
    }
    const double gn = e.grad.norm();
    const bool finite = std::isfinite(e.loss) && e.grad.allFinite() && (!e.hess || e.hess->allFinite());
    const bool converged = finite && gn < config.grad_tol;
    const bool hit = config.stop_at_target && trace.reached_target;
    const bool last = t == config.max_steps || converged || !finite || hit;
    if (t % config.record_stride == 0 || last) {
      trace.records.push_back({t, tau, e.loss, gn, dist, trace.min_dist});
    }
    if (!finite) {
      trace.stop_reason = "non-finite loss or gradient";
      throw DivergenceError("diverged at step " + std::to_string(t), trace);
    }
    if (converged) {
      trace.stop_reason = "gradient";
      break;
    }
    if (hit) {
      trace.stop_reason = "target";
      break;
    }
    if (t == config.max_steps) {
      trace.stop_reason = "budget";
      break;
    }
    Vector delta;
    try {
      delta = step(config, e.grad, e.hess);
    } catch (const SingularHessian& ex) {
      trace.stop_reason = ex.what();
      throw RunError(std::string(ex.what()) + " at step " + std::to_string(t), trace);
    }
    tau -= delta;
    if (!tau.allFinite()) {
      trace.stop_reason = "non-finite iterate";
      throw DivergenceError("iterate became non-finite after step " + std::to_string(t), trace);
    }
  }
  return trace;
}

Trace run(const Objective& objective, const AlgoConfig& config, const TauParam& tau0) {
  return run(population_oracle(objective), config, tau0.stacked(), objective.tau_star().stacked());
}

}  // namespace nce
