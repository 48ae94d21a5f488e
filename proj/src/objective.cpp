#include "nce/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "nce/rng.hpp"

namespace nce {

std::string to_string(LossKind kind) { return kind == LossKind::NCE ? "nce" : "ence"; }

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "nce") return LossKind::NCE;
  if (name == "ence") return LossKind::ENCE;
  throw DomainError("unknown loss kind '" + name + "' (expected nce or ence)");
}

ClipPolicy ClipPolicy::defaults_for(LossKind kind) {
  ClipPolicy p;
  if (kind == LossKind::ENCE) p.log_ratio_cap = 80.0;
  return p;
}

Objective::Objective(LossKind kind, Family family, TauParam tau_star, TauParam tau_q, Backend backend)
    : kind_(kind),
      family_(family),
      tau_star_(std::move(tau_star)),
      tau_q_(std::move(tau_q)),
      backend_(std::move(backend)),
      counter_(std::make_unique<std::atomic<std::uint64_t>>(0)) {
  for (const TauParam* t : {&tau_star_, &tau_q_}) {
    if (!family_.is_valid_natural(t->theta)) throw DomainError("Objective: parameter outside the family");
    const double log_z = family_.log_partition(t->theta);
    if (std::abs(t->alpha - log_z) > 1e-9 * std::max(1.0, std::abs(log_z))) {
      throw DomainError("Objective: data and noise parameters must be normalized (alpha = log Z(theta))");
    }
  }
  if (std::holds_alternative<QuadratureBackend>(backend_) && family_.dim() != 1) {
    throw DomainError("Objective: quadrature backend requires a one-dimensional sample space");
  }
  if (std::holds_alternative<ClosedFormBackend>(backend_) && kind_ != LossKind::ENCE) {
    throw DomainError("Objective: closed-form backend is only available for the eNCE loss");
  }
  if (const auto* mc = std::get_if<MonteCarloBackend>(&backend_); mc != nullptr && mc->n == 0) {
    throw DomainError("Objective: Monte Carlo backend needs at least one sample");
  }
}

Objective::Objective(const Objective& other)
    : kind_(other.kind_),
      family_(other.family_),
      tau_star_(other.tau_star_),
      tau_q_(other.tau_q_),
      backend_(other.backend_),
      counter_(std::make_unique<std::atomic<std::uint64_t>>(other.counter_ ? other.counter_->load() : 0)) {}

Objective& Objective::operator=(const Objective& other) {
  if (this != &other) {
    Objective copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Objective Objective::gaussian_1d(LossKind kind, double theta_star, double theta_q, Backend backend) {
  const Family family = Family::gaussian_mean_1d();
  return Objective(kind, family, tau_of_theta(family, Vector::Constant(1, theta_star)),
                   tau_of_theta(family, Vector::Constant(1, theta_q)), std::move(backend));
}

Objective Objective::with_kind(LossKind kind) const {
  return Objective(kind, family_, tau_star_, tau_q_, backend_);
}

Objective Objective::with_backend(Backend backend) const {
  return Objective(kind_, family_, tau_star_, tau_q_, std::move(backend));
}

std::uint64_t Objective::next_evaluation() const { return counter_->fetch_add(1); }

void Objective::reset_evaluations(std::uint64_t value) const { counter_->store(value); }

double log_ratio(const Objective& objective, const TauParam& tau, const Vector& x) {
  const Vector t = objective.family().suff_stats(x);
  return (tau.stacked() - objective.tau_q().stacked()).dot(t);
}

namespace {

void check_tau(const Objective& objective, const TauParam& tau) {
  if (tau.theta.size() != objective.family().natural_dim()) {
    throw DomainError("objective: parameter dimension does not match the family");
  }
}

// ---------------------------------------------------------------------------
// Quadrature backend (one-dimensional sample spaces)

constexpr int kMaxStats = 3;

// Pointwise quantities of a 1-d integrand at x.
struct Point {
  std::array<double, kMaxStats> t{};
  double log_star = 0.0;  // log p*(x)
  double log_q = 0.0;     // log q(x)
  double psi = 0.0;       // log p_tau(x) - log q(x)
};

class Integrand1D {
 public:
  Integrand1D(const Objective& objective, const TauParam& tau)
      : mean_family_(objective.family().kind() == FamilyKind::GaussianMean1D),
        m_(objective.family().suff_stat_dim()),
        star_(objective.tau_star().stacked()),
        q_(objective.tau_q().stacked()),
        diff_(tau.stacked() - q_) {}

  int stats() const { return m_; }

  Point at(double x) const {
    Point p;
    double log_h = 0.0;
    if (mean_family_) {
      p.t = {x, -1.0, 0.0};
      log_h = -0.5 * x * x;
    } else {
      p.t = {-0.5 * x * x, x, -1.0};
    }
    double s = 0.0, q = 0.0, d = 0.0;
    for (int k = 0; k < m_; ++k) {
      s += star_(k) * p.t[k];
      q += q_(k) * p.t[k];
      d += diff_(k) * p.t[k];
    }
    p.log_star = log_h + s;
    p.log_q = log_h + q;
    p.psi = d;
    return p;
  }

 private:
  bool mean_family_;
  int m_;
  Vector star_;
  Vector q_;
  Vector diff_;
};

QuadratureSpec domain_for(const Objective& objective, const TauParam& tau, const QuadratureBackend& qb) {
  const Family& fam = objective.family();
  const Vector& ts = objective.tau_star().theta;
  const Vector& tq = objective.tau_q().theta;
  const Vector& th = tau.theta;
  const std::array<Vector, 5> components = {ts, tq, th, Vector(ts - 0.5 * (th - tq)), Vector(0.5 * (th + tq))};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double min_sd = std::numeric_limits<double>::infinity();
  for (const Vector& c : components) {
    const auto cs = fam.center_scale(c);
    if (!cs) continue;
    lo = std::min(lo, cs->mean - qb.margin * cs->sd);
    hi = std::max(hi, cs->mean + qb.margin * cs->sd);
    min_sd = std::min(min_sd, cs->sd);
  }
  QuadratureSpec spec = qb.spec;
  spec.lower = lo;
  spec.upper = hi;
  const double panels = std::ceil((hi - lo) / min_sd);
  spec.initial_panels = static_cast<std::size_t>(std::clamp(panels, 1.0, 4096.0));
  return spec;
}

double quadrature_loss(const Objective& obj, const TauParam& tau, const QuadratureBackend& qb) {
  const Integrand1D in(obj, tau);
  const QuadratureSpec spec = domain_for(obj, tau, qb);
  if (obj.kind() == LossKind::NCE) {
    return integrate(
        [&](double x) {
          const Point p = in.at(x);
          return 0.5 * std::exp(p.log_star + log_softplus(-p.psi)) + 0.5 * std::exp(p.log_q + log_softplus(p.psi));
        },
        spec);
  }
  return integrate(
      [&](double x) {
        const Point p = in.at(x);
        return 0.5 * std::exp(p.log_star - 0.5 * p.psi) + 0.5 * std::exp(p.log_q + 0.5 * p.psi);
      },
      spec);
}

Vector quadrature_gradient(const Objective& obj, const TauParam& tau, const QuadratureBackend& qb) {
  const Integrand1D in(obj, tau);
  const QuadratureSpec spec = domain_for(obj, tau, qb);
  const bool nce = obj.kind() == LossKind::NCE;
  Vector g(in.stats());
  for (int k = 0; k < in.stats(); ++k) {
    g(k) = integrate(
        [&](double x) {
          const Point p = in.at(x);
          // NCE: (1/2)(q sigma(psi) - p* sigma(-psi)) T; eNCE: (1/4)(q e^{psi/2} - p* e^{-psi/2}) T.
          const double w = nce ? 0.5 * exp_difference(p.log_q + log_sigmoid(p.psi), p.log_star + log_sigmoid(-p.psi))
                               : 0.25 * exp_difference(p.log_q + 0.5 * p.psi, p.log_star - 0.5 * p.psi);
          return w * p.t[static_cast<std::size_t>(k)];
        },
        spec);
  }
  return g;
}

Matrix quadrature_hessian(const Objective& obj, const TauParam& tau, const QuadratureBackend& qb) {
  const Integrand1D in(obj, tau);
  const QuadratureSpec spec = domain_for(obj, tau, qb);
  const bool nce = obj.kind() == LossKind::NCE;
  const int m = in.stats();
  Matrix h(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      h(i, j) = integrate(
          [&](double x) {
            const Point p = in.at(x);
            double w;
            if (nce) {
              const double curv = log_sigmoid(p.psi) + log_sigmoid(-p.psi);
              w = 0.5 * (std::exp(p.log_star + curv) + std::exp(p.log_q + curv));
            } else {
              w = 0.125 * (std::exp(p.log_star - 0.5 * p.psi) + std::exp(p.log_q + 0.5 * p.psi));
            }
            return w * p.t[static_cast<std::size_t>(i)] * p.t[static_cast<std::size_t>(j)];
          },
          spec);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Closed form (eNCE on Gaussian families)

struct ShiftedMember {
  double log_mass;  // log of the integral of h exp(tau'^T T)
  Vector theta;
};

// Both eNCE integrands are h exp(tau'^T T) for tau'_a = tau* - (tau - tau_q)/2
// and tau'_b = (tau + tau_q)/2.
std::array<ShiftedMember, 2> shifted_members(const Objective& obj, const TauParam& tau) {
  const Vector diff = tau.stacked() - obj.tau_q().stacked();
  const Vector a = obj.tau_star().stacked() - 0.5 * diff;
  const Vector b = obj.tau_q().stacked() + 0.5 * diff;
  std::array<ShiftedMember, 2> out;
  const std::array<const Vector*, 2> members = {&a, &b};
  for (std::size_t i = 0; i < 2; ++i) {
    const TauParam t = TauParam::from_stacked(*members[i]);
    if (!obj.family().is_valid_natural(t.theta)) {
      throw DomainError("closed-form eNCE: integral diverges at this parameter");
    }
    out[i] = {obj.family().log_partition(t.theta) - t.alpha, t.theta};
  }
  return out;
}

double closed_form_loss(const Objective& obj, const TauParam& tau) {
  const auto m = shifted_members(obj, tau);
  return 0.5 * std::exp(m[0].log_mass) + 0.5 * std::exp(m[1].log_mass);
}

Vector closed_form_gradient(const Objective& obj, const TauParam& tau) {
  const auto m = shifted_members(obj, tau);
  const Family& fam = obj.family();
  return 0.25 * (std::exp(m[1].log_mass) * fam.mean_suff_stats(m[1].theta) -
                 std::exp(m[0].log_mass) * fam.mean_suff_stats(m[0].theta));
}

Matrix closed_form_hessian(const Objective& obj, const TauParam& tau) {
  const auto m = shifted_members(obj, tau);
  const Family& fam = obj.family();
  return 0.125 * (std::exp(m[0].log_mass) * fam.second_moment(m[0].theta) +
                  std::exp(m[1].log_mass) * fam.second_moment(m[1].theta));
}

// ---------------------------------------------------------------------------
// Sample-based machinery shared by the empirical and Monte Carlo paths

std::uint64_t digest(const Vector& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits;
    const double x = v(i) == 0.0 ? 0.0 : v(i);  // fold -0.0 into +0.0
    std::memcpy(&bits, &x, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// Mean with the largest entry factored out, so large per-sample values do not
// overflow the running sum.
double shifted_mean(const Eigen::ArrayXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + (v - m).mean();
}

double sample_variance(const Eigen::ArrayXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return (v - mean).square().sum() / static_cast<double>(v.size() - 1);
}

struct SideTerms {
  Matrix stats;         // T(x_i) rows
  Eigen::ArrayXd psi;   // log ratios (clamped when a cap is set)
};

SideTerms side_terms(const Objective& obj, const TauParam& tau, const Matrix& samples,
                     const std::optional<double>& cap) {
  SideTerms s;
  s.stats = obj.family().suff_stats_rows(samples);
  const Vector diff = tau.stacked() - obj.tau_q().stacked();
  s.psi = (s.stats * diff).array();
  if (cap) s.psi = s.psi.max(-*cap).min(*cap);
  return s;
}

void check_batch(const Batch& batch) {
  if (batch.data.rows() == 0 || batch.noise.rows() == 0) throw DomainError("empirical objective: empty batch");
}

// Per-sample losses l(x, +1) on data and l(x, -1) on noise.
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> per_sample_losses(LossKind kind, const SideTerms& d, const SideTerms& n) {
  Eigen::ArrayXd ld(d.psi.size()), ln(n.psi.size());
  if (kind == LossKind::NCE) {
    for (Eigen::Index i = 0; i < ld.size(); ++i) ld(i) = softplus(-d.psi(i));
    for (Eigen::Index i = 0; i < ln.size(); ++i) ln(i) = softplus(n.psi(i));
  } else {
    ld = (-0.5 * d.psi).exp();
    ln = (0.5 * n.psi).exp();
  }
  return {ld, ln};
}

// Scalar weights w with per-sample gradient w * T(x).
std::pair<Eigen::ArrayXd, Eigen::ArrayXd> per_sample_weights(LossKind kind, const SideTerms& d, const SideTerms& n) {
  Eigen::ArrayXd wd(d.psi.size()), wn(n.psi.size());
  if (kind == LossKind::NCE) {
    for (Eigen::Index i = 0; i < wd.size(); ++i) wd(i) = -sigmoid(-d.psi(i));
    for (Eigen::Index i = 0; i < wn.size(); ++i) wn(i) = sigmoid(n.psi(i));
  } else {
    wd = -0.5 * (-0.5 * d.psi).exp();
    wn = 0.5 * (0.5 * n.psi).exp();
  }
  return {wd, wn};
}

void clip_weights(Eigen::ArrayXd& w, const Matrix& stats, double cap) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double norm = std::abs(w(i)) * stats.row(i).norm();
    if (norm > cap) w(i) *= cap / norm;
  }
}

Estimate<double> loss_estimate(const Objective& obj, const TauParam& tau, const Batch& batch,
                               const std::optional<double>& cap) {
  check_batch(batch);
  const SideTerms d = side_terms(obj, tau, batch.data, cap);
  const SideTerms n = side_terms(obj, tau, batch.noise, cap);
  const auto [ld, ln] = per_sample_losses(obj.kind(), d, n);
  const double value = 0.5 * shifted_mean(ld) + 0.5 * shifted_mean(ln);
  const double se = 0.5 * std::sqrt(sample_variance(ld) / static_cast<double>(ld.size()) +
                                    sample_variance(ln) / static_cast<double>(ln.size()));
  return {value, se};
}

Estimate<Vector> gradient_estimate(const Objective& obj, const TauParam& tau, const Batch& batch,
                                   const ClipPolicy& clip) {
  check_batch(batch);
  const SideTerms d = side_terms(obj, tau, batch.data, clip.log_ratio_cap);
  const SideTerms n = side_terms(obj, tau, batch.noise, clip.log_ratio_cap);
  auto [wd, wn] = per_sample_weights(obj.kind(), d, n);
  if (clip.grad_norm_cap) {
    clip_weights(wd, d.stats, *clip.grad_norm_cap);
    clip_weights(wn, n.stats, *clip.grad_norm_cap);
  }
  const double nd = static_cast<double>(wd.size());
  const double nn = static_cast<double>(wn.size());
  const Vector value = 0.5 * (d.stats.transpose() * wd.matrix() / nd + n.stats.transpose() * wn.matrix() / nn);

  Vector se(value.size());
  for (Eigen::Index k = 0; k < value.size(); ++k) {
    const Eigen::ArrayXd cd = wd * d.stats.col(k).array();
    const Eigen::ArrayXd cn = wn * n.stats.col(k).array();
    se(k) = 0.5 * std::sqrt(sample_variance(cd) / nd + sample_variance(cn) / nn);
  }
  return {value, se};
}

Matrix hessian_estimate(const Objective& obj, const TauParam& tau, const Batch& batch) {
  check_batch(batch);
  const SideTerms d = side_terms(obj, tau, batch.data, std::nullopt);
  const SideTerms n = side_terms(obj, tau, batch.noise, std::nullopt);
  Eigen::ArrayXd cd(d.psi.size()), cn(n.psi.size());
  if (obj.kind() == LossKind::NCE) {
    for (Eigen::Index i = 0; i < cd.size(); ++i) cd(i) = 0.5 * sigmoid(d.psi(i)) * sigmoid(-d.psi(i));
    for (Eigen::Index i = 0; i < cn.size(); ++i) cn(i) = 0.5 * sigmoid(n.psi(i)) * sigmoid(-n.psi(i));
  } else {
    cd = 0.125 * (-0.5 * d.psi).exp();
    cn = 0.125 * (0.5 * n.psi).exp();
  }
  const Matrix hd = d.stats.transpose() * cd.matrix().asDiagonal() * d.stats / static_cast<double>(cd.size());
  const Matrix hn = n.stats.transpose() * cn.matrix().asDiagonal() * n.stats / static_cast<double>(cn.size());
  const Matrix h = hd + hn;
  return 0.5 * (h + h.transpose());
}

Batch mc_batch(const Objective& obj, const TauParam& tau, const MonteCarloBackend& mc) {
  const std::uint64_t stream = mix_seed({mc.seed, digest(tau.stacked()), obj.next_evaluation()});
  return Batch{sample(obj.family(), obj.tau_star(), mc.n, mix_seed({stream, 1})),
               sample(obj.family(), obj.tau_q(), mc.n, mix_seed({stream, 2}))};
}

}  // namespace

double population_loss(const Objective& objective, const TauParam& tau) {
  check_tau(objective, tau);
  return std::visit(
      [&](const auto& backend) -> double {
        using B = std::decay_t<decltype(backend)>;
        if constexpr (std::is_same_v<B, QuadratureBackend>) {
          return quadrature_loss(objective, tau, backend);
        } else if constexpr (std::is_same_v<B, MonteCarloBackend>) {
          return mc_population_loss(objective, tau, backend).value;
        } else {
          return closed_form_loss(objective, tau);
        }
      },
      objective.backend());
}

Vector population_gradient(const Objective& objective, const TauParam& tau) {
  check_tau(objective, tau);
  return std::visit(
      [&](const auto& backend) -> Vector {
        using B = std::decay_t<decltype(backend)>;
        if constexpr (std::is_same_v<B, QuadratureBackend>) {
          return quadrature_gradient(objective, tau, backend);
        } else if constexpr (std::is_same_v<B, MonteCarloBackend>) {
          return mc_population_gradient(objective, tau, backend).value;
        } else {
          return closed_form_gradient(objective, tau);
        }
      },
      objective.backend());
}

Matrix population_hessian(const Objective& objective, const TauParam& tau) {
  check_tau(objective, tau);
  return std::visit(
      [&](const auto& backend) -> Matrix {
        using B = std::decay_t<decltype(backend)>;
        if constexpr (std::is_same_v<B, QuadratureBackend>) {
          return quadrature_hessian(objective, tau, backend);
        } else if constexpr (std::is_same_v<B, MonteCarloBackend>) {
          return mc_population_hessian(objective, tau, backend);
        } else {
          return closed_form_hessian(objective, tau);
        }
      },
      objective.backend());
}

Estimate<double> mc_population_loss(const Objective& objective, const TauParam& tau,
                                    const MonteCarloBackend& mc) {
  check_tau(objective, tau);
  return loss_estimate(objective, tau, mc_batch(objective, tau, mc), std::nullopt);
}

Estimate<Vector> mc_population_gradient(const Objective& objective, const TauParam& tau,
                                        const MonteCarloBackend& mc) {
  check_tau(objective, tau);
  return gradient_estimate(objective, tau, mc_batch(objective, tau, mc), ClipPolicy::none());
}

Matrix mc_population_hessian(const Objective& objective, const TauParam& tau, const MonteCarloBackend& mc) {
  check_tau(objective, tau);
  return hessian_estimate(objective, tau, mc_batch(objective, tau, mc));
}

Batch draw_batch(const Objective& objective, std::size_t n, std::uint64_t seed) {
  return Batch{sample(objective.family(), objective.tau_star(), n, mix_seed({seed, 1})),
               sample(objective.family(), objective.tau_q(), n, mix_seed({seed, 2}))};
}

double empirical_loss(const Objective& objective, const TauParam& tau, const Batch& batch, const ClipPolicy& clip) {
  check_tau(objective, tau);
  return loss_estimate(objective, tau, batch, clip.log_ratio_cap).value;
}

Estimate<double> empirical_loss_estimate(const Objective& objective, const TauParam& tau, const Batch& batch) {
  check_tau(objective, tau);
  return loss_estimate(objective, tau, batch, std::nullopt);
}

Vector empirical_gradient(const Objective& objective, const TauParam& tau, const Batch& batch,
                          const ClipPolicy& clip) {
  check_tau(objective, tau);
  return gradient_estimate(objective, tau, batch, clip).value;
}

Estimate<Vector> empirical_gradient_estimate(const Objective& objective, const TauParam& tau,
                                             const Batch& batch) {
  check_tau(objective, tau);
  return gradient_estimate(objective, tau, batch, ClipPolicy::none());
}

Matrix empirical_hessian(const Objective& objective, const TauParam& tau, const Batch& batch) {
  check_tau(objective, tau);
  return hessian_estimate(objective, tau, batch);
}

}  // namespace nce
