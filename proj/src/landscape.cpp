#include "nce/landscape.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "nce/optim.hpp"
#include "nce/rng.hpp"

namespace nce {

HessianExtremes hessian_extremes(const Objective& objective, const TauParam& tau) {
  if (const auto* mc = std::get_if<MonteCarloBackend>(&objective.backend()); mc != nullptr && mc->n < 100'000) {
    throw DomainError("hessian_extremes: Monte Carlo backend needs n >= 1e5");
  }
  const EigenResult e = sym_eigen(population_hessian(objective, tau));
  return {e.min(), e.max()};
}

double condition_number_at_optimum(const Objective& objective) {
  const HessianExtremes h = hessian_extremes(objective, objective.tau_star());
  if (!(h.sigma_min >= 1e-300)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "condition_number_at_optimum: sigma_min underflows (log sigma_max = %.6g)",
                  std::log(h.sigma_max));
    throw UnderflowError(buf);
  }
  return h.sigma_max / h.sigma_min;
}

double bhattacharyya(const Family& family, const Vector& theta1, const Vector& theta2, BcMethod method) {
  if (!family.is_valid_natural(theta1) || !family.is_valid_natural(theta2)) {
    throw DomainError("bhattacharyya: parameters must be normalizable");
  }
  if (method == BcMethod::Auto) method = family.dim() == 1 ? BcMethod::Quadrature : BcMethod::ClosedForm;
  if (method == BcMethod::ClosedForm) {
    const Vector mid = 0.5 * (theta1 + theta2);
    return std::exp(family.log_partition(mid) - 0.5 * family.log_partition(theta1) -
                    0.5 * family.log_partition(theta2));
  }
  if (family.dim() != 1) throw DomainError("bhattacharyya: quadrature needs a one-dimensional family");
  const TauParam t1 = tau_of_natural(family, theta1);
  const TauParam t2 = tau_of_natural(family, theta2);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, min_sd = lo;
  for (const Vector* th : {&theta1, &theta2}) {
    const CenterScale cs = *family.center_scale(*th);
    lo = std::min(lo, cs.mean - 12.0 * cs.sd);
    hi = std::max(hi, cs.mean + 12.0 * cs.sd);
    min_sd = std::min(min_sd, cs.sd);
  }
  QuadratureSpec spec;
  spec.lower = lo;
  spec.upper = hi;
  spec.initial_panels = static_cast<std::size_t>(std::clamp(std::ceil((hi - lo) / min_sd), 1.0, 4096.0));
  Vector x(1);
  return integrate(
      [&](double v) {
        x(0) = v;
        return std::exp(0.5 * (log_pdf(family, t1, x) + log_pdf(family, t2, x)));
      },
      spec);
}

NeighborhoodConstants neighborhood_constants(const Objective& objective, const FamilyBounds& bounds,
                                             std::size_t n, std::uint64_t seed) {
  NeighborhoodConstants out;
  out.radius = bounds.beta_z > 0.0 ? 1.0 / bounds.beta_z : 0.0;
  if (n == 0) return out;
  if (!(bounds.beta_z > 0.0)) throw DomainError("neighborhood_constants: beta_z must be positive");
  const HessianExtremes star = hessian_extremes(objective, objective.tau_star());
  const Vector center = objective.tau_star().stacked();
  Rng rng(seed);
  double hi = 0.0, lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    Vector u(center.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = rng.normal();
    u /= u.norm();
    const double c = out.radius * (1.0 - rng.uniform());  // (0, radius]
    const HessianExtremes h = hessian_extremes(objective, TauParam::from_stacked(center + c * u));
    hi = std::max(hi, h.sigma_max / star.sigma_max);
    lo = std::min(lo, h.sigma_min / star.sigma_min);
  }
  out.beta_u = std::max(1.0, hi);
  out.beta_l = std::min(1.0, lo);
  out.samples_used = n;
  return out;
}

double projected_gradient(const Objective& objective, const Vector& tau) {
  const Vector dir = objective.tau_star().stacked() - tau;
  const double n = dir.norm();
  if (n == 0.0) return 0.0;
  return std::abs(population_gradient(objective, TauParam::from_stacked(tau)).dot(dir / n));
}

std::vector<AnnulusPoint> annulus_probe(const Objective& objective, double radius, std::size_t n_points,
                                        std::uint64_t seed) {
  if (objective.family().kind() != FamilyKind::GaussianMean1D) {
    throw DomainError("annulus_probe: needs the 1-d Gaussian mean family");
  }
  if (!(radius >= 4.0)) throw DomainError("annulus_probe: R must be at least 4");
  const Vector center = objective.tau_star().stacked();
  const double r1 = 0.1 * radius, r2 = 0.2 * radius;
  Rng rng(seed);
  std::vector<AnnulusPoint> out;
  out.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double r = std::sqrt(r1 * r1 + rng.uniform() * (r2 * r2 - r1 * r1));
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    Vector tau = center;
    tau(0) += r * std::cos(phi);
    tau(1) += r * std::sin(phi);
    out.push_back({tau, projected_gradient(objective, tau)});
  }
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Skip: return "SKIP";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

std::size_t LandscapeReport::count(Verdict v) const {
  std::size_t n = 0;
  for (const Check& c : checks) n += c.verdict == v;
  return n;
}

bool LandscapeReport::all_passed() const {
  return count(Verdict::Fail) == 0 && count(Verdict::Inconclusive) == 0;
}

bool LandscapeReport::inconclusive() const { return count(Verdict::Inconclusive) > 0; }

namespace {

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string LandscapeReport::to_text() const {
  std::ostringstream os;
  for (const Check& c : checks) {
    // The line format has no INCONCLUSIVE verb; those are FAIL with a note.
    const Verdict shown = c.verdict == Verdict::Inconclusive ? Verdict::Fail : c.verdict;
    os << to_string(shown) << ' ' << c.claim_id << " measured=" << fmt(c.measured, 10) << " bound=" << fmt(c.bound, 10)
       << " anchor=\"" << c.anchor << '"';
    if (c.verdict == Verdict::Inconclusive) os << " note=\"inconclusive: " << c.note << '"';
    else if (!c.note.empty()) os << " note=\"" << c.note << '"';
    os << '\n';
  }
  return os.str();
}

std::string LandscapeReport::to_csv() const {
  std::ostringstream os;
  os << "claim_id,verdict,measured,bound,tolerance,anchor,note\n";
  for (const Check& c : checks) {
    os << csv_field(c.claim_id) << ',' << to_string(c.verdict) << ',' << fmt(c.measured, 17) << ','
       << fmt(c.bound, 17) << ',' << fmt(c.tolerance, 17) << ',' << csv_field(c.anchor) << ',' << csv_field(c.note)
       << '\n';
  }
  return os.str();
}

namespace {

enum class Sense { AtMost, AtLeast };

struct Builder {
  LandscapeReport report;
  double scale;
  std::string suffix;

  void skip(const std::string& id, const std::string& anchor, const std::string& why) {
    Check c;
    c.claim_id = id + suffix;
    c.anchor = anchor;
    c.measured = std::numeric_limits<double>::quiet_NaN();
    c.bound = std::numeric_limits<double>::quiet_NaN();
    c.verdict = Verdict::Skip;
    c.note = why;
    report.checks.push_back(c);
  }

  // measure() returns {measured, bound}; tol is relative slack on the bound.
  void add(const std::string& id, const std::string& anchor, Sense sense, double tol,
           const std::function<std::pair<double, double>()>& measure, const std::string& note = "") {
    Check c;
    c.claim_id = id + suffix;
    c.anchor = anchor;
    c.tolerance = tol;
    c.note = note;
    try {
      auto [m, b] = measure();
      b = sense == Sense::AtMost ? b * scale : b / scale;
      c.measured = m;
      c.bound = b;
      const bool ok = sense == Sense::AtMost ? m <= b + tol * std::abs(b) : m >= b - tol * std::abs(b);
      c.verdict = std::isfinite(m) ? (ok ? Verdict::Pass : Verdict::Fail) : Verdict::Inconclusive;
      if (!std::isfinite(m)) c.note = "non-finite measurement";
    } catch (const std::exception& ex) {
      c.measured = c.bound = std::numeric_limits<double>::quiet_NaN();
      c.verdict = Verdict::Inconclusive;
      c.note = ex.what();
    }
    report.checks.push_back(c);
  }
};

constexpr double kSqrt2Pi = 2.5066282746310002;

FamilyBounds segment_bounds(const Family& family, double r) {
  const auto pts = segment_points(Vector::Zero(1), Vector::Constant(1, r), 65);
  return measure_bounds(family, pts);
}

struct NgdOutcome {
  double hit_step;  // NaN when the budget ran out
};

NgdOutcome ngd_first_hit(const Objective& obj, double eta, double delta, double budget) {
  AlgoConfig cfg;
  cfg.algo = Algorithm::NGD;
  cfg.eta = eta;
  cfg.target_delta = delta;
  cfg.stop_at_target = true;
  cfg.grad_tol = 0.0;
  cfg.max_steps = static_cast<std::size_t>(std::min(budget, 5e7));
  cfg.record_stride = cfg.max_steps;
  const Trace tr = run(obj, cfg, obj.tau_q());
  return {tr.first_hit_step ? static_cast<double>(*tr.first_hit_step) : std::numeric_limits<double>::infinity()};
}

void ngd_theorem_checks(Builder& b, const CertifySetup& setup, const Objective& obj, double r) {
  const std::string anchor = "first iterate within delta by (beta_u kappa*/beta_l) |tau0 - tau*|^2/delta^2";
  if (!setup.ngd_certificate || r > 4.0) {
    b.skip("ngd_budget", anchor, setup.ngd_certificate ? "certified for R <= 4 only" : "disabled");
    return;
  }
  for (double delta : {0.1, 0.05}) {
    b.add("ngd_budget[delta=" + fmt(delta, 3) + "]", anchor, Sense::AtMost, 0.0, [&] {
      const FamilyBounds fb = segment_bounds(obj.family(), r);
      const NeighborhoodConstants nc =
          neighborhood_constants(obj, fb, setup.neighborhood_samples, mix_seed({setup.seed, 7}));
      const double kappa = condition_number_at_optimum(obj);
      const double d = (obj.tau_q().stacked() - obj.tau_star().stacked()).norm();
      const double budget = nc.beta_u * kappa / nc.beta_l * d * d / (delta * delta);
      const double eta = std::sqrt(nc.beta_l / (nc.beta_u * kappa)) * delta;
      return std::pair{ngd_first_hit(obj, eta, delta, budget).hit_step, budget};
    });
  }
}

void certify_nce(Builder& b, const CertifySetup& setup, double r) {
  const Objective obj = Objective::gaussian_1d(LossKind::NCE, r, 0.0);
  const bool degenerate = r < 1.0;
  const std::string why = "degenerate setup (R < 1)";
  const double bc = std::exp(-r * r / 8.0);

  b.add("initial_loss", "L(tau_q) = log 2", Sense::AtMost, 0.0, [&] {
    return std::pair{std::abs(population_loss(obj, obj.tau_q()) - std::numbers::ln2), 1e-9};
  });

  if (degenerate) {
    for (const char* id : {"optimal_loss_window_lower", "optimal_loss_window_upper", "smoothness_at_optimum",
                           "strong_convexity_at_optimum", "smoothness_at_noise", "smoothness_at_noise_ratio",
                           "annulus_flatness", "loss_to_distance_upper", "loss_to_distance_lower", "cond_number_bc",
                           "ngd_budget"}) {
      b.skip(id, "requires R >> 1", why);
    }
  } else {
    b.add("optimal_loss_window_lower", "L* = c exp(-R^2/8), c in [1/2, 2]", Sense::AtLeast, 0.0, [&] {
      return std::pair{population_loss(obj, obj.tau_star()) / bc, 0.5};
    });
    b.add("optimal_loss_window_upper", "L* = c exp(-R^2/8), c in [1/2, 2]", Sense::AtMost, 0.0, [&] {
      return std::pair{population_loss(obj, obj.tau_star()) / bc, 2.0};
    });
    HessianExtremes star{};
    bool have_star = false;
    auto star_extremes = [&] {
      if (!have_star) {
        star = hessian_extremes(obj, obj.tau_star());
        have_star = true;
      }
      return star;
    };
    b.add("smoothness_at_optimum", "sigma_max(H(tau*)) <= R/sqrt(2 pi) exp(-R^2/8)", Sense::AtMost, 0.0, [&] {
      return std::pair{star_extremes().sigma_max, r / kSqrt2Pi * bc};
    });
    b.add("strong_convexity_at_optimum", "sigma_min(H(tau*)) >= exp(-R^2/8)/(4 R sqrt(2 pi))", Sense::AtLeast, 0.0,
          [&] { return std::pair{star_extremes().sigma_min, bc / (4.0 * r * kSqrt2Pi)}; });

    const double stated = r * r / 2.0;
    b.add("smoothness_at_noise", "sigma_max(H(tau_q)) >= R^2/8 (derived; stated threshold R^2/2 = " + fmt(stated, 6) + ")",
          Sense::AtLeast, 0.0, [&] {
            return std::pair{hessian_extremes(obj, obj.tau_q()).sigma_max, r * r / 8.0};
          });
    b.add("smoothness_at_noise_ratio", "sigma_max(H(tau_q)) within a factor 2 of (R^2+2)/8", Sense::AtMost, 0.0, [&] {
      const double ratio = hessian_extremes(obj, obj.tau_q()).sigma_max / ((r * r + 2.0) / 8.0);
      return std::pair{std::max(ratio, 1.0 / ratio), 2.0};
    });

    if (r >= 8.0) {
      b.add("annulus_flatness", "|<grad L, unit(tau* - tau)>| <= exp(-0.6 R^2/8) on the annulus", Sense::AtMost, 0.0,
            [&] {
              double worst = 0.0;
              for (const AnnulusPoint& p : annulus_probe(obj, r, setup.annulus_points, mix_seed({setup.seed, 5})))
                worst = std::max(worst, p.projected_gradient);
              return std::pair{worst, std::exp(-0.6 * r * r / 8.0)};
            });
    } else {
      b.skip("annulus_flatness", "|<grad L, unit(tau* - tau)>| <= exp(-0.6 R^2/8) on the annulus",
             "envelope certified for R >= 8");
    }

    // Small-distance limit of (L(tau) - L*)/(R exp(-R^2/8) d^2) is u'Hu/(2 R exp(-R^2/8)).
    b.add("loss_to_distance_upper", "L(tau) - L* = Theta(R exp(-R^2/8) d^2), constant <= 4", Sense::AtMost, 0.0, [&] {
      return std::pair{star_extremes().sigma_max / (2.0 * r * bc), 4.0};
    });
    b.add("loss_to_distance_lower", "L(tau) - L* = Theta(R exp(-R^2/8) d^2), constant >= 1/(8 sqrt(2 pi))",
          Sense::AtLeast, 0.0, [&] {
            return std::pair{star_extremes().sigma_min / (2.0 * r * bc), 1.0 / (8.0 * kSqrt2Pi)};
          });

    b.add("cond_number_bc", "kappa* <= (lambda_max/(2 lambda_min)) / BC", Sense::AtMost, 1e-6, [&] {
      const FamilyBounds fb = segment_bounds(obj.family(), r);
      const HessianExtremes h = star_extremes();
      return std::pair{h.sigma_max / h.sigma_min, fb.lambda_ratio() / 2.0 / bc};
    });
  }

  {
    const FamilyBounds fb = segment_bounds(obj.family(), r);
    if (r * r <= 4.0 / fb.lambda_max) {
      b.add("bc_lemma", "|theta1 - theta2|^2 <= 4/lambda_max implies BC >= 1/2", Sense::AtLeast, 0.0, [&] {
        return std::pair{bhattacharyya(obj.family(), obj.tau_star().theta, obj.tau_q().theta), 0.5};
      });
    } else {
      b.skip("bc_lemma", "|theta1 - theta2|^2 <= 4/lambda_max implies BC >= 1/2",
             "pair outside the lemma radius 4/lambda_max = " + fmt(4.0 / fb.lambda_max, 6));
    }
  }

  if (!degenerate) ngd_theorem_checks(b, setup, obj, r);
}

void certify_ence(Builder& b, const CertifySetup& setup, double r) {
  const Objective obj = Objective::gaussian_1d(LossKind::ENCE, r, 0.0);
  const Family& fam = obj.family();
  const Vector& ts = obj.tau_star().theta;
  const Vector& tq = obj.tau_q().theta;

  b.add("ence_initial_loss", "L_exp(tau_q) = 1", Sense::AtMost, 0.0, [&] {
    return std::pair{std::abs(population_loss(obj, obj.tau_q()) - 1.0), 1e-10};
  });
  b.add("ence_optimum_bc", "L_exp(tau*) = BC(P*, Q)", Sense::AtMost, 0.0, [&] {
    return std::pair{std::abs(population_loss(obj, obj.tau_star()) - bhattacharyya(fam, ts, tq, BcMethod::ClosedForm)),
                     1e-8};
  });
  b.add("bc_closed_form_vs_quadrature", "BC closed form = integral of sqrt(p* q)", Sense::AtMost, 0.0, [&] {
    return std::pair{std::abs(bhattacharyya(fam, ts, tq, BcMethod::ClosedForm) -
                              bhattacharyya(fam, ts, tq, BcMethod::Quadrature)),
                     1e-8};
  });
  b.add("ence_kappa", "kappa*(eNCE) <= lambda_max/lambda_min over midpoints", Sense::AtMost, 1e-6, [&] {
    const Vector mid = 0.5 * (ts + tq);
    const FamilyBounds fb = measure_bounds(fam, std::span<const Vector>(&mid, 1));
    return std::pair{condition_number_at_optimum(obj), fb.lambda_ratio()};
  });

  if (r < 1.0) {
    b.skip("ngd_budget", "requires R >> 1", "degenerate setup (R < 1)");
    b.skip("ence_ngd_budget", "NGD on eNCE within delta by 4e^2 (lambda_max/lambda_min)^3 |tau0 - tau*|^2/delta^2",
           "degenerate setup (R < 1)");
    return;
  }
  if (!setup.ngd_certificate || r > 4.0) {
    ngd_theorem_checks(b, setup, obj, r);
    b.skip("ence_ngd_budget", "NGD on eNCE within delta by 4e^2 (lambda_max/lambda_min)^3 |tau0 - tau*|^2/delta^2",
           setup.ngd_certificate ? "certified for R <= 4 only" : "disabled");
    return;
  }
  const Objective exact = obj.with_backend(ClosedFormBackend{});
  ngd_theorem_checks(b, setup, exact, r);
  for (double delta : {0.1, 0.05}) {
    b.add("ence_ngd_budget[delta=" + fmt(delta, 3) + "]",
          "NGD on eNCE within delta by 4e^2 (lambda_max/lambda_min)^3 |tau0 - tau*|^2/delta^2", Sense::AtMost, 0.0,
          [&] {
            const double rho = segment_bounds(fam, r).lambda_ratio();
            const double d = (exact.tau_q().stacked() - exact.tau_star().stacked()).norm();
            const double e = std::numbers::e;
            const double budget = 4.0 * e * e * rho * rho * rho * d * d / (delta * delta);
            const double eta = delta / (2.0 * e * std::pow(rho, 1.5));
            return std::pair{ngd_first_hit(exact, eta, delta, budget).hit_step, budget};
          });
  }
}

}  // namespace

LandscapeReport certify(const CertifySetup& setup) {
  Builder b{{}, setup.bound_scale, ""};
  for (double r : setup.radii) {
    for (LossKind kind : setup.kinds) {
      b.suffix = "[" + to_string(kind) + ",R=" + fmt(r, 6) + "]";
      if (setup.family.kind() != FamilyKind::GaussianMean1D) {
        b.skip("landscape", "quadrature-backed checks", "needs the 1-d Gaussian mean family");
        continue;
      }
      if (!(r >= 0.0) || !std::isfinite(r)) {
        b.skip("landscape", "quadrature-backed checks", "invalid radius");
        continue;
      }
      if (kind == LossKind::NCE) certify_nce(b, setup, r);
      else certify_ence(b, setup, r);
    }
  }
  return b.report;
}

}  // namespace nce
