#include <cmath>

#include "doctest.h"
#include "nce/landscape.hpp"
#include "nce/rng.hpp"
#include "oracles/reference_values.hpp"

using namespace nce;

namespace {

Vector s1(double x) { return Vector::Constant(1, x); }

}  // namespace

TEST_CASE("Hessian extremes at the optimum") {
  const Objective n6 = Objective::gaussian_1d(LossKind::NCE, 6.0, 0.0);
  const HessianExtremes h = hessian_extremes(n6, n6.tau_star());
  CHECK(h.sigma_max <= 6.0 / std::sqrt(2.0 * M_PI) * std::exp(-4.5));
  CHECK(h.sigma_min == doctest::Approx(ref::nce_opt_sigma_min_r6).epsilon(1e-7));
  CHECK(h.sigma_max == doctest::Approx(ref::nce_opt_sigma_max_r6).epsilon(1e-7));

  const Objective e4 = Objective::gaussian_1d(LossKind::ENCE, 4.0, 0.0);
  const HessianExtremes he = hessian_extremes(e4, e4.tau_star());
  const double s = std::exp(-2.0) / 4.0;
  CHECK(std::abs(he.sigma_min - s * (3.0 - 2.0 * std::sqrt(2.0))) <= 1e-6);
  CHECK(std::abs(he.sigma_max - s * (3.0 + 2.0 * std::sqrt(2.0))) <= 1e-6);

  const Objective mc = n6.with_backend(MonteCarloBackend{1000, 1});
  CHECK_THROWS_AS(hessian_extremes(mc, mc.tau_star()), DomainError);
}

TEST_CASE("condition number at the optimum") {
  const Objective e4 = Objective::gaussian_1d(LossKind::ENCE, 4.0, 0.0);
  CHECK(condition_number_at_optimum(e4) == doctest::Approx(33.97).epsilon(0.1 / 33.97));
  const double exact = (3.0 + 2.0 * std::sqrt(2.0)) / (3.0 - 2.0 * std::sqrt(2.0));
  CHECK(std::abs(condition_number_at_optimum(e4.with_backend(ClosedFormBackend{})) - exact) <= 1e-8);

  Objective e0 = Objective::gaussian_1d(LossKind::ENCE, 0.0, 0.0);
  CHECK(condition_number_at_optimum(e0) == doctest::Approx(1.0).epsilon(1e-10));

  const Objective n6 = Objective::gaussian_1d(LossKind::NCE, 6.0, 0.0);
  const double k = condition_number_at_optimum(n6);
  CHECK(k >= 36.0 / 16.0);
  CHECK(k <= 16.0 * 36.0);

  const Objective n40 = Objective::gaussian_1d(LossKind::NCE, 80.0, 0.0);
  CHECK_THROWS_AS(condition_number_at_optimum(n40), UnderflowError);
}

TEST_CASE("Bhattacharyya coefficient") {
  const Family f = Family::gaussian_mean_1d();
  CHECK(bhattacharyya(f, s1(1.3), s1(1.3)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(bhattacharyya(f, s1(0.0), s1(2.0)) - 0.6065306597) <= 1e-8);
  CHECK(std::abs(bhattacharyya(f, s1(0.0), s1(2.0)) - ref::bc_r2) <= 1e-10);
  CHECK(std::abs(bhattacharyya(f, s1(0.0), s1(4.0), BcMethod::ClosedForm) - ref::bc_r4) <= 1e-15);
  CHECK(bhattacharyya(f, s1(0.0), s1(2.35)) >= 0.5);

  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const Vector a = s1(6.0 * rng.uniform() - 3.0), b = s1(6.0 * rng.uniform() - 3.0);
    const double ab = bhattacharyya(f, a, b), ba = bhattacharyya(f, b, a);
    CHECK(std::abs(ab - ba) <= 1e-12);
    CHECK(ab > 0.0);
    CHECK(ab <= 1.0 + 1e-12);
    CHECK(std::abs(ab - bhattacharyya(f, a, b, BcMethod::ClosedForm)) <= 1e-8);
  }

  const Family d = Family::diag_gaussian(3);
  Vector m(6);
  m << 0, 0, 0, 1, 1, 1;
  const Vector t1 = tau_of_theta(d, m).theta;
  m << 1, 0, -1, 2, 1, 0.5;
  const Vector t2 = tau_of_theta(d, m).theta;
  const double bc = bhattacharyya(d, t1, t2);
  CHECK(bc > 0.0);
  CHECK(bc < 1.0);
  CHECK_THROWS_AS(bhattacharyya(d, t1, t2, BcMethod::Quadrature), DomainError);
}

TEST_CASE("neighborhood constants") {
  const Objective e2 = Objective::gaussian_1d(LossKind::ENCE, 2.0, 0.0);
  std::vector<Vector> thetas;
  for (double t = -1.0; t <= 3.0; t += 0.25) thetas.push_back(s1(t));
  const FamilyBounds b = measure_bounds(e2.family(), thetas);
  const NeighborhoodConstants none = neighborhood_constants(e2, b, 0, 3);
  CHECK(none.beta_u == 1.0);
  CHECK(none.beta_l == 1.0);
  CHECK(none.samples_used == 0);
  CHECK(none.radius == doctest::Approx(1.0 / b.beta_z));

  const NeighborhoodConstants nc = neighborhood_constants(e2, b, 64, 3);
  CHECK(nc.samples_used == 64);
  CHECK(nc.beta_u <= 2.0 * std::exp(1.0) * b.lambda_ratio());
  CHECK(nc.beta_l >= 1.0 / (2.0 * std::exp(1.0) * b.lambda_ratio()));
  CHECK(nc.beta_u >= 1.0);
  CHECK(nc.beta_l <= 1.0);

  const Objective n2 = e2.with_kind(LossKind::NCE);
  const NeighborhoodConstants nn = neighborhood_constants(n2, b, 64, 3);
  CHECK(std::isfinite(nn.beta_u / nn.beta_l));
}

TEST_CASE("annulus probe") {
  const Objective n8 = Objective::gaussian_1d(LossKind::NCE, 8.0, 0.0);
  const auto pts = annulus_probe(n8, 8.0, 50, 1);
  REQUIRE(pts.size() == 50);
  double worst = 0.0;
  for (const AnnulusPoint& p : pts) {
    const double r = (p.tau - n8.tau_star().stacked()).norm();
    CHECK(r >= 0.8 - 1e-12);
    CHECK(r <= 1.6 + 1e-12);
    worst = std::max(worst, p.projected_gradient);
  }
  CHECK(worst <= std::exp(-0.6 * 64.0 / 8.0));

  const Vector dir = (n8.tau_q().stacked() - n8.tau_star().stacked()).normalized();
  const Vector at = n8.tau_star().stacked() + 0.15 * 8.0 * dir;
  const Vector g = population_gradient(n8, TauParam::from_stacked(at));
  const Vector to = n8.tau_star().stacked() - at;
  CHECK(projected_gradient(n8, at) == std::abs(g.dot(to / to.norm())));

  CHECK_THROWS_AS(annulus_probe(n8, 2.0, 10, 1), DomainError);
  CHECK(annulus_probe(n8, 8.0, 50, 1)[7].tau == pts[7].tau);
}

TEST_CASE("certify") {
  CertifySetup s;
  s.radii = {4.0};
  s.kinds = {LossKind::ENCE};
  s.ngd_certificate = false;
  const LandscapeReport r = certify(s);
  CHECK(r.count(Verdict::Pass) >= 4);
  CHECK(r.count(Verdict::Fail) == 0);
  bool kappa = false;
  for (const Check& c : r.checks) kappa |= c.claim_id.find("ence_kappa") != std::string::npos;
  CHECK(kappa);
  CHECK(r.to_text().find("PASS ence_initial_loss") != std::string::npos);
  CHECK(r.to_csv().rfind("claim_id,verdict,measured,bound,tolerance,anchor,note\n", 0) == 0);

  CertifySetup zero;
  zero.radii = {0.0};
  zero.kinds = {LossKind::NCE};
  const LandscapeReport rz = certify(zero);
  CHECK(rz.count(Verdict::Skip) >= 5);
  CHECK(rz.all_passed());

  s.bound_scale = 1e-3;
  CHECK(!certify(s).all_passed());
}
