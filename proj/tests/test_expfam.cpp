#include <cmath>

#include "doctest.h"
#include "nce/expfam.hpp"
#include "nce/numerics.hpp"
#include "oracles/reference_values.hpp"

using namespace nce;

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("tau_of_theta for the mean family") {
  const Family f = Family::gaussian_mean_1d();
  const TauParam t0 = tau_of_theta(f, vec({0.0}));
  CHECK(t0.theta(0) == 0.0);
  CHECK(t0.alpha == doctest::Approx(kLogSqrt2Pi).epsilon(1e-15));
  const TauParam t16 = tau_of_theta(f, vec({16.0}));
  CHECK(t16.theta(0) == 16.0);
  CHECK(t16.alpha == doctest::Approx(128.0 + kLogSqrt2Pi).epsilon(1e-15));
}

TEST_CASE("tau_of_theta for diagonal Gaussians") {
  const Family f = Family::diag_gaussian(1);
  const TauParam t = tau_of_theta(f, vec({0.0, 1.0}));
  CHECK(t.theta(0) == 1.0);
  CHECK(t.theta(1) == 0.0);
  CHECK(t.alpha == doctest::Approx(kLogSqrt2Pi).epsilon(1e-15));
  CHECK_THROWS_AS(tau_of_theta(f, vec({0.0, 0.0})), DomainError);
  CHECK_THROWS_AS(tau_of_theta(f, vec({0.0, -2.0})), DomainError);
  CHECK_THROWS_AS(tau_of_theta(f, vec({0.0})), DomainError);
}

TEST_CASE("sufficient statistics") {
  const Family m = Family::gaussian_mean_1d();
  CHECK(suff_stats(m, vec({3.0})) == vec({3.0, -1.0}));
  CHECK(suff_stats(m, vec({0.0})) == vec({0.0, -1.0}));
  const Family d = Family::diag_gaussian(2);
  CHECK(suff_stats(d, vec({1.0, 2.0})) == vec({-0.5, -2.0, 1.0, 2.0, -1.0}));
  CHECK(m.suff_stat_dim() == 2);
  CHECK(Family::diag_gaussian(16).suff_stat_dim() == 33);
  Matrix rows(2, 2);
  rows << 1.0, 2.0, -3.0, 0.5;
  const Matrix s = d.suff_stats_rows(rows);
  CHECK(Vector(s.row(0).transpose()) == suff_stats(d, vec({1.0, 2.0})));
  CHECK(Vector(s.row(1).transpose()) == suff_stats(d, vec({-3.0, 0.5})));
}

TEST_CASE("log_pdf values") {
  const Family f = Family::gaussian_mean_1d();
  CHECK(log_pdf(f, tau_of_theta(f, vec({0.0})), vec({0.0})) == doctest::Approx(-kLogSqrt2Pi).epsilon(1e-15));
  CHECK(log_pdf(f, tau_of_theta(f, vec({16.0})), vec({16.0})) == doctest::Approx(-kLogSqrt2Pi).epsilon(1e-14));
  CHECK(log_pdf(f, TauParam{vec({0.0}), kLogSqrt2Pi}, vec({2.0})) == doctest::Approx(-2.0 - kLogSqrt2Pi).epsilon(1e-15));
}

TEST_CASE("log partition") {
  const Family m = Family::gaussian_mean_1d();
  CHECK(log_partition(m, vec({0.0})) == doctest::Approx(kLogSqrt2Pi).epsilon(1e-15));
  CHECK(log_partition(m, vec({4.0})) == doctest::Approx(8.0 + kLogSqrt2Pi).epsilon(1e-15));
  const Family d = Family::diag_gaussian(1);
  CHECK(log_partition(d, vec({2.0, 0.0})) == doctest::Approx(ref::diag_log_partition_prec2).epsilon(1e-14));
  CHECK_THROWS_AS(log_partition(d, vec({0.0, 0.0})), DomainError);
  CHECK_THROWS_AS(log_partition(d, vec({-1.0, 0.0})), DomainError);
}

TEST_CASE("densities are normalized") {
  for (const Family& f : {Family::gaussian_mean_1d(), Family::diag_gaussian(1)}) {
    const std::vector<Vector> params = f.kind() == FamilyKind::GaussianMean1D
                                           ? std::vector<Vector>{vec({0.0}), vec({-3.5}), vec({16.0})}
                                           : std::vector<Vector>{vec({0.0, 1.0}), vec({2.0, 0.25}), vec({-1.0, 9.0})};
    for (const Vector& p : params) {
      const TauParam t = tau_of_theta(f, p);
      const CenterScale cs = *f.center_scale(t.theta);
      QuadratureSpec spec;
      spec.lower = cs.mean - 14.0 * cs.sd;
      spec.upper = cs.mean + 14.0 * cs.sd;
      spec.initial_panels = 28;
      Vector x(1);
      const double mass = integrate(
          [&](double v) {
            x(0) = v;
            return std::exp(log_pdf(f, t, x));
          },
          spec);
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("log density differences are linear in tau") {
  const Family f = Family::gaussian_mean_1d();
  const TauParam a = tau_of_theta(f, vec({1.3})), b = tau_of_theta(f, vec({-2.1}));
  for (double x : {-5.0, -0.3, 0.0, 2.2, 9.0}) {
    const Vector xv = vec({x});
    const double lhs = log_pdf(f, a, xv) - log_pdf(f, b, xv);
    const double rhs = (a.stacked() - b.stacked()).dot(suff_stats(f, xv));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  }
}

TEST_CASE("sampling") {
  const Family f = Family::gaussian_mean_1d();
  const Matrix s0 = sample(f, tau_of_theta(f, vec({0.0})), 1'000'000, 1);
  CHECK(std::abs(s0.mean()) < 0.01);
  const Matrix s16 = sample(f, tau_of_theta(f, vec({16.0})), 1'000'000, 1);
  const double mean = s16.mean();
  const double var = (s16.array() - mean).square().sum() / (s16.rows() - 1);
  CHECK(std::abs(var - 1.0) < 0.01);
  CHECK(std::abs(mean - 16.0) < 0.01);
  CHECK(sample(f, tau_of_theta(f, vec({0.0})), 0, 1).rows() == 0);
  const Matrix again = sample(f, tau_of_theta(f, vec({0.0})), 1'000'000, 1);
  CHECK(again == s0);
  const Family d = Family::diag_gaussian(3);
  const Matrix sd = sample(d, tau_of_theta(d, vec({1.0, -2.0, 0.0, 4.0, 0.25, 1.0})), 200'000, 9);
  CHECK(sd.cols() == 3);
  CHECK(std::abs(sd.col(0).mean() - 1.0) < 0.02);
  CHECK(std::abs(sd.col(1).mean() + 2.0) < 0.01);
  const double v0 = (sd.col(0).array() - sd.col(0).mean()).square().mean();
  CHECK(std::abs(v0 - 4.0) < 0.1);
}

TEST_CASE("Fisher moments: closed form against Monte Carlo and measured bounds") {
  const Family f = Family::gaussian_mean_1d();
  const std::vector<Vector> box = segment_points(vec({-3.0}), vec({3.0}), 61);
  const FamilyBounds b = measure_bounds(f, box);
  CHECK(b.omega == doctest::Approx(3.0));
  CHECK(b.beta_z == doctest::Approx(3.0));
  CHECK(b.lambda_min <= b.lambda_max);
  CHECK(b.lambda_min > 0.0);
  for (double th : {-3.0, -1.0, 0.5, 2.5}) {
    const Matrix x = sample(f, tau_of_theta(f, vec({th})), 200'000, 4);
    const Matrix t = f.suff_stats_rows(x);
    const Matrix mc = t.transpose() * t / static_cast<double>(t.rows());
    CHECK((mc - f.second_moment(vec({th}))).norm() < 0.05 * f.second_moment(vec({th})).norm());
    const EigenResult e = sym_eigen(mc);
    CHECK(e.min() >= b.lambda_min * 0.97);
    CHECK(e.max() <= b.lambda_max * 1.03);
  }
  const Family d = Family::diag_gaussian(2);
  const Vector th = tau_of_theta(d, vec({0.5, -1.0, 2.0, 0.5})).theta;
  const Matrix x = sample(d, tau_of_natural(d, th), 400'000, 8);
  const Matrix t = d.suff_stats_rows(x);
  const Matrix mc = t.transpose() * t / static_cast<double>(t.rows());
  CHECK((mc - d.second_moment(th)).norm() < 0.03 * d.second_moment(th).norm());
  const Vector m = t.colwise().mean().transpose();
  CHECK((m - d.mean_suff_stats(th)).norm() < 0.02 * d.mean_suff_stats(th).norm());
}

TEST_CASE("log partition gradient matches finite differences") {
  const Family d = Family::diag_gaussian(2);
  const Vector th = vec({0.7, 2.0, 0.3, -1.1});
  const Vector fd = fd_gradient([&](const Vector& v) { return d.log_partition(v); }, th, 1e-5);
  CHECK((fd - d.log_partition_gradient(th)).norm() < 1e-8);
}

TEST_CASE("segment points") {
  const auto pts = segment_points(vec({0.0, 1.0}), vec({2.0, 3.0}), 5);
  REQUIRE(pts.size() == 5);
  CHECK(pts.front() == vec({0.0, 1.0}));
  CHECK(pts.back() == vec({2.0, 3.0}));
  CHECK(pts[2] == vec({1.0, 2.0}));
  CHECK_THROWS_AS(segment_points(vec({0.0}), vec({1.0}), 1), DomainError);
}
