#include <cmath>

#include "doctest.h"
#include "nce/objective.hpp"
#include "nce/rng.hpp"

using namespace nce;

namespace {

TauParam random_tau(Rng& rng, const Objective& o) {
  Vector t = o.tau_star().stacked();
  for (int k = 0; k < t.size(); ++k) t(k) += 3.0 * (2.0 * rng.uniform() - 1.0);
  return TauParam::from_stacked(t);
}

}  // namespace

TEST_CASE("population Hessians are PSD") {
  for (LossKind k : {LossKind::NCE, LossKind::ENCE}) {
    const Objective o = Objective::gaussian_1d(k, 4.0, 0.0);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) CHECK(sym_eigen(population_hessian(o, random_tau(rng, o))).min() >= -1e-10);
  }
}

TEST_CASE("gradients and Hessians match finite differences") {
  for (LossKind k : {LossKind::NCE, LossKind::ENCE}) {
    const Objective o = Objective::gaussian_1d(k, 2.0, 0.0);
    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
      const TauParam t = random_tau(rng, o);
      const Vector g = population_gradient(o, t);
      const Vector fg = fd_gradient([&](const Vector& v) { return population_loss(o, TauParam::from_stacked(v)); },
                                    t.stacked(), 1e-4);
      CHECK((fg - g).norm() <= 1e-5 * std::max(g.norm(), 1e-3));
      const Matrix h = population_hessian(o, t);
      const Matrix fh = fd_jacobian([&](const Vector& v) { return population_gradient(o, TauParam::from_stacked(v)); },
                                    t.stacked(), 1e-4);
      CHECK((fh - h).norm() <= 1e-4 * std::max(h.norm(), 1e-3));
    }
  }
}

TEST_CASE("loss is convex along random segments") {
  for (LossKind k : {LossKind::NCE, LossKind::ENCE}) {
    const Objective o = Objective::gaussian_1d(k, 4.0, 0.0);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const Vector a = random_tau(rng, o).stacked(), b = random_tau(rng, o).stacked();
      const double la = population_loss(o, TauParam::from_stacked(a));
      const double lb = population_loss(o, TauParam::from_stacked(b));
      for (double s : {0.25, 0.5, 0.75}) {
        const double lm = population_loss(o, TauParam::from_stacked((1 - s) * a + s * b));
        CHECK(lm <= (1 - s) * la + s * lb + 1e-12);
      }
    }
  }
}

TEST_CASE("the optimum minimizes the population loss") {
  for (LossKind k : {LossKind::NCE, LossKind::ENCE}) {
    const Objective o = Objective::gaussian_1d(k, 3.0, -1.0);
    const double at = population_loss(o, o.tau_star());
    Rng rng(4);
    for (int i = 0; i < 20; ++i) CHECK(population_loss(o, random_tau(rng, o)) >= at);
  }
}

TEST_CASE("empirical agrees with population within 4 standard errors") {
  for (LossKind k : {LossKind::NCE, LossKind::ENCE}) {
    const Objective o = Objective::gaussian_1d(k, 2.0, 0.0);
    Rng rng(5);
    for (int i = 0; i < 10; ++i) {
      const TauParam t = TauParam::from_stacked(o.tau_star().stacked() +
                                                Vector::Constant(2, 0.5 * (2.0 * rng.uniform() - 1.0)));
      const Batch b = draw_batch(o, 50'000, 100 + i);
      const Estimate<double> l = empirical_loss_estimate(o, t, b);
      CHECK(std::abs(l.value - population_loss(o, t)) <= 4.0 * l.std_error);
      const Estimate<Vector> g = empirical_gradient_estimate(o, t, b);
      const Vector pg = population_gradient(o, t);
      for (int c = 0; c < 2; ++c) CHECK(std::abs(g.value(c) - pg(c)) <= 4.0 * g.std_error(c));
    }
  }
}
