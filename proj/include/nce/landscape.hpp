#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nce/expfam.hpp"
#include "nce/objective.hpp"

namespace nce {

struct HessianExtremes {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

// Eigen-extremes of the population Hessian. Monte Carlo backends need n >= 1e5.
HessianExtremes hessian_extremes(const Objective& objective, const TauParam& tau);

class UnderflowError : public DomainError {
 public:
  using DomainError::DomainError;
};

// sigma_max / sigma_min of the Hessian at tau_star; UnderflowError when
// sigma_min < 1e-300.
double condition_number_at_optimum(const Objective& objective);

enum class BcMethod { Auto, ClosedForm, Quadrature };

// Integral of sqrt(p1 p2). Auto uses quadrature for one-dimensional families
// and the closed form exp(A(mid) - A(theta1)/2 - A(theta2)/2) otherwise.
double bhattacharyya(const Family& family, const Vector& theta1, const Vector& theta2,
                     BcMethod method = BcMethod::Auto);

struct NeighborhoodConstants {
  double beta_u = 1.0;
  double beta_l = 1.0;
  double radius = 0.0;
  std::size_t samples_used = 0;
};

// Samples n points tau_star + c u (u uniform on the sphere, c uniform in
// (0, 1/beta_z]) and compares Hessian extremes with those at tau_star.
NeighborhoodConstants neighborhood_constants(const Objective& objective, const FamilyBounds& bounds,
                                             std::size_t n, std::uint64_t seed);

struct AnnulusPoint {
  Vector tau;
  double projected_gradient = 0.0;
};

// |<grad L(tau), (tau_star - tau)/|tau_star - tau|>|
double projected_gradient(const Objective& objective, const Vector& tau);

// Uniform points in {0.1 R <= |tau - tau_star| <= 0.2 R} (1-d Gaussian mean family, R >= 4).
std::vector<AnnulusPoint> annulus_probe(const Objective& objective, double radius, std::size_t n_points,
                                        std::uint64_t seed);

enum class Verdict { Pass, Fail, Skip, Inconclusive };
std::string to_string(Verdict v);

struct Check {
  std::string claim_id;
  std::string anchor;
  double measured = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  Verdict verdict = Verdict::Skip;
  std::string note;
};

struct LandscapeReport {
  std::vector<Check> checks;

  std::size_t count(Verdict v) const;
  bool all_passed() const;  // every non-skipped check passed
  bool inconclusive() const;
  // One line per check: PASS|FAIL|SKIP <claim-id> measured=<v> bound=<b> anchor="..."
  std::string to_text() const;
  std::string to_csv() const;
};

struct CertifySetup {
  Family family = Family::gaussian_mean_1d();
  std::vector<double> radii{4.0, 6.0, 8.0};
  std::vector<LossKind> kinds{LossKind::NCE, LossKind::ENCE};
  std::uint64_t seed = 1;
  std::size_t annulus_points = 50;
  std::size_t neighborhood_samples = 64;
  bool ngd_certificate = true;
  // Test hook: upper bounds are multiplied and lower bounds divided by this.
  double bound_scale = 1.0;
};

LandscapeReport certify(const CertifySetup& setup);

}  // namespace nce
