#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "nce/core.hpp"

namespace nce {

struct QuadratureSpec {
  double lower = 0.0;
  double upper = 1.0;
  double rel_tol = 1e-10;
  double abs_tol = 1e-16;
  std::size_t max_subdivisions = 1'000'000;
  // The domain is first cut into this many equal panels so that narrow peaks
  // cannot fall between the nodes of a single wide rule.
  std::size_t initial_panels = 1;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  std::size_t subdivisions = 0;
};

// Raised when the subdivision budget runs out; carries the best estimate.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, QuadratureResult best)
      : std::runtime_error(what), best_(best) {}
  const QuadratureResult& best_estimate() const { return best_; }

 private:
  QuadratureResult best_;
};

// Globally adaptive 15-point Gauss-Kronrod quadrature. Converges when the
// summed panel error estimate is at most max(abs_tol, rel_tol * |result|).
// Panels whose error is already at the rounding level of their own magnitude
// are retired rather than split further.
QuadratureResult integrate_detailed(const std::function<double(double)>& f,
                                    const QuadratureSpec& spec);
double integrate(const std::function<double(double)>& f, const QuadratureSpec& spec);

// log(sum(exp(values))) with the maximum factored out.
double log_sum_exp(std::span<const double> values);

// Numerically stable scalar helpers shared by the objectives.
double softplus(double z);       // log(1 + e^z)
double log_sigmoid(double z);    // log(1 / (1 + e^-z))
double sigmoid(double z);
double log_softplus(double z);   // log(log(1 + e^z)), finite for very negative z
// exp(a) - exp(b), evaluated as exp(max) * (+/-)(1 - exp(min - max)).
double exp_difference(double a, double b);

struct EigenResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // column k pairs with eigenvalues(k)
  std::optional<double> condition_number;  // max/min when min > 0

  double min() const { return eigenvalues(0); }
  double max() const { return eigenvalues(eigenvalues.size() - 1); }
};

// Eigen-decomposition of a symmetric matrix. 2x2 inputs use the closed form,
// larger ones cyclic Jacobi rotations down to a 1e-12 relative off-diagonal
// norm. The input is symmetrized first; asymmetry above 1e-10 (relative) or
// non-finite entries raise DomainError.
EigenResult sym_eigen(const Matrix& m);

// Central differences, one coordinate at a time.
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h);
// Column j holds the central difference of g along coordinate j.
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& x, double h);

}  // namespace nce
