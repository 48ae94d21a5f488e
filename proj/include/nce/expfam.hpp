#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nce/core.hpp"

namespace nce {

enum class FamilyKind { GaussianMean1D, DiagGaussian };

// Extended exponential-family parameter: natural parameter theta plus a free
// estimate alpha of the log partition function. The stacked form [theta, alpha]
// pairs with the sufficient statistics T(x) = [T~(x), -1].
struct TauParam {
  Vector theta;
  double alpha = 0.0;

  Vector stacked() const;
  static TauParam from_stacked(const Vector& tau);
};

// Location/scale of a Gaussian member, used to place quadrature domains.
struct CenterScale {
  double mean;
  double sd;
};

// A concrete exponential family over R^d.
//
// GaussianMean1D: unit-variance Gaussians indexed by their mean theta, with
//   base measure h(x) = exp(-x^2/2), T~(x) = x and log Z(theta) = theta^2/2 + log sqrt(2 pi).
// DiagGaussian(d): theta = [precisions (d), precision * mean (d)], h = 1,
//   T~(x) = [-x_1^2/2, ..., -x_d^2/2, x_1, ..., x_d].
class Family {
 public:
  static Family gaussian_mean_1d();
  static Family diag_gaussian(int d);

  FamilyKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int natural_dim() const;
  int suff_stat_dim() const { return natural_dim() + 1; }
  std::string name() const;

  // T(x), including the trailing -1 coordinate.
  Vector suff_stats(const Vector& x) const;
  // Rows of `samples` are draws; returns the n x suff_stat_dim() matrix of T(x_i).
  Matrix suff_stats_rows(const Matrix& samples) const;
  double log_base_measure(const Vector& x) const;

  bool is_valid_natural(const Vector& theta) const;
  double log_partition(const Vector& theta) const;
  // Gradient of log Z with respect to theta (the mean of T~).
  Vector log_partition_gradient(const Vector& theta) const;
  // E_theta[T(x)] and E_theta[T(x) T(x)^T] for the normalized member theta.
  Vector mean_suff_stats(const Vector& theta) const;
  Matrix second_moment(const Vector& theta) const;

  // Only meaningful for one-dimensional sample spaces; nullopt when theta
  // does not describe a normalizable density.
  std::optional<CenterScale> center_scale(const Vector& theta) const;

  bool operator==(const Family&) const = default;

 private:
  Family(FamilyKind kind, int dim) : kind_(kind), dim_(dim) {}

  FamilyKind kind_;
  int dim_;
};

// Constants of the regularity assumptions for a set of natural parameters.
struct FamilyBounds {
  double omega = 0.0;       // max ||theta||
  double beta_z = 0.0;      // Lipschitz constant of log Z (max ||grad log Z||)
  double lambda_max = 0.0;  // max sigma_max(E_theta[T T^T])
  double lambda_min = 0.0;  // min sigma_min(E_theta[T T^T])
  double gamma_max = 0.0;   // max ||grad_theta sigma_max(E_theta[T T^T])||
  double gamma_min = 0.0;   // max ||grad_theta sigma_min(E_theta[T T^T])||

  double lambda_ratio() const { return lambda_max / lambda_min; }
};

// Builds tau from mean parameters: GaussianMean1D takes {mean}; DiagGaussian(d)
// takes {mu_1..mu_d, var_1..var_d}. alpha is the exact log partition.
TauParam tau_of_theta(const Family& family, const Vector& mean_params);
// Normalized member from a natural parameter (alpha = log Z(theta)).
TauParam tau_of_natural(const Family& family, const Vector& theta);

Vector suff_stats(const Family& family, const Vector& x);
double log_pdf(const Family& family, const TauParam& tau, const Vector& x);
double log_partition(const Family& family, const Vector& theta);

// n i.i.d. draws (one per row) from the member with natural parameter tau.theta.
Matrix sample(const Family& family, const TauParam& tau, std::size_t n, std::uint64_t seed);

// Evaluates the bounds over an explicit finite set of natural parameters.
// The smoothness constants gamma_* come from central differences of the
// Fisher singular values at each point.
FamilyBounds measure_bounds(const Family& family, std::span<const Vector> thetas);

// Evenly spaced points on the segment [from, to], endpoints included.
std::vector<Vector> segment_points(const Vector& from, const Vector& to, std::size_t count);

}  // namespace nce
