#include "nce/expfam.hpp"

#include <cmath>
#include <numbers>

#include "nce/numerics.hpp"
#include "nce/rng.hpp"

namespace nce {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite entries");
}

}  // namespace

Vector TauParam::stacked() const {
  Vector out(theta.size() + 1);
  out.head(theta.size()) = theta;
  out(theta.size()) = alpha;
  return out;
}

TauParam TauParam::from_stacked(const Vector& tau) {
  if (tau.size() < 2) throw DomainError("TauParam: stacked vector needs at least two entries");
  return TauParam{tau.head(tau.size() - 1), tau(tau.size() - 1)};
}

Family Family::gaussian_mean_1d() { return Family(FamilyKind::GaussianMean1D, 1); }

Family Family::diag_gaussian(int d) {
  if (d < 1) throw DomainError("diag_gaussian: dimension must be positive");
  return Family(FamilyKind::DiagGaussian, d);
}

int Family::natural_dim() const { return kind_ == FamilyKind::GaussianMean1D ? 1 : 2 * dim_; }

std::string Family::name() const {
  if (kind_ == FamilyKind::GaussianMean1D) return "gaussian_mean_1d";
  return "diag_gaussian(" + std::to_string(dim_) + ")";
}

Vector Family::suff_stats(const Vector& x) const {
  if (x.size() != dim_) throw DomainError("suff_stats: sample dimension mismatch");
  Vector t(suff_stat_dim());
  if (kind_ == FamilyKind::GaussianMean1D) {
    t << x(0), -1.0;
    return t;
  }
  for (int i = 0; i < dim_; ++i) {
    t(i) = -0.5 * x(i) * x(i);
    t(dim_ + i) = x(i);
  }
  t(2 * dim_) = -1.0;
  return t;
}

Matrix Family::suff_stats_rows(const Matrix& samples) const {
  if (samples.cols() != dim_) throw DomainError("suff_stats_rows: sample dimension mismatch");
  const Eigen::Index n = samples.rows();
  Matrix out(n, suff_stat_dim());
  if (kind_ == FamilyKind::GaussianMean1D) {
    out.col(0) = samples.col(0);
  } else {
    out.leftCols(dim_) = -0.5 * samples.array().square();
    out.middleCols(dim_, dim_) = samples;
  }
  out.col(suff_stat_dim() - 1).setConstant(-1.0);
  return out;
}

double Family::log_base_measure(const Vector& x) const {
  if (kind_ == FamilyKind::GaussianMean1D) return -0.5 * x(0) * x(0);
  return 0.0;
}

bool Family::is_valid_natural(const Vector& theta) const {
  if (theta.size() != natural_dim() || !theta.allFinite()) return false;
  if (kind_ == FamilyKind::DiagGaussian) return (theta.head(dim_).array() > 0.0).all();
  return true;
}

double Family::log_partition(const Vector& theta) const {
  if (theta.size() != natural_dim()) throw DomainError("log_partition: parameter dimension mismatch");
  if (!is_valid_natural(theta)) throw DomainError("log_partition: precision must be positive");
  if (kind_ == FamilyKind::GaussianMean1D) return 0.5 * theta(0) * theta(0) + kLogSqrt2Pi;
  double total = 0.0;
  for (int i = 0; i < dim_; ++i) {
    const double precision = theta(i);
    const double linear = theta(dim_ + i);
    total += 0.5 * linear * linear / precision + kLogSqrt2Pi - 0.5 * std::log(precision);
  }
  return total;
}

Vector Family::log_partition_gradient(const Vector& theta) const {
  if (!is_valid_natural(theta)) throw DomainError("log_partition_gradient: invalid parameter");
  const Vector mean = mean_suff_stats(theta);
  return mean.head(natural_dim());
}

Vector Family::mean_suff_stats(const Vector& theta) const {
  if (!is_valid_natural(theta)) throw DomainError("mean_suff_stats: invalid parameter");
  Vector m(suff_stat_dim());
  if (kind_ == FamilyKind::GaussianMean1D) {
    m << theta(0), -1.0;
    return m;
  }
  for (int i = 0; i < dim_; ++i) {
    const double var = 1.0 / theta(i);
    const double mu = theta(dim_ + i) * var;
    m(i) = -0.5 * (mu * mu + var);
    m(dim_ + i) = mu;
  }
  m(2 * dim_) = -1.0;
  return m;
}

Matrix Family::second_moment(const Vector& theta) const {
  if (!is_valid_natural(theta)) throw DomainError("second_moment: invalid parameter");
  const int m = suff_stat_dim();
  Matrix f(m, m);
  if (kind_ == FamilyKind::GaussianMean1D) {
    const double t = theta(0);
    f << t * t + 1.0, -t, -t, 1.0;
    return f;
  }
  // Raw moments of each independent coordinate.
  Vector m1(dim_), m2(dim_), m3(dim_), m4(dim_);
  for (int i = 0; i < dim_; ++i) {
    const double v = 1.0 / theta(i);
    const double mu = theta(dim_ + i) * v;
    m1(i) = mu;
    m2(i) = mu * mu + v;
    m3(i) = mu * mu * mu + 3.0 * mu * v;
    m4(i) = mu * mu * mu * mu + 6.0 * mu * mu * v + 3.0 * v * v;
  }
  const int lin = dim_;
  const int last = 2 * dim_;
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < dim_; ++j) {
      // (-x_i^2/2)(-x_j^2/2), (-x_i^2/2)(x_j), (x_i)(x_j)
      f(i, j) = (i == j) ? 0.25 * m4(i) : 0.25 * m2(i) * m2(j);
      f(i, lin + j) = (i == j) ? -0.5 * m3(i) : -0.5 * m2(i) * m1(j);
      f(lin + j, i) = f(i, lin + j);
      f(lin + i, lin + j) = (i == j) ? m2(i) : m1(i) * m1(j);
    }
    f(i, last) = f(last, i) = 0.5 * m2(i);
    f(lin + i, last) = f(last, lin + i) = -m1(i);
  }
  f(last, last) = 1.0;
  return f;
}

std::optional<CenterScale> Family::center_scale(const Vector& theta) const {
  if (dim_ != 1 || !is_valid_natural(theta)) return std::nullopt;
  if (kind_ == FamilyKind::GaussianMean1D) return CenterScale{theta(0), 1.0};
  const double var = 1.0 / theta(0);
  return CenterScale{theta(1) * var, std::sqrt(var)};
}

TauParam tau_of_theta(const Family& family, const Vector& mean_params) {
  require_finite(mean_params, "tau_of_theta");
  if (family.kind() == FamilyKind::GaussianMean1D) {
    if (mean_params.size() != 1) throw DomainError("tau_of_theta: expected one mean");
    return tau_of_natural(family, mean_params);
  }
  const int d = family.dim();
  if (mean_params.size() != 2 * d) throw DomainError("tau_of_theta: expected d means followed by d variances");
  Vector theta(2 * d);
  for (int i = 0; i < d; ++i) {
    const double var = mean_params(d + i);
    if (!(var > 0.0)) throw DomainError("tau_of_theta: variances must be positive");
    theta(i) = 1.0 / var;
    theta(d + i) = mean_params(i) / var;
  }
  return tau_of_natural(family, theta);
}

TauParam tau_of_natural(const Family& family, const Vector& theta) {
  return TauParam{theta, family.log_partition(theta)};
}

Vector suff_stats(const Family& family, const Vector& x) { return family.suff_stats(x); }

double log_pdf(const Family& family, const TauParam& tau, const Vector& x) {
  const Vector t = family.suff_stats(x);
  return family.log_base_measure(x) + tau.stacked().dot(t);
}

double log_partition(const Family& family, const Vector& theta) { return family.log_partition(theta); }

Matrix sample(const Family& family, const TauParam& tau, std::size_t n, std::uint64_t seed) {
  if (!family.is_valid_natural(tau.theta)) throw DomainError("sample: parameter is not a normalizable member");
  const int d = family.dim();
  Matrix out(static_cast<Eigen::Index>(n), d);
  Rng rng(seed);
  Vector mean(d), sd(d);
  if (family.kind() == FamilyKind::GaussianMean1D) {
    mean(0) = tau.theta(0);
    sd(0) = 1.0;
  } else {
    for (int i = 0; i < d; ++i) {
      const double var = 1.0 / tau.theta(i);
      mean(i) = tau.theta(d + i) * var;
      sd(i) = std::sqrt(var);
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (int i = 0; i < d; ++i) out(static_cast<Eigen::Index>(r), i) = mean(i) + sd(i) * rng.normal();
  }
  return out;
}

namespace {

struct FisherExtremes {
  double lo;
  double hi;
};

FisherExtremes fisher_extremes(const Family& family, const Vector& theta) {
  const EigenResult e = sym_eigen(family.second_moment(theta));
  return {e.min(), e.max()};
}

}  // namespace

FamilyBounds measure_bounds(const Family& family, std::span<const Vector> thetas) {
  if (thetas.empty()) throw DomainError("measure_bounds: empty parameter set");
  FamilyBounds b;
  b.lambda_min = std::numeric_limits<double>::infinity();
  for (const Vector& theta : thetas) {
    if (!family.is_valid_natural(theta)) throw DomainError("measure_bounds: invalid parameter in set");
    b.omega = std::max(b.omega, theta.norm());
    b.beta_z = std::max(b.beta_z, family.log_partition_gradient(theta).norm());
    const FisherExtremes ext = fisher_extremes(family, theta);
    b.lambda_max = std::max(b.lambda_max, ext.hi);
    b.lambda_min = std::min(b.lambda_min, ext.lo);

    const double h = 1e-5 * std::max(1.0, theta.norm());
    Vector grad_hi(theta.size()), grad_lo(theta.size());
    Vector probe = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      probe(i) = theta(i) + h;
      const FisherExtremes up = family.is_valid_natural(probe) ? fisher_extremes(family, probe) : ext;
      probe(i) = theta(i) - h;
      const FisherExtremes down = family.is_valid_natural(probe) ? fisher_extremes(family, probe) : ext;
      probe(i) = theta(i);
      grad_hi(i) = (up.hi - down.hi) / (2.0 * h);
      grad_lo(i) = (up.lo - down.lo) / (2.0 * h);
    }
    b.gamma_max = std::max(b.gamma_max, grad_hi.norm());
    b.gamma_min = std::max(b.gamma_min, grad_lo.norm());
  }
  return b;
}

std::vector<Vector> segment_points(const Vector& from, const Vector& to, std::size_t count) {
  if (count < 2) throw DomainError("segment_points: need at least two points");
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(count - 1);
    out.push_back((1.0 - t) * from + t * to);
  }
  return out;
}

}  // namespace nce
