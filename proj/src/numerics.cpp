#include "nce/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace nce {

namespace {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1]; index 0 is the centre.
constexpr std::array<double, 8> kKronrodNodes = {
    0.000000000000000000000000000000000,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
};
constexpr std::array<double, 8> kKronrodWeights = {
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
};
// Gauss weights for the odd-indexed Kronrod nodes (0, 2, 4, 6).
constexpr std::array<double, 4> kGaussWeights = {
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel gauss_kronrod(const std::function<double(double)>& f, double a, double b, bool& at_roundoff) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = kKronrodWeights[0] * fc;
  double gauss = kGaussWeights[0] * fc;
  double magnitude = kKronrodWeights[0] * std::abs(fc);
  for (std::size_t k = 1; k < kKronrodNodes.size(); ++k) {
    const double dx = half * kKronrodNodes[k];
    const double f1 = f(centre - dx);
    const double f2 = f(centre + dx);
    kronrod += kKronrodWeights[k] * (f1 + f2);
    magnitude += kKronrodWeights[k] * (std::abs(f1) + std::abs(f2));
    if (k % 2 == 0) gauss += kGaussWeights[k / 2] * (f1 + f2);
  }
  kronrod *= half;
  gauss *= half;
  magnitude *= std::abs(half);
  const double error = std::abs(kronrod - gauss);
  at_roundoff = error <= 50.0 * std::numeric_limits<double>::epsilon() * magnitude;
  return Panel{a, b, kronrod, error};
}

}  // namespace

QuadratureResult integrate_detailed(const std::function<double(double)>& f,
                                    const QuadratureSpec& spec) {
  if (!(spec.lower < spec.upper)) throw DomainError("integrate: lower bound must be below upper bound");
  if (!(spec.rel_tol > 0.0) || !(spec.abs_tol >= 0.0)) {
    throw DomainError("integrate: tolerances must be positive");
  }
  const std::size_t panels = std::max<std::size_t>(1, spec.initial_panels);
  const double width = (spec.upper - spec.lower) / static_cast<double>(panels);

  std::priority_queue<Panel> open;
  double retired_value = 0.0;
  double retired_error = 0.0;
  double open_value = 0.0;
  double open_error = 0.0;
  QuadratureResult result;

  auto admit = [&](const Panel& p, bool at_roundoff) {
    result.evaluations += 15;
    // Panels this narrow cannot be refined meaningfully in double precision.
    const bool too_narrow = (p.b - p.a) <= 1e-13 * (spec.upper - spec.lower);
    if (at_roundoff || too_narrow) {
      retired_value += p.value;
      retired_error += at_roundoff ? 0.0 : p.error;
    } else {
      open.push(p);
      open_value += p.value;
      open_error += p.error;
    }
  };

  for (std::size_t i = 0; i < panels; ++i) {
    const double a = spec.lower + width * static_cast<double>(i);
    const double b = (i + 1 == panels) ? spec.upper : a + width;
    bool at_roundoff = false;
    const Panel p = gauss_kronrod(f, a, b, at_roundoff);
    admit(p, at_roundoff);
  }

  auto tolerance = [&] {
    return std::max(spec.abs_tol, spec.rel_tol * std::abs(open_value + retired_value));
  };

  std::size_t splits = 0;
  std::size_t since_resum = 0;
  while (!open.empty() && open_error + retired_error > tolerance()) {
    if (splits >= spec.max_subdivisions) {
      result.value = open_value + retired_value;
      result.error = open_error + retired_error;
      result.subdivisions = splits;
      throw QuadratureError("integrate: subdivision budget exhausted before reaching tolerance", result);
    }
    const Panel worst = open.top();
    open.pop();
    open_value -= worst.value;
    open_error -= worst.error;
    const double mid = 0.5 * (worst.a + worst.b);
    bool left_round = false;
    bool right_round = false;
    const Panel left = gauss_kronrod(f, worst.a, mid, left_round);
    const Panel right = gauss_kronrod(f, mid, worst.b, right_round);
    admit(left, left_round);
    admit(right, right_round);
    ++splits;

    // Running sums drift after many add/subtract cycles; rebuild them.
    if (++since_resum == 4096) {
      since_resum = 0;
      std::vector<Panel> all;
      all.reserve(open.size());
      open_value = 0.0;
      open_error = 0.0;
      while (!open.empty()) {
        all.push_back(open.top());
        open.pop();
      }
      for (const Panel& p : all) {
        open_value += p.value;
        open_error += p.error;
        open.push(p);
      }
    }
  }

  // Final sums in a fixed order for reproducibility.
  std::vector<Panel> remaining;
  remaining.reserve(open.size());
  while (!open.empty()) {
    remaining.push_back(open.top());
    open.pop();
  }
  std::sort(remaining.begin(), remaining.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  double value = retired_value;
  double error = retired_error;
  for (const Panel& p : remaining) {
    value += p.value;
    error += p.error;
  }
  result.value = value;
  result.error = error;
  result.subdivisions = splits;
  if (error > std::max(spec.abs_tol, spec.rel_tol * std::abs(value))) {
    throw QuadratureError("integrate: panels at resolution limit before reaching tolerance", result);
  }
  return result;
}

double integrate(const std::function<double(double)>& f, const QuadratureSpec& spec) {
  return integrate_detailed(f, spec).value;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw DomainError("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m)) return m;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - m);
  return m + std::log(sum);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double log_sigmoid(double z) { return -softplus(-z); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_softplus(double z) {
  if (z > 0.0) return std::log(z + std::log1p(std::exp(-z)));
  if (z < -40.0) return z;  // log1p(e^z) = e^z (1 - e^z/2 + ...), rel. error < 1e-17
  return std::log(std::log1p(std::exp(z)));
}

double exp_difference(double a, double b) {
  if (a >= b) return -std::exp(a) * std::expm1(b - a);
  return std::exp(b) * std::expm1(a - b);
}

namespace {

EigenResult closed_form_2x2(const Matrix& m) {
  const double a = m(0, 0);
  const double b = m(0, 1);
  const double d = m(1, 1);
  const double half_trace = 0.5 * (a + d);
  const double half_gap = std::hypot(0.5 * (a - d), b);
  double hi = half_trace + half_gap;
  double lo = half_trace - half_gap;
  // Recover the small eigenvalue from the determinant when the subtraction cancels.
  const double det = a * d - b * b;
  if (hi != 0.0 && std::abs(lo) < 1e-3 * std::abs(hi)) lo = det / hi;
  if (lo > hi) std::swap(lo, hi);

  EigenResult r;
  r.eigenvalues = Vector(2);
  r.eigenvalues << lo, hi;
  r.eigenvectors = Matrix(2, 2);
  // Eigenvector of the larger eigenvalue, chosen from the better-conditioned row.
  Eigen::Vector2d v_hi;
  if (half_gap == 0.0) {
    v_hi << 1.0, 0.0;
  } else if (std::abs(hi - d) >= std::abs(hi - a)) {
    v_hi << hi - d, b;
  } else {
    v_hi << b, hi - a;
  }
  v_hi.normalize();
  r.eigenvectors.col(1) = v_hi;
  r.eigenvectors.col(0) << -v_hi(1), v_hi(0);
  return r;
}

EigenResult cyclic_jacobi(Matrix a) {
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(2.0 * off) <= 1e-12 * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  EigenResult r;
  r.eigenvalues = Vector(n);
  r.eigenvectors = Matrix(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    r.eigenvalues(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    r.eigenvectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return r;
}

}  // namespace

EigenResult sym_eigen(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("sym_eigen: matrix must be square and non-empty");
  if (!m.allFinite()) throw DomainError("sym_eigen: non-finite entries");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double mag = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (asym > 1e-10 * mag) throw DomainError("sym_eigen: matrix is not symmetric");
  const Matrix sym = 0.5 * (m + m.transpose());

  EigenResult r;
  if (sym.rows() == 1) {
    r.eigenvalues = Vector::Constant(1, sym(0, 0));
    r.eigenvectors = Matrix::Identity(1, 1);
  } else if (sym.rows() == 2) {
    r = closed_form_2x2(sym);
  } else {
    r = cyclic_jacobi(sym);
  }
  if (r.min() > 0.0) r.condition_number = r.max() / r.min();
  return r;
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw DomainError("fd_gradient: step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& g, const Vector& x, double h) {
  if (!(h > 0.0)) throw DomainError("fd_jacobian: step must be positive");
  Matrix jac;
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + h;
    const Vector up = g(probe);
    probe(j) = x(j) - h;
    const Vector down = g(probe);
    probe(j) = x(j);
    if (j == 0) jac = Matrix(up.size(), x.size());
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

}  // namespace nce
