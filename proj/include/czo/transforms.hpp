#pragma once

// Truncated and smoothly truncated singular integrals of atomic measures,
// their principal-value traces, ball averages and the David-Mattila bound.
// Everything is generic over the kernel's value type (Complex or CVector).

#include "czo/detail/format.hpp"
#include "czo/kernels.hpp"
#include "czo/measures.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace czo {

/// T_r(sigma)(x): sum over atoms with |x - p| >= r of w K(x - p).
template <class Kernel>
typename Kernel::value_type truncated_transform(const DiscreteMeasure& sigma, const Kernel& k, const Point& x,
                                                double r) {
  if (!(r > 0.0)) throw InputError("truncation radius must be positive");
  auto acc = k.zero();
  for (const Atom& a : sigma.atoms())
    if (distance(x, a.x) >= r) acc += a.w * k(Point(x - a.x));
  return acc;
}

/// T([1 - eta_{kappa,r,x}] sigma)(x) with the linear ramp eta.
template <class Kernel>
typename Kernel::value_type smooth_truncated_transform(const DiscreteMeasure& sigma, const Kernel& k, const Point& x,
                                                       double r, double kappa) {
  if (!(r > 0.0)) throw InputError("truncation radius must be positive");
  if (!(kappa > 0.0) || kappa > 1.0) throw InputError("kappa must lie in (0, 1]");
  auto acc = k.zero();
  for (const Atom& a : sigma.atoms()) {
    const double weight = 1.0 - ramp_cutoff(distance(x, a.x), r, kappa);
    if (weight > 0.0) acc += (weight * a.w) * k(Point(x - a.x));
  }
  return acc;
}

/// The full transform at a point off the support.
template <class Kernel>
typename Kernel::value_type full_transform(const DiscreteMeasure& sigma, const Kernel& k, const Point& x) {
  auto acc = k.zero();
  for (const Atom& a : sigma.atoms()) {
    if (a.x == x) throw DomainError("full transform evaluated on an atom");
    acc += a.w * k(Point(x - a.x));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Principal-value traces

enum class Verdict { converged, oscillating, indeterminate };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::converged: return "converged";
    case Verdict::oscillating: return "oscillating";
    default: return "indeterminate";
  }
}

template <class Value>
struct TransformTrace {
  Point point;
  std::vector<double> radii;  ///< strictly decreasing
  std::vector<Value> values;
  std::vector<double> cumulative_oscillation;  ///< max pairwise distance of values[0..j]
  double tail_oscillation = 0.0;
  int tail_alternations = 0;
  Verdict verdict = Verdict::indeterminate;
  std::optional<Value> limit;  ///< set when converged

  /// Columns r, value components, cumulative_oscillation.
  std::string to_csv() const {
    bool complex_valued = false;
    for (const auto& v : values)
      for (const Complex& c : components(v)) complex_valued = complex_valued || c.imag() != 0.0;
    const std::size_t ncomp = values.empty() ? components(Value{}).size() : components(values.front()).size();
    std::string out = "r";
    if constexpr (std::is_same_v<Value, Complex>) {
      out += ",value_re,value_im";
    } else {
      for (std::size_t i = 1; i <= ncomp; ++i) out += ",value_x" + std::to_string(i);
      if (complex_valued)
        for (std::size_t i = 1; i <= ncomp; ++i) out += ",value_x" + std::to_string(i) + "_im";
    }
    out += ",cumulative_oscillation\n";
    for (std::size_t j = 0; j < radii.size(); ++j) {
      out += detail::format_double(radii[j]);
      const auto comps = components(values[j]);
      if constexpr (std::is_same_v<Value, Complex>) {
        out += ',' + detail::format_double(comps[0].real()) + ',' + detail::format_double(comps[0].imag());
      } else {
        for (const Complex& c : comps) out += ',' + detail::format_double(c.real());
        if (complex_valued)
          for (const Complex& c : comps) out += ',' + detail::format_double(c.imag());
      }
      out += ',' + detail::format_double(cumulative_oscillation[j]) + '\n';
    }
    return out;
  }
};

namespace detail {

/// Atom distances from x sorted descending, paired with the contributions
/// w K(x - p); atoms sitting at x are skipped (they never contribute for r > 0).
template <class Kernel>
std::vector<std::pair<double, typename Kernel::value_type>> sorted_contributions(const DiscreteMeasure& mu,
                                                                                const Kernel& k, const Point& x) {
  std::vector<std::pair<double, typename Kernel::value_type>> out;
  out.reserve(mu.size());
  for (const Atom& a : mu.atoms()) {
    const double d = distance(x, a.x);
    if (d == 0.0) continue;
    out.emplace_back(d, a.w * k(Point(x - a.x)));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return out;
}

}  // namespace detail

/// T_{r_j}(mu)(x) for r_j = r_max rho^j, j = 0..N-1, where N is the largest
/// count with r_max rho^{N-1} >= 2 resolution.
template <class Kernel>
TransformTrace<typename Kernel::value_type> transform_trace(const DiscreteMeasure& mu, const Kernel& k,
                                                           const Point& x, double r_max, double rho,
                                                           int tail_window, double tol) {
  using V = typename Kernel::value_type;
  if (!(rho > 0.0) || !(rho < 1.0)) throw InputError("trace ratio must lie in (0, 1)");
  if (tail_window < 2) throw InputError("tail_window must be at least 2");
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  const double floor = 2.0 * mu.resolution();
  if (!(r_max >= floor)) throw InputError("r_max lies below the resolution floor");

  TransformTrace<V> tr;
  tr.point = x;
  for (double r = r_max; r >= floor; r *= rho) tr.radii.push_back(r);
  if (static_cast<int>(tr.radii.size()) < tail_window)
    throw InputError("trace has " + std::to_string(tr.radii.size()) + " radii, fewer than tail_window");

  const auto contrib = detail::sorted_contributions(mu, k, x);
  V acc = k.zero();
  std::size_t next = 0;
  for (double r : tr.radii) {
    for (; next < contrib.size() && contrib[next].first >= r; ++next) acc += contrib[next].second;
    tr.values.push_back(acc);
  }

  double running = 0.0;
  for (std::size_t j = 0; j < tr.values.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) running = std::max(running, magnitude(V(tr.values[j] - tr.values[i])));
    tr.cumulative_oscillation.push_back(running);
  }

  const std::size_t n = tr.values.size(), w = static_cast<std::size_t>(tail_window);
  for (std::size_t i = n - w; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      tr.tail_oscillation = std::max(tr.tail_oscillation, magnitude(V(tr.values[j] - tr.values[i])));
  for (std::size_t j = n - w; j + 2 < n; ++j) {
    const V d0 = tr.values[j + 1] - tr.values[j];
    const V d1 = tr.values[j + 2] - tr.values[j + 1];
    if (real_dot(d0, d1) < 0.0) ++tr.tail_alternations;
  }
  if (tr.tail_oscillation < tol) {
    tr.verdict = Verdict::converged;
    tr.limit = tr.values.back();
  } else if (tr.tail_oscillation > 10.0 * tol && tr.tail_alternations >= tail_window / 2) {
    tr.verdict = Verdict::oscillating;
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Ball averages

/// (1 / mu(B)) sum_{y_i in B} w_i sum_{y_j not in B} w_j K(y_i - y_j).
template <class Kernel>
typename Kernel::value_type ball_average_transform(const DiscreteMeasure& mu, const Kernel& k, const Ball& b) {
  std::vector<const Atom*> in, out;
  Complex mass = 0.0;
  for (const Atom& a : mu.atoms()) {
    if (b.contains(a.x)) {
      in.push_back(&a);
      mass += a.w;
    } else {
      out.push_back(&a);
    }
  }
  if (mass == 0.0) throw UndefinedAverageError("ball average over a ball of zero mass");
  auto acc = k.zero();
  for (const Atom* yi : in) {
    auto inner = k.zero();
    for (const Atom* yj : out) inner += yj->w * k(Point(yi->x - yj->x));
    acc += yi->w * inner;
  }
  return acc / mass;
}

inline constexpr int kDoubleAverageNodes = 33;

/// Midpoint rule over Q in [4, 8] with 33 nodes, shared by the numerator and
/// sigma = int mu(B(x~, Q R r0)) dQ so that the quadrature weights cancel.
template <class Kernel>
typename Kernel::value_type double_average(const DiscreteMeasure& mu, const Kernel& k, const Point& center, double R,
                                           double r0) {
  if (r0 < 2.0 * mu.resolution()) throw InputError("r0 lies below the resolution floor");
  if (!(R > 0.0)) throw InputError("R must be positive");
  auto num = k.zero();
  Complex sigma = 0.0;
  for (int q = 0; q < kDoubleAverageNodes; ++q) {
    const double Q = 4.0 + 4.0 * (q + 0.5) / kDoubleAverageNodes;
    const Ball b(center, Q * R * r0);
    std::vector<const Atom*> in, out;
    for (const Atom& a : mu.atoms()) (b.contains(a.x) ? in : out).push_back(&a);
    for (const Atom* yi : in) {
      sigma += yi->w;
      auto inner = k.zero();
      for (const Atom* yj : out) inner += yj->w * k(Point(yi->x - yj->x));
      num += yi->w * inner;
    }
  }
  if (sigma == 0.0) throw UndefinedAverageError("double average over balls of zero mass");
  return num / sigma;
}

// ---------------------------------------------------------------------------
// David-Mattila telescoping

struct DavidMattilaPair {
  double lhs = 0.0;  ///< |T_r(mu)(x) - T_{A^{-L} r}(mu)(x)|
  double rhs = 0.0;  ///< C_K sum_{k=1}^{L} |mu|(B(x, A^{-(k-1)} r)) / (A^{-k} r)^s
  /// C_K A^{s+1} / (A - 1) |mu|(B(x, r)) / r^s; dominates rhs under the hypothesis.
  double explicit_bound = 0.0;
  bool hypothesis_holds = true;
  int first_violation = -1;  ///< smallest failing level, -1 when clean
};

template <class Kernel>
DavidMattilaPair david_mattila_pair(const DiscreteMeasure& mu, const Kernel& k, const Point& x, double r, double A,
                                    int L) {
  if (!(A > 1.0)) throw InputError("A must exceed 1");
  if (L < 1) throw InputError("L must be at least 1");
  if (!(r > 0.0)) throw InputError("radius must be positive");
  const double s = mu.s();
  auto radius = [&](int l) { return r * std::pow(A, -l); };
  auto dens = [&](int l) { return variation_mass(mu, Ball(x, radius(l))) / std::pow(radius(l), s); };

  DavidMattilaPair out;
  using V = typename Kernel::value_type;
  out.lhs = magnitude(V(truncated_transform(mu, k, x, r) - truncated_transform(mu, k, x, radius(L))));
  for (int j = 1; j <= L; ++j)
    out.rhs += k.c_k() * variation_mass(mu, Ball(x, radius(j - 1))) / std::pow(radius(j), s);
  out.explicit_bound = k.c_k() * std::pow(A, s + 1.0) / (A - 1.0) * dens(0);
  for (int l = 0; l <= L - 2; ++l)
    if (dens(l + 1) > dens(l) / A) {
      out.hypothesis_holds = false;
      out.first_violation = l;
      break;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Maximal transform

/// max |T_r(mu)(x)| over r in [min grid, max grid]. T_r is constant between
/// atom distances, so evaluating at r_min and at every breakpoint in range
/// is exact; the grid radii themselves are included as well.
template <class Kernel>
double maximal_transform(const DiscreteMeasure& mu, const Kernel& k, const Point& x, std::span<const double> r_grid) {
  if (r_grid.empty()) throw InputError("radius grid is empty");
  const auto [lo_it, hi_it] = std::minmax_element(r_grid.begin(), r_grid.end());
  const double r_min = *lo_it, r_max = *hi_it;
  if (r_min < 2.0 * mu.resolution()) throw InputError("radius grid reaches below the resolution floor");
  const auto contrib = detail::sorted_contributions(mu, k, x);
  std::vector<double> radii(r_grid.begin(), r_grid.end());
  for (const auto& c : contrib)
    if (c.first >= r_min && c.first <= r_max) radii.push_back(c.first);
  std::sort(radii.begin(), radii.end(), std::greater<>());
  using V = typename Kernel::value_type;
  V acc = k.zero();
  std::size_t next = 0;
  double best = 0.0;
  for (double r : radii) {
    for (; next < contrib.size() && contrib[next].first >= r; ++next) acc += contrib[next].second;
    best = std::max(best, magnitude(acc));
  }
  return best;
}

// ---------------------------------------------------------------------------
// L^2(mu) operator norm of the truncated operator

struct OperatorNorm {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;  ///< false: iteration budget exhausted, value is the best estimate
};

/// Largest singular value of G[i, j] = sqrt(w_i) K(p_i - p_j) 1{|p_i - p_j| > eps} sqrt(w_j),
/// with vector kernels stacked component-wise, by power iteration on G^* G.
template <class Kernel>
OperatorNorm l2_operator_norm(const DiscreteMeasure& mu, const Kernel& k, double eps, int iters,
                              std::uint64_t seed) {
  if (!mu.nonneg()) throw InputError("operator norm requires a non-negative measure");
  if (eps < 2.0 * mu.resolution()) throw InputError("eps lies below the resolution floor");
  if (iters < 1) throw InputError("iters must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(mu.size());
  OperatorNorm out;
  if (n == 0) return out;
  const int ncomp = static_cast<int>(components(k.zero()).size());
  std::vector<Eigen::MatrixXcd> G(ncomp, Eigen::MatrixXcd::Zero(n, n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Atom& a = mu.atoms()[i];
      const Atom& b = mu.atoms()[j];
      if (!(distance(a.x, b.x) > eps)) continue;
      const double sw = std::sqrt(a.w.real() * b.w.real());
      const auto comps = components(k(Point(a.x - b.x)));
      for (int c = 0; c < ncomp; ++c) G[c](i, j) = sw * comps[c];
    }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(gauss(rng), gauss(rng));
  v.normalize();
  double lambda = 0.0;
  out.converged = false;
  for (int it = 1; it <= iters; ++it) {
    Eigen::VectorXcd w = Eigen::VectorXcd::Zero(n);
    for (const auto& g : G) w += g.adjoint() * (g * v);
    const double next = w.norm();
    out.iterations = it;
    if (next == 0.0) {
      lambda = 0.0;
      out.converged = true;
      break;
    }
    v = w / next;
    if (it > 1 && std::abs(next - lambda) <= 1e-8 * next) {
      lambda = next;
      out.converged = true;
      break;
    }
    lambda = next;
  }
  out.value = std::sqrt(lambda);
  return out;
}

// ---------------------------------------------------------------------------
// Point comparison

struct PointComparison {
  double lhs = 0.0;            ///< |T(sigma)(x) - T(sigma)(x')|
  double rhs = 0.0;            ///< sum_j |w_j| C_smooth |x - x'| / |x - y_j|^{s+1}
  double growth_bound = 0.0;   ///< C_smooth (s+1) |x - x'| / dist(x, supp) * sup_r |sigma|(B(x,r)) / r^s
  double support_distance = 0.0;
};

template <class Kernel>
PointComparison point_comparison(const DiscreteMeasure& sigma, const Kernel& k, const Point& x, const Point& xp) {
  const double s = k.s();
  double dist = std::numeric_limits<double>::infinity();
  for (const Atom& a : sigma.atoms())
    if (a.w != 0.0) dist = std::min(dist, distance(x, a.x));
  const double step = distance(x, xp);
  if (!(step <= 0.5 * dist)) throw InputError("|x - x'| must not exceed half the distance to the support");

  PointComparison out;
  out.support_distance = dist;
  using V = typename Kernel::value_type;
  V diff = k.zero();
  std::vector<std::pair<double, double>> dm;
  for (const Atom& a : sigma.atoms()) {
    if (a.w == 0.0) continue;
    const double d = distance(x, a.x);
    diff += a.w * V(k(Point(x - a.x)) - k(Point(xp - a.x)));
    out.rhs += std::abs(a.w) * k.c_smooth() * step / std::pow(d, s + 1.0);
    dm.emplace_back(d, std::abs(a.w));
  }
  out.lhs = magnitude(diff);
  // sup over r of |sigma|(B(x, r)) / r^s is attained just above an atom distance.
  std::sort(dm.begin(), dm.end());
  double mass = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < dm.size();) {
    const double d = dm[i].first;
    for (; i < dm.size() && dm[i].first == d; ++i) mass += dm[i].second;
    sup = std::max(sup, mass / std::pow(d, s));
  }
  if (std::isfinite(dist)) out.growth_bound = k.c_smooth() * (s + 1.0) * step / dist * sup;
  return out;
}

// ---------------------------------------------------------------------------
// Bounded Lipschitz assembly F(y) = K(x - y) psi(|x - y|)

struct CutoffKernelCheck {
  double sup_value = 0.0;      ///< sampled sup |F|
  double sup_bound = 0.0;      ///< C_K ||psi||_inf / a^s
  double lip_value = 0.0;      ///< sampled sup |F(y) - F(y')| / |y - y'|
  double lip_bound = 0.0;      ///< max(6 C_K, C_smooth 1.5^{s+1}) ||psi||_inf / a^{s+1} + C_K Lip(psi) / a^s
};

/// Samples F for psi vanishing on [0, a), with the supplied sup and
/// Lipschitz constants. Points y are drawn with |x - y| uniform in
/// [0, span_factor a] and partners y' within a / 2 of y.
template <class Kernel, class Psi>
CutoffKernelCheck cutoff_kernel_check(const Kernel& k, const Psi& psi, double a, double psi_sup, double psi_lip,
                                      std::size_t samples, std::uint64_t seed, double span_factor = 4.0) {
  if (!(a > 0.0)) throw InputError("vanishing radius must be positive");
  const int d = k.dim();
  const double s = k.s();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto direction = [&] {
    Point v(d);
    do {
      for (int i = 0; i < d; ++i) v(i) = gauss(rng);
    } while (v.norm() == 0.0);
    return Point(v / v.norm());
  };
  const Point x = zero_point(d);
  using V = typename Kernel::value_type;
  auto F = [&](const Point& y) -> V {
    const double t = distance(x, y);
    const double p = psi(t);
    if (p == 0.0) return k.zero();
    return V(p * k(Point(x - y)));
  };
  CutoffKernelCheck out;
  out.sup_bound = k.c_k() * psi_sup / std::pow(a, s);
  out.lip_bound = std::max(6.0 * k.c_k(), k.c_smooth() * std::pow(1.5, s + 1.0)) * psi_sup / std::pow(a, s + 1.0) +
                  k.c_k() * psi_lip / std::pow(a, s);
  for (std::size_t n = 0; n < samples; ++n) {
    const Point y = (span_factor * a * unit(rng)) * direction();
    const V fy = F(y);
    out.sup_value = std::max(out.sup_value, magnitude(fy));
    const double step = 0.5 * a * (1.0 - unit(rng));
    if (step == 0.0) continue;
    const Point yp = y + step * direction();
    out.lip_value = std::max(out.lip_value, magnitude(V(F(yp) - fy)) / step);
  }
  return out;
}

}  // namespace czo
