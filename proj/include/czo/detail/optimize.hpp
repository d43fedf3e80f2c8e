#pragma once

// Small derivative-free optimizers used by the comparison-family searches.

#include "czo/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace czo::detail {

struct Minimum1D {
  double x;
  double value;
  int evaluations;
};

/// Golden-section search for a minimum of f on [a, b]; stops when the
/// bracket is shorter than tol. Returns the best point evaluated.
inline Minimum1D golden_section_minimize(const std::function<double(double)>& f, double a, double b, double tol) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  Minimum1D best{fc <= fd ? c : d, std::min(fc, fd), 2};
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
      if (fc < best.value) best = {c, fc, best.evaluations};
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
      if (fd < best.value) best = {d, fd, best.evaluations};
    }
    ++best.evaluations;
  }
  return best;
}

struct MinimumND {
  std::vector<double> x;
  double value;
  int evaluations;
};

/// Nelder-Mead with standard coefficients (1, 2, 1/2, 1/2). The initial
/// simplex offsets x0 by step along each coordinate.
inline MinimumND nelder_mead_minimize(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x0, double step, double tol, int max_evaluations) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> val(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  int evals = 0;
  auto eval = [&](const std::vector<double>& p) {
    ++evals;
    return f(p);
  };
  for (std::size_t i = 0; i <= n; ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  auto combine = [&](const std::vector<double>& c, const std::vector<double>& p, double t) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = c[k] + t * (p[k] - c[k]);
    return out;
  };
  while (evals < max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t lo = order.front(), hi = order.back(), second = order[n - 1];
    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) size = std::max(size, std::abs(pts[i][k] - pts[lo][k]));
    if (size < tol) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != hi)
        for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);

    auto refl = combine(centroid, pts[hi], -1.0);
    const double fr = eval(refl);
    if (fr < val[lo]) {
      auto expd = combine(centroid, pts[hi], -2.0);
      const double fe = eval(expd);
      if (fe < fr) {
        pts[hi] = std::move(expd);
        val[hi] = fe;
      } else {
        pts[hi] = std::move(refl);
        val[hi] = fr;
      }
    } else if (fr < val[second]) {
      pts[hi] = std::move(refl);
      val[hi] = fr;
    } else {
      const bool outside = fr < val[hi];
      auto contr = combine(centroid, outside ? refl : pts[hi], 0.5);
      const double fc = eval(contr);
      if (fc < std::min(fr, val[hi])) {
        pts[hi] = std::move(contr);
        val[hi] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == lo) continue;
          pts[i] = combine(pts[lo], pts[i], 0.5);
          val[i] = eval(pts[i]);
        }
      }
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[best], val[best], evals};
}

/// Unit vectors of the frequency-8 geodesic icosahedron, one per antipodal
/// pair: 321 directions covering the projective plane.
inline const std::vector<Point>& projective_sphere_grid() {
  static const std::vector<Point> grid = [] {
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    const std::array<std::array<double, 3>, 12> v{{{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                                    {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                                    {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}}};
    const std::array<std::array<int, 3>, 20> faces{{{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
                                                    {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                                    {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
                                                    {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}}};
    constexpr int freq = 8;
    std::vector<Point> out;
    auto canonical = [](Point p) {
      for (int i = 2; i >= 0; --i) {
        if (p(i) > 1e-12) break;
        if (p(i) < -1e-12) {
          p = -p;
          break;
        }
      }
      return p;
    };
    for (const auto& f : faces) {
      for (int i = 0; i <= freq; ++i) {
        for (int j = 0; i + j <= freq; ++j) {
          const int k = freq - i - j;
          Point p(3);
          for (int c = 0; c < 3; ++c) p(c) = (i * v[f[0]][c] + j * v[f[1]][c] + k * v[f[2]][c]) / freq;
          p = canonical(Point(p / p.norm()));
          const bool seen = std::any_of(out.begin(), out.end(), [&](const Point& q) { return distance(p, q) < 1e-9; });
          if (!seen) out.push_back(p);
        }
      }
    }
    return out;
  }();
  return grid;
}

/// Unit vector with polar angle a (from e3) and azimuth b.
inline Point spherical_direction(double a, double b) {
  Point p(3);
  p << std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a);
  return p;
}

/// Two orthonormal vectors spanning the complement of the unit vector n.
inline std::pair<Point, Point> orthonormal_complement(const Point& n) {
  Point helper = zero_point(3);
  int axis = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n(i)) < std::abs(n(axis))) axis = i;
  helper(axis) = 1.0;
  Point e1 = helper - n.dot(helper) * n;
  e1 /= e1.norm();
  Point e2(3);
  e2 << n(1) * e1(2) - n(2) * e1(1), n(2) * e1(0) - n(0) * e1(2), n(0) * e1(1) - n(1) * e1(0);
  e2 /= e2.norm();
  // Re-orthogonalize so the pair passes a 1e-12 orthonormality check.
  e2 -= e1.dot(e2) * e1;
  e2 /= e2.norm();
  return {e1, e2};
}

}  // namespace czo::detail
