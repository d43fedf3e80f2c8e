#pragma once

// Atomic approximations of Borel measures and the canonical families used to
// probe singular integrals: flat pieces, spikes (equiangular lines through a
// vertex) and the four-corner Cantor set.

#include "czo/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace czo {

struct Atom {
  Point x;
  Complex w;
};

class DiscreteMeasure {
 public:
  /// Validates every invariant; throws InputError on violation.
  DiscreteMeasure(int dim, double s, double resolution, std::vector<Atom> atoms, bool nonneg = true)
      : dim_(dim), s_(s), resolution_(resolution), nonneg_(nonneg), atoms_(std::move(atoms)) {
    if (dim < 1 || dim > kMaxDim)
      throw InputError("ambient dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
    if (!(s > 0.0) || !(s < dim)) throw InputError("dimension parameter s must lie in (0, d)");
    if (!(resolution > 0.0) || !std::isfinite(resolution))
      throw InputError("resolution must be positive and finite");
    for (const Atom& a : atoms_) {
      if (a.x.size() != dim) throw InputError("atom dimension does not match ambient dimension");
      if (!all_finite(a.x) || !std::isfinite(a.w.real()) || !std::isfinite(a.w.imag()))
        throw InputError("atom position and weight must be finite");
      if (nonneg && (a.w.imag() != 0.0 || a.w.real() < 0.0))
        throw InputError("measure tagged non-negative has a weight outside [0, inf)");
    }
  }

  int dim() const noexcept { return dim_; }
  double s() const noexcept { return s_; }
  double resolution() const noexcept { return resolution_; }
  bool nonneg() const noexcept { return nonneg_; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }

  /// Same atoms, reinterpreted with another dimension parameter.
  DiscreteMeasure with_s(double s) const { return {dim_, s, resolution_, atoms_, nonneg_}; }

  Complex total_mass() const {
    Complex m = 0.0;
    for (const Atom& a : atoms_) m += a.w;
    return m;
  }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim_ != b.dim_ || a.s_ != b.s_ || a.resolution_ != b.resolution_ || a.nonneg_ != b.nonneg_ ||
        a.atoms_.size() != b.atoms_.size())
      return false;
    for (std::size_t i = 0; i < a.atoms_.size(); ++i)
      if (a.atoms_[i].w != b.atoms_[i].w || a.atoms_[i].x != b.atoms_[i].x) return false;
    return true;
  }

 private:
  int dim_;
  double s_;
  double resolution_;
  bool nonneg_;
  std::vector<Atom> atoms_;
};

inline DiscreteMeasure empty_measure(int dim, double s, double resolution) {
  return {dim, s, resolution, {}};
}

// ---------------------------------------------------------------------------
// Bump functions

/// The plateau bump phi: 1 on [0, 3], 0 on [4, inf), joined by the quintic
/// smoothstep q(u) = 6u^5 - 15u^4 + 10u^3 evaluated at u = 4 - t.
/// C^2 with Lipschitz constant 15/8.
inline double plateau_bump(double t) {
  if (t <= 3.0) return 1.0;
  if (t >= 4.0) return 0.0;
  const double u = 4.0 - t;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

inline constexpr double kPlateauBumpLipschitz = 15.0 / 8.0;

/// Radial ramp eta_{kappa,r}: 1 on [0, r], linear down to 0 on [r, (1+kappa) r].
/// Lipschitz constant exactly 1 / (kappa r).
inline double ramp_cutoff(double dist, double r, double kappa) {
  if (dist <= r) return 1.0;
  const double outer = (1.0 + kappa) * r;
  if (dist >= outer) return 0.0;
  return (outer - dist) / (kappa * r);
}

// ---------------------------------------------------------------------------
// Generators

namespace detail {

inline long grid_half_count(double extent, double h) {
  return static_cast<long>(std::floor(extent / h + 1e-9));
}

inline void check_orthonormal(std::span<const Point> basis, int dim) {
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i].size() != dim) throw InputError("basis vector dimension mismatch");
    for (std::size_t j = i; j < basis.size(); ++j) {
      const double expect = i == j ? 1.0 : 0.0;
      if (std::abs(basis[i].dot(basis[j]) - expect) > 1e-12) throw InputError("basis is not orthonormal");
    }
  }
}

}  // namespace detail

/// Uniform grid t = k h, |t| <= extent, on each of the s orthonormal basis
/// directions through base; every atom carries weight h^s.
inline DiscreteMeasure make_plane_measure(const Point& base, std::span<const Point> basis, double extent,
                                          double h) {
  const int dim = static_cast<int>(base.size());
  const int s = static_cast<int>(basis.size());
  if (s != 1 && s != 2) throw InputError("plane measures support s in {1, 2}");
  if (!(h > 0.0) || !(extent > 0.0)) throw InputError("extent and spacing must be positive");
  detail::check_orthonormal(basis, dim);
  const long K = detail::grid_half_count(extent, h);
  const double w = std::pow(h, s);
  std::vector<Atom> atoms;
  if (s == 1) {
    atoms.reserve(2 * K + 1);
    for (long k = -K; k <= K; ++k) atoms.push_back({base + (static_cast<double>(k) * h) * basis[0], w});
  } else {
    atoms.reserve((2 * K + 1) * (2 * K + 1));
    for (long a = -K; a <= K; ++a)
      for (long b = -K; b <= K; ++b)
        atoms.push_back({base + (static_cast<double>(a) * h) * basis[0] + (static_cast<double>(b) * h) * basis[1], w});
  }
  return {dim, static_cast<double>(s), h, std::move(atoms)};
}

inline DiscreteMeasure make_segment_measure(const Point& center, const Point& direction, double half_length,
                                            double h) {
  if (!(h > 0.0) || !(half_length > 0.0)) throw InputError("half_length and spacing must be positive");
  if (std::abs(direction.norm() - 1.0) > 1e-12) throw InputError("segment direction must be a unit vector");
  const Point basis[1] = {direction};
  return make_plane_measure(center, basis, half_length, h);
}

struct SpikeParams {
  int k = 1;
  int m = 1;
  double angle = 0.0;
  Point vertex = zero_point(2);
  double scale = 1.0;

  void validate() const {
    if (k < 1 || k % 2 == 0) throw InputError("spike order k must be odd and >= 1");
    if (m < 1 || k % m != 0) throw InputError("spike multiplicity m must divide k");
    if (!(angle >= 0.0) || !(angle < std::numbers::pi)) throw InputError("spike angle must lie in [0, pi)");
    if (vertex.size() != 2) throw InputError("spike vertex must be planar");
    if (!(scale >= 0.0)) throw InputError("spike scale must be non-negative");
  }
};

/// m full lines through the vertex at angles angle + pi n / m, each a grid of
/// spacing h out to +-extent with weight scale*h. The m atoms sitting on the
/// vertex are merged into one atom carrying their summed weight.
inline DiscreteMeasure make_spike_measure(const SpikeParams& p, double extent, double h) {
  p.validate();
  if (!(h > 0.0) || !(extent > 0.0)) throw InputError("extent and spacing must be positive");
  const long K = detail::grid_half_count(extent, h);
  const double w = p.scale * h;
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(p.m) * 2 * K + 1);
  atoms.push_back({p.vertex, static_cast<double>(p.m) * w});
  for (int n = 0; n < p.m; ++n) {
    const double a = p.angle + std::numbers::pi * n / p.m;
    const Point e = make_point({std::cos(a), std::sin(a)});
    for (long k = -K; k <= K; ++k) {
      if (k == 0) continue;
      Point x = p.vertex + (static_cast<double>(k) * h) * e;
      if (distance(x, p.vertex) < 0.5 * h) {
        atoms.front().w += w;
        continue;
      }
      atoms.push_back({std::move(x), w});
    }
  }
  return {2, 1.0, h, std::move(atoms)};
}

/// Four-corner Cantor set in [0, side]^2: every generation keeps the four
/// corner squares of a quarter of the side. Atoms sit at the centers of the
/// generation-`level` squares.
inline DiscreteMeasure make_cantor4_measure(int level, double side) {
  if (level < 1 || level > 10) throw InputError("cantor level must lie in [1, 10]");
  if (!(side > 0.0)) throw InputError("cantor side must be positive");
  std::vector<std::pair<double, double>> corners{{0.0, 0.0}};
  double len = side;
  for (int l = 0; l < level; ++l) {
    const double step = 0.75 * len;
    std::vector<std::pair<double, double>> next;
    next.reserve(corners.size() * 4);
    for (auto [x, y] : corners) {
      next.emplace_back(x, y);
      next.emplace_back(x + step, y);
      next.emplace_back(x, y + step);
      next.emplace_back(x + step, y + step);
    }
    corners = std::move(next);
    len *= 0.25;
  }
  const double w = side * std::pow(0.25, level);
  std::vector<Atom> atoms;
  atoms.reserve(corners.size());
  for (auto [x, y] : corners) atoms.push_back({make_point({x + 0.5 * len, y + 0.5 * len}), w});
  return {2, 1.0, len, std::move(atoms)};
}

// ---------------------------------------------------------------------------
// Masses and densities

inline Complex ball_mass(const DiscreteMeasure& mu, const Ball& b) {
  Complex m = 0.0;
  for (const Atom& a : mu.atoms())
    if (distance(a.x, b.center()) < b.radius()) m += a.w;
  return m;
}

/// |mu|(B), the total variation mass of an open ball.
inline double variation_mass(const DiscreteMeasure& mu, const Ball& b) {
  double m = 0.0;
  for (const Atom& a : mu.atoms())
    if (distance(a.x, b.center()) < b.radius()) m += std::abs(a.w);
  return m;
}

/// |mu| of the annulus {inner <= |y - center| < outer}.
inline double annulus_variation_mass(const DiscreteMeasure& mu, const Point& center, double inner, double outer) {
  double m = 0.0;
  for (const Atom& a : mu.atoms()) {
    const double d = distance(a.x, center);
    if (d >= inner && d < outer) m += std::abs(a.w);
  }
  return m;
}

/// D_mu(B) = mu(B) / r^s.
inline Complex density(const DiscreteMeasure& mu, const Ball& b) {
  return ball_mass(mu, b) / std::pow(b.radius(), mu.s());
}

/// I_mu(B(x, r)) = sum_i w_i phi(|x_i - x| / r).
inline Complex smoothed_mass(const DiscreteMeasure& mu, const Ball& b) {
  Complex m = 0.0;
  for (const Atom& a : mu.atoms()) {
    const double phi = plateau_bump(distance(a.x, b.center()) / b.radius());
    if (phi > 0.0) m += phi * a.w;
  }
  return m;
}

struct GrowthSup {
  double value = 0.0;
  Ball witness;
};

/// sup of |mu|(B(x, r)) / r^s over atom centers and r in [r_min, r_max].
/// The ratio decreases between breakpoints, so the supremum is found at
/// r_min or just above an atom distance d; for the latter the value is the
/// right limit (atoms at distance d counted) and the witness radius is d.
inline GrowthSup growth_ratio_sup(const DiscreteMeasure& mu, double r_min, double r_max) {
  if (r_min < mu.resolution()) throw InputError("r_min lies below the measure resolution");
  if (!(r_max >= r_min)) throw InputError("r_max must be at least r_min");
  const double s = mu.s();
  GrowthSup best{0.0, Ball(mu.empty() ? zero_point(mu.dim()) : mu.atoms()[0].x, r_min)};
  std::vector<std::pair<double, double>> dist_mass(mu.size());
  for (const Atom& c : mu.atoms()) {
    for (std::size_t i = 0; i < mu.size(); ++i)
      dist_mass[i] = {distance(mu.atoms()[i].x, c.x), std::abs(mu.atoms()[i].w)};
    std::sort(dist_mass.begin(), dist_mass.end());
    double mass = 0.0;
    std::size_t i = 0;
    for (; i < dist_mass.size() && dist_mass[i].first < r_min; ++i) mass += dist_mass[i].second;
    if (const double v = mass / std::pow(r_min, s); v > best.value) best = {v, Ball(c.x, r_min)};
    while (i < dist_mass.size() && dist_mass[i].first < r_max) {
      const double d = dist_mass[i].first;
      for (; i < dist_mass.size() && dist_mass[i].first == d; ++i) mass += dist_mass[i].second;
      if (const double v = mass / std::pow(d, s); v > best.value) best = {v, Ball(c.x, d)};
    }
  }
  return best;
}

/// mu_{x,r} = mu(r . + x) / r^s.
inline DiscreteMeasure rescale(const DiscreteMeasure& mu, const Point& x, double r) {
  if (!(r > 0.0)) throw InputError("rescale radius must be positive");
  const double scale = std::pow(r, mu.s());
  std::vector<Atom> atoms;
  atoms.reserve(mu.size());
  for (const Atom& a : mu.atoms()) atoms.push_back({(a.x - x) / r, a.w / scale});
  return {mu.dim(), mu.s(), mu.resolution() / r, std::move(atoms), mu.nonneg()};
}

}  // namespace czo
