#pragma once

// Symmetric points, reflection symmetry in balls, the small-boundaries
// constant and the nearby-reflection-point alternative.

#include "czo/kernels.hpp"
#include "czo/lipschitz_dual.hpp"
#include "czo/measures.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace czo {

struct SymmetryReport {
  double max_defect = 0.0;
  std::vector<std::pair<double, double>> defect_by_radius;  ///< (r, |S(r)|), r ascending
  double tolerance = 0.0;
  bool admissible = true;  ///< max_defect <= tolerance

  nlohmann::json to_json() const {
    nlohmann::json profile = nlohmann::json::array();
    for (auto [r, d] : defect_by_radius) profile.push_back({r, d});
    return {{"max_defect", max_defect}, {"tolerance", tolerance}, {"admissible", admissible},
            {"defect_by_radius", profile}};
  }
};

/// max over r <= r_max of |sum_{|x - p| < r} w K(x - p) |x - p|^s|. The sum
/// is constant on (d_j, d_{j+1}], so the distinct atom distances below r_max
/// and r_max itself are the only radii examined. Atoms at x contribute 0.
/// The default tolerance is 10 resolution r_max^{s-1}.
template <class Kernel>
SymmetryReport symmetric_point_defect(const DiscreteMeasure& nu, const Kernel& k, const Point& x, double r_max,
                                      std::optional<double> tolerance = std::nullopt) {
  if (!(r_max > 0.0)) throw InputError("r_max must be positive");
  const double s = k.s();
  using V = typename Kernel::value_type;
  std::vector<std::pair<double, V>> terms;
  for (const Atom& a : nu.atoms()) {
    const double d = distance(x, a.x);
    if (d == 0.0 || d >= r_max) continue;
    terms.emplace_back(d, V((a.w * std::pow(d, s)) * k(Point(x - a.x))));
  }
  std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  SymmetryReport rep;
  rep.tolerance = tolerance.value_or(10.0 * nu.resolution() * std::pow(r_max, s - 1.0));
  V acc = k.zero();
  std::size_t i = 0;
  auto record = [&](double r) {
    const double d = magnitude(acc);
    rep.defect_by_radius.emplace_back(r, d);
    rep.max_defect = std::max(rep.max_defect, d);
  };
  while (i < terms.size()) {
    const double d = terms[i].first;
    record(d);
    for (; i < terms.size() && terms[i].first == d; ++i) acc += terms[i].second;
  }
  record(r_max);
  rep.admissible = rep.max_defect <= rep.tolerance;
  return rep;
}

/// Tags nu as a candidate for alpha_general at B(x, r), recording the
/// symmetric-point defect over B(x, 4r).
template <class Kernel>
Candidate make_candidate(DiscreteMeasure nu, const Kernel& k, const Point& x, double r, std::string label) {
  const double defect = nu.empty() ? 0.0 : symmetric_point_defect(nu, k, x, 4.0 * r).max_defect;
  return {std::move(nu), defect, std::move(label)};
}

namespace detail {

/// Coefficients of (nu - nu(2z - .)) restricted to B, weighted by phi as in alpha.
inline std::vector<LpCoefficient> reflection_coefficients(const DiscreteMeasure& nu, const Point& z, const Ball& b) {
  const double scale = std::pow(b.radius(), nu.s());
  std::vector<LpCoefficient> coeffs;
  for (const Atom& a : nu.atoms()) {
    if (a.w == 0.0) continue;
    if (b.contains(a.x)) {
      const double phi = plateau_bump(distance(a.x, b.center()) / b.radius());
      coeffs.push_back({a.x, phi * a.w / scale});
    }
    const Point y = 2.0 * z - a.x;
    if (b.contains(y)) {
      const double phi = plateau_bump(distance(y, b.center()) / b.radius());
      coeffs.push_back({y, -phi * a.w / scale});
    }
  }
  return coeffs;
}

/// Lower bound on the dual value from the feasible test function
/// clamp(<y - z, e> / r, -b(y), b(y)) with e along the first moment.
inline double reflection_lower_bound(std::span<const LpCoefficient> coeffs, const Point& z, const Ball& b) {
  CVector moment = CVector::Zero(z.size());
  for (const auto& c : coeffs) moment += c.c * to_complex(Point(c.x - z));
  const Eigen::VectorXd re = moment.real(), im = moment.imag();
  double best = 0.0;
  for (const Eigen::VectorXd& dir : {re, im}) {
    if (dir.norm() == 0.0) continue;
    const Point e = dir / dir.norm();
    Complex acc = 0.0;
    for (const auto& c : coeffs) {
      const double bound = std::max(0.0, 4.0 * b.radius() - distance(c.x, b.center())) / b.radius();
      acc += c.c * std::clamp((c.x - z).dot(e) / b.radius(), -bound, bound);
    }
    best = std::max(best, std::abs(acc));
  }
  return best;
}

}  // namespace detail

/// Lipschitz-dual distance between nu|_B and its reflection through z
/// restricted to B, in the metric of alpha with radius B.radius.
inline double reflection_defect(const DiscreteMeasure& nu, const Point& z, const Ball& b) {
  if (nu.dim() != b.dim() || z.size() != b.dim()) throw InputError("reflection dimensions differ");
  const auto coeffs = detail::reflection_coefficients(nu, z, b);
  if (coeffs.empty()) return 0.0;
  return lipschitz_dual_sup(coeffs, b.center(), b.radius()).value;
}

struct SmallBoundarySample {
  Point x;
  double r;
  double tau;
};

struct SmallBoundaryEstimate {
  double value = 0.0;  ///< max annulus mass / (tau ball mass); a lower estimate of C_sb
  std::vector<std::size_t> skipped;
  std::size_t witness = 0;
};

inline SmallBoundaryEstimate small_boundary_constant(const DiscreteMeasure& nu,
                                                     std::span<const SmallBoundarySample> samples) {
  SmallBoundaryEstimate out;
  bool any = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& smp = samples[i];
    const bool valid = smp.tau > 0.0 && smp.tau <= 1.0 && smp.r >= 2.0 * nu.resolution() &&
                       variation_mass(nu, Ball(smp.x, 0.5 * smp.r)) > 0.0;
    if (!valid) {
      out.skipped.push_back(i);
      continue;
    }
    const double ball = variation_mass(nu, Ball(smp.x, smp.r));
    const double ann = annulus_variation_mass(nu, smp.x, smp.r, (1.0 + smp.tau) * smp.r);
    const double ratio = ann / (smp.tau * ball);
    if (!any || ratio > out.value) {
      out.value = ratio;
      out.witness = i;
    }
    any = true;
  }
  if (!any) throw InputError("no valid small-boundary sample");
  return out;
}

enum class ReflectionKind { at_x, at_point, none };

struct ReflectionPoint {
  ReflectionKind kind = ReflectionKind::none;
  Point point;           ///< x for at_x, the found atom for at_point
  double defect = 0.0;   ///< defect at the returned point, or the last one tested
  double tolerance = 0.0;
  int lp_evaluations = 0;
};

inline constexpr double kReflectionEnlargement = 64.0;

/// Alternative (a): nu reflection symmetric about x in B(x, r). Otherwise
/// (b): the nearest support atom x~ in B(x, Theta r), ties by index, that is
/// symmetric in B(x~, enlargement Theta r). The default tolerance is
/// 10 resolution / r.
inline ReflectionPoint nearest_reflection_point(const DiscreteMeasure& nu, const Point& x, double r, double theta,
                                                std::optional<double> defect_tol = std::nullopt,
                                                double enlargement = kReflectionEnlargement) {
  if (!(r > 0.0) || !(theta > 0.0) || !(enlargement > 0.0)) throw InputError("radii must be positive");
  ReflectionPoint out;
  out.tolerance = defect_tol.value_or(10.0 * nu.resolution() / r);
  out.point = x;
  out.defect = reflection_defect(nu, x, Ball(x, r));
  ++out.lp_evaluations;
  if (out.defect <= out.tolerance) {
    out.kind = ReflectionKind::at_x;
    return out;
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (nu.atoms()[i].w != 0.0 && distance(nu.atoms()[i].x, x) < theta * r) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distance(nu.atoms()[a].x, x) < distance(nu.atoms()[b].x, x);
  });
  for (std::size_t i : order) {
    const Point& z = nu.atoms()[i].x;
    const Ball big(z, enlargement * theta * r);
    const auto coeffs = detail::reflection_coefficients(nu, z, big);
    // The moment bound is a feasible value, so exceeding the tolerance is decisive.
    if (const double lb = detail::reflection_lower_bound(coeffs, z, big); lb > out.tolerance) {
      out.defect = lb;
      continue;
    }
    out.defect = coeffs.empty() ? 0.0 : lipschitz_dual_sup(coeffs, big.center(), big.radius()).value;
    ++out.lp_evaluations;
    if (out.defect <= out.tolerance) {
      out.kind = ReflectionKind::at_point;
      out.point = z;
      return out;
    }
  }
  out.point = x;
  return out;
}

inline const char* reflection_kind_name(ReflectionKind k) {
  switch (k) {
    case ReflectionKind::at_x: return "at_x";
    case ReflectionKind::at_point: return "at_point";
    default: return "none";
  }
}

/// Theta = 2 / sin(pi / k) for the k-spike family.
inline double huovinen_theta(int k) {
  if (k < 3 || k % 2 == 0) throw InputError("huovinen_theta requires odd k >= 3");
  return 2.0 / std::sin(std::numbers::pi / k);
}

}  // namespace czo
