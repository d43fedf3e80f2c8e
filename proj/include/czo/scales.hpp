#pragma once

// Scale selection: thin shells, reduction to doubling scales and the
// averaging-scale alternative.

#include "czo/lipschitz_dual.hpp"
#include "czo/measures.hpp"
#include "czo/symmetry.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace czo {

/// Knobs of the scale-selection algorithms. Member defaults are the proof's
/// values; the presets shrink the powers of two to desk scale.
struct ScaleParams {
  int M = 1 << 12;               ///< enlargement, even, >= 4
  double theta = 2.0 / std::sin(std::numbers::pi / 3.0);
  double A = std::ldexp(1.0, 30) * (2.0 / std::sin(std::numbers::pi / 3.0));
  double epsilon = 1e-3;         ///< density threshold
  double alpha_thresh = 1e-6;    ///< transportation threshold
  double delta = 1e-3;           ///< target accuracy
  double shell_width = 1024.0;   ///< thin-shell half width, in units of r
  double refl_radius = 32.0;     ///< reflection ball at scale 1, in units of r0
  double enlargement = kReflectionEnlargement;
  double density_window = std::ldexp(1.0, 50);  ///< low-density ball is density_window Theta r0
  double density_constant = 1.0;                ///< low density means D <= density_constant epsilon
  std::string preset = "paper";

  void validate() const {
    if (M < 4 || M % 2 != 0) throw InputError("M must be even and at least 4");
    if (!(A > 1.0)) throw InputError("A must exceed 1");
    if (!(theta > 0.0)) throw InputError("theta must be positive");
    for (double v : {epsilon, alpha_thresh, delta})
      if (!(v > 0.0) || !(v < 1.0)) throw InputError("epsilon, alpha_thresh and delta must lie in (0, 1)");
    for (double v : {shell_width, refl_radius, enlargement, density_window, density_constant})
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError("scale powers must be positive and finite");
  }

  /// R in the theta branch: twice the reflection radius times Theta.
  double theta_R() const { return 2.0 * refl_radius * theta; }

  static ScaleParams named(const std::string& name) {
    ScaleParams p;
    p.preset = name;
    if (name == "paper") return p;
    p.alpha_thresh = 0.5;
    if (name == "coarse") {
      p.M = 4;
      p.A = 4.0;
      p.epsilon = 0.25;
      p.delta = 0.25;
      p.shell_width = 2.0;
      p.refl_radius = 4.0;
      p.enlargement = 4.0;
      p.density_window = 4.0;
    } else if (name == "default") {
      p.M = 8;
      p.A = 8.0;
      p.epsilon = 0.1;
      p.delta = 0.1;
      p.shell_width = 4.0;
      p.refl_radius = 8.0;
      p.enlargement = 8.0;
      p.density_window = 16.0;
    } else if (name == "fine") {
      p.M = 8;
      p.A = 8.0;
      p.epsilon = 0.05;
      p.delta = 0.05;
      p.shell_width = 8.0;
      p.refl_radius = 16.0;
      p.enlargement = 16.0;
      p.density_window = 64.0;
    } else {
      throw InputError("unknown preset '" + name + "'");
    }
    return p;
  }

  nlohmann::json to_json() const {
    return {{"preset", preset},         {"M", M},
            {"A", A},                   {"theta", theta},
            {"epsilon", epsilon},       {"alpha_thresh", alpha_thresh},
            {"delta", delta},           {"shell_width", shell_width},
            {"refl_radius", refl_radius}, {"enlargement", enlargement},
            {"density_window", density_window}, {"density_constant", density_constant}};
  }
};

// ---------------------------------------------------------------------------
// Thin shells

struct ThinShell {
  int M_prime = 0;
  int j = 0;                  ///< annulus index, 1-based
  double annulus_mass = 0.0;  ///< |mu| of {(M' - w) r <= |y - x| < (M' + w) r}
  double bound = 0.0;         ///< (2 / M) |mu|(B(x, 2 w M r))
};

/// Even M' = M + (2j - 1) w in [M + w, 2 w M] whose shell of half width w r
/// carries at most a 2/M fraction of B(x, 2 w M r). The M/2 shells are
/// disjoint and lie inside that ball, so one of them qualifies.
inline ThinShell find_thin_shell(const DiscreteMeasure& mu, const Point& x, double r, int M,
                                 double width = 1024.0) {
  if (M < 2 || M % 2 != 0) throw InputError("M must be a positive even integer");
  if (!(r > 0.0)) throw InputError("radius must be positive");
  if (!(width >= 1.0) || width != std::floor(width)) throw InputError("shell width must be a positive integer");
  ThinShell out;
  out.bound = 2.0 / M * variation_mass(mu, Ball(x, 2.0 * width * M * r));
  double best = std::numeric_limits<double>::infinity();
  int best_j = 1;
  for (int j = 1; j <= M / 2; ++j) {
    const double inner = (M + 2.0 * (j - 1) * width) * r, outer = (M + 2.0 * j * width) * r;
    const double mass = annulus_variation_mass(mu, x, inner, outer);
    if (mass <= out.bound) {
      best_j = j;
      best = mass;
      break;
    }
    if (mass < best) {
      best = mass;
      best_j = j;
    }
  }
  out.j = best_j;
  out.M_prime = M + (2 * best_j - 1) * static_cast<int>(width);
  out.annulus_mass = annulus_variation_mass(mu, x, (out.M_prime - width) * r, (out.M_prime + width) * r);
  if (!(out.annulus_mass <= out.bound)) throw NumericError("thin-shell postcondition failed");
  return out;
}

// ---------------------------------------------------------------------------
// Doubling scales

enum class DoublingCase { case1_doubling, case2_dense, absolutely_convergent };

inline const char* doubling_case_name(DoublingCase c) {
  switch (c) {
    case DoublingCase::case1_doubling: return "case1_doubling";
    case DoublingCase::case2_dense: return "case2_dense";
    default: return "absolutely_convergent";
  }
}

struct DoublingOutcome {
  double r0 = 0.0;
  DoublingCase kind = DoublingCase::absolutely_convergent;
  int L = 0;
  double doubling_lhs = 0.0;  ///< D(B(x, A r0))
  double doubling_rhs = 0.0;  ///< A D(B(x, r0))
  bool doubling_holds = true;

  nlohmann::json to_json() const {
    return {{"r0", r0}, {"case", doubling_case_name(kind)}, {"L", L}, {"doubling_lhs", doubling_lhs},
            {"doubling_rhs", doubling_rhs}, {"doubling_holds", doubling_holds}};
  }
};

/// Case 2 when D(B(x, r)) >= epsilon. Otherwise descend while
/// D(B(x, r/A^l)) > A D(B(x, r/A^{l+1})); the first failing level L gives
/// r0 = r / A^{L+1}. Reaching the resolution floor, or a level without mass,
/// with the decay intact reports absolute convergence.
inline DoublingOutcome reduce_to_doubling(const DiscreteMeasure& mu, const Point& x, double r, const ScaleParams& p) {
  p.validate();
  const double floor = 2.0 * mu.resolution();
  if (!(r >= floor * p.A)) throw InputError("r must be at least 2 resolution A");
  const double s = mu.s();
  auto D = [&](double rho) { return variation_mass(mu, Ball(x, rho)) / std::pow(rho, s); };
  DoublingOutcome out;
  auto finish = [&](double r0, DoublingCase kind, int L) {
    out.r0 = r0;
    out.kind = kind;
    out.L = L;
    if (kind != DoublingCase::absolutely_convergent) {
      out.doubling_lhs = D(p.A * r0);
      out.doubling_rhs = p.A * D(r0);
      out.doubling_holds = out.doubling_lhs <= out.doubling_rhs + 1e-12 * out.doubling_lhs;
    }
    return out;
  };
  const double d0 = D(r);
  if (d0 >= p.epsilon) return finish(r, DoublingCase::case2_dense, 0);
  if (d0 == 0.0) return finish(r, DoublingCase::absolutely_convergent, 0);
  int l = 0;
  double rho = r;
  while (rho / p.A >= floor) {
    const double below = D(rho / p.A);
    if (!(D(rho) > p.A * below)) {
      finish(rho / p.A, DoublingCase::case1_doubling, l);
      if (!out.doubling_holds) throw NumericError("doubling display failed at the returned scale");
      return out;
    }
    ++l;
    rho /= p.A;
    if (below == 0.0) break;
  }
  return finish(rho, DoublingCase::absolutely_convergent, l);
}

// ---------------------------------------------------------------------------
// Averaging scales

enum class AveragingBranch { refl_at_scale_1, refl_at_theta_scale, low_density };

inline const char* averaging_branch_name(AveragingBranch b) {
  switch (b) {
    case AveragingBranch::refl_at_scale_1: return "refl_at_scale_1";
    case AveragingBranch::refl_at_theta_scale: return "refl_at_theta_scale";
    default: return "low_density";
  }
}

struct AveragingChoice {
  Point x_tilde;
  double R = 1.0;
  AveragingBranch branch = AveragingBranch::low_density;
  double scale1_defect = std::numeric_limits<double>::infinity();
  double theta_defect = std::numeric_limits<double>::infinity();
  double density = 0.0;  ///< D(B(x, density_window Theta r0))
  double defect_tolerance = 0.0;

  nlohmann::json to_json() const {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"x_tilde", detail::point_json(x_tilde)}, {"R", R}, {"branch", averaging_branch_name(branch)},
            {"scale1_defect", num(scale1_defect)}, {"theta_defect", num(theta_defect)}, {"density", density},
            {"defect_tolerance", defect_tolerance}};
  }
};

class AlternativeFailed : public std::runtime_error {
 public:
  explicit AlternativeFailed(AveragingChoice diag)
      : std::runtime_error("no branch of the averaging alternative holds at tolerance"), diag_(std::move(diag)) {}
  const AveragingChoice& diagnostics() const noexcept { return diag_; }

 private:
  AveragingChoice diag_;
};

/// Either nu is reflection symmetric near x (an atom x_nu of nu in
/// B(x, r0/8) symmetric in B(x_nu, refl r0), R = 1; or an atom in
/// B(x_nu, refl Theta r0) symmetric in the enlarged ball, R = 2 refl Theta),
/// or mu has density at most C epsilon on B(x, density_window Theta r0).
inline AveragingChoice choose_averaging_scale(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Point& x,
                                              double r0, const ScaleParams& p, const AlphaResult& alpha,
                                              std::optional<double> defect_tol = std::nullopt) {
  p.validate();
  if (!(r0 > 0.0)) throw InputError("r0 must be positive");
  if (!(alpha.value < p.alpha_thresh)) throw InputError("comparison measure is not within alpha_thresh");
  AveragingChoice out;
  out.x_tilde = x;
  const double refl_r = p.refl_radius * r0;
  out.defect_tolerance = defect_tol.value_or(10.0 * nu.resolution() / refl_r);

  std::optional<std::size_t> anchor;
  double best = r0 / 8.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const Atom& a = nu.atoms()[i];
    if (a.w == 0.0) continue;
    if (const double d = distance(a.x, x); d < best) {
      best = d;
      anchor = i;
    }
  }
  if (anchor) {
    const Point& xn = nu.atoms()[*anchor].x;
    const ReflectionPoint rp = nearest_reflection_point(nu, xn, refl_r, p.theta, out.defect_tolerance, p.enlargement);
    if (rp.kind == ReflectionKind::at_x) {
      out.scale1_defect = rp.defect;
      out.x_tilde = xn;
      out.R = 1.0;
      out.branch = AveragingBranch::refl_at_scale_1;
      return out;
    }
    out.scale1_defect = reflection_defect(nu, xn, Ball(xn, refl_r));
    out.theta_defect = rp.defect;
    if (rp.kind == ReflectionKind::at_point) {
      out.x_tilde = rp.point;
      out.R = p.theta_R();
      out.branch = AveragingBranch::refl_at_theta_scale;
      return out;
    }
  }
  const double window = p.density_window * p.theta * r0;
  out.density = variation_mass(mu, Ball(x, window)) / std::pow(window, mu.s());
  out.x_tilde = x;
  out.R = 1.0;
  out.branch = AveragingBranch::low_density;
  if (out.density <= p.density_constant * p.epsilon) return out;
  throw AlternativeFailed(out);
}

}  // namespace czo
