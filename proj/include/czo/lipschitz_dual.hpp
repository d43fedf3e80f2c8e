#pragma once

// Transportation numbers
//
//   alpha_{mu,nu}(B(x,r)) = sup_f | r^{-s} \int phi(|x-y|/r) f d(mu - c nu) |
//
// over f in Lip_0(B(x,4r)) with Lipschitz constant 1/r, c = I_mu / I_nu.
//
// The objective reads f only at the atoms, so the supremum equals a finite
// linear program. Any vector f satisfying |f_i - f_j| <= |p_i - p_j|/r and
// |f_i| <= max(0, 4r - |p_i - x|)/r is the restriction of the McShane
// extension g(y) = min_i (f_i + |y - p_i|/r), clamped to +-dist(y, B(x,4r)^c)/r,
// which keeps the atom values and the constant 1/r. Hence the LP value is
// the continuous supremum, not an approximation of it.

#include "czo/detail/format.hpp"
#include "czo/detail/optimize.hpp"
#include "czo/detail/transport_lp.hpp"
#include "czo/measures.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace czo {

struct LpCoefficient {
  Point x;
  Complex c;
};

/// Optimal discrete Lipschitz function of the dual program.
struct LipschitzWitness {
  std::vector<Point> support_points;
  std::vector<double> values;
  Point center;
  double radius = 1.0;

  double support_bound(const Point& y) const { return std::max(0.0, 4.0 * radius - distance(y, center)) / radius; }

  /// The McShane extension to all of R^d.
  double extend(const Point& y) const {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i)
      g = std::min(g, values[i] + distance(y, support_points[i]) / radius);
    const double b = support_bound(y);
    return std::clamp(g, -b, b);
  }

  double max_pairwise_violation() const {
    double v = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      for (std::size_t j = i + 1; j < values.size(); ++j)
        v = std::max(v, std::abs(values[i] - values[j]) - distance(support_points[i], support_points[j]) / radius);
    return v;
  }

  double max_support_violation() const {
    double v = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
      v = std::max(v, std::abs(values[i]) - support_bound(support_points[i]));
    return v;
  }

  std::string hash() const {
    std::string text;
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (Eigen::Index k = 0; k < support_points[i].size(); ++k)
        text += detail::format_double(support_points[i](k)) + ',';
      text += detail::format_double(values[i]) + '\n';
    }
    return detail::sha256_hex(text);
  }
};

struct DualResult {
  double value = 0.0;
  LipschitzWitness witness;
  double theta = 0.0;  ///< phase of the optimal real objective Re(e^{-i theta} c)
  std::size_t lp_solves = 0;
};

namespace detail {

inline bool point_less(const Point& a, const Point& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return a(i) < b(i);
  return false;
}

}  // namespace detail

/// Reusable solver for the dual program. Consecutive problems with the same
/// node count and supplies (a comparison measure moving rigidly through x)
/// restart from the previous optimal basis.
class DualSolver {
 public:
  static constexpr int kPhaseGrid = 64;
  static constexpr double kPhaseTol = 1e-6;

  /// sup |sum_i c_i f_i| over the Lipschitz witness constraints for the ball
  /// B(x, 4r). Coincident positions are merged into their first occurrence;
  /// positions outside B(x, 4r) and zero coefficients are dropped.
  DualResult solve(std::span<const LpCoefficient> coeffs, const Point& x, double r) {
    if (!(r > 0.0)) throw InputError("radius must be positive");
    DualResult out;
    out.witness.center = x;
    out.witness.radius = r;

    std::vector<Point> pos;
    std::vector<Complex> c;
    std::map<Point, std::size_t, bool (*)(const Point&, const Point&)> seen(detail::point_less);
    for (const auto& lc : coeffs) {
      if (lc.x.size() != x.size()) throw InputError("coefficient position dimension mismatch");
      if (!(distance(lc.x, x) < 4.0 * r) || lc.c == 0.0) continue;
      auto [it, fresh] = seen.emplace(lc.x, pos.size());
      if (fresh) {
        pos.push_back(lc.x);
        c.push_back(lc.c);
      } else {
        c[it->second] += lc.c;
      }
    }
    {
      std::size_t w = 0;
      for (std::size_t i = 0; i < pos.size(); ++i)
        if (c[i] != 0.0) {
          pos[w] = pos[i];
          c[w++] = c[i];
        }
      pos.resize(w);
      c.resize(w);
    }
    if (pos.empty()) return out;

    std::vector<double> bounds(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) bounds[i] = std::max(0.0, 4.0 * r - distance(pos[i], x)) / r;

    const bool real = std::all_of(c.begin(), c.end(), [](const Complex& v) { return v.imag() == 0.0; });
    std::vector<double> proj(c.size()), f;
    auto solve_at = [&](double theta) {
      const double ct = std::cos(theta), st = std::sin(theta);
      for (std::size_t i = 0; i < c.size(); ++i) proj[i] = c[i].real() * ct + c[i].imag() * st;
      ++out.lp_solves;
      return lp_.solve(pos, bounds, proj, r, f);
    };

    double theta = 0.0;
    if (!real) {
      std::vector<double> g(kPhaseGrid);
      for (int k = 0; k < kPhaseGrid; ++k) g[k] = solve_at(std::numbers::pi * k / kPhaseGrid);
      // Refine the two best local maxima of the periodic grid.
      std::vector<int> peaks;
      for (int k = 0; k < kPhaseGrid; ++k)
        if (g[k] >= g[(k + kPhaseGrid - 1) % kPhaseGrid] && g[k] >= g[(k + 1) % kPhaseGrid]) peaks.push_back(k);
      std::stable_sort(peaks.begin(), peaks.end(), [&](int a, int b) { return g[a] > g[b]; });
      if (peaks.size() > 2) peaks.resize(2);
      double best = -1.0;
      for (int k : peaks) {
        const double h = std::numbers::pi / kPhaseGrid;
        const double t0 = std::numbers::pi * k / kPhaseGrid;
        auto m = detail::golden_section_minimize([&](double t) { return -solve_at(t); }, t0 - h, t0 + h, kPhaseTol);
        if (g[k] >= -m.value && g[k] > best) {
          best = g[k];
          theta = t0;
        } else if (-m.value > best) {
          best = -m.value;
          theta = m.x;
        }
      }
    }
    solve_at(theta);

    Complex total = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) total += c[i] * f[i];
    out.value = std::abs(total);
    out.theta = theta;
    out.witness.support_points = std::move(pos);
    out.witness.values = std::move(f);
    return out;
  }

  const detail::TransportLP& lp() const noexcept { return lp_; }

 private:
  detail::TransportLP lp_;
};

inline DualResult lipschitz_dual_sup(std::span<const LpCoefficient> coeffs, const Point& x, double r) {
  DualSolver solver;
  return solver.solve(coeffs, x, r);
}

// ---------------------------------------------------------------------------
// Transportation numbers

struct Comparison {
  std::string family = "fixed";
  nlohmann::json params = nlohmann::json::object();
};

struct AlphaResult {
  double value = 0.0;
  LipschitzWitness witness;
  Comparison comparison;
  Complex c = 0.0;
  double quad_spacing = 0.0;
  int evaluations = 1;
  std::size_t lp_solves = 0;
  /// Family searches bracket the infimum from above; global optimality is not claimed.
  bool upper_bound_only = false;
  /// The spike search hit |t| = 4r.
  bool boundary_binding = false;

  nlohmann::json to_json() const {
    return {{"value", value},
            {"family", comparison.family},
            {"params", comparison.params},
            {"c", {c.real(), c.imag()}},
            {"quad_spacing", quad_spacing},
            {"witness_hash", witness.hash()},
            {"evaluations", evaluations},
            {"upper_bound_only", upper_bound_only},
            {"boundary_binding", boundary_binding}};
  }
};

struct GridSpec {
  double spacing_divisor = 64.0;        ///< h_nu = r / spacing_divisor
  double plane_spacing_divisor = 8.0;   ///< used for two-dimensional planes
  int angle_grid = 180;
  double angle_tol = 1e-4;
  int nm_max_evaluations = 150;
  double nm_tol = 1e-4;
  int spike_angle_grid = 64;
  int spike_offset_grid = 33;
  double spike_screen_divisor = 8.0;    ///< coarse spacing for grid screening; 0 screens at full spacing
  int spike_refine_candidates = 3;
  int spike_descent_rounds = 4;
};

namespace detail {

inline void check_resolution(const DiscreteMeasure& m, double r, const char* what) {
  if (r < 2.0 * m.resolution())
    throw InputError(std::string("radius below twice the resolution of ") + what);
}

/// Caches the mu side of alpha_{mu,nu}(B) across many comparison measures.
/// Not safe for concurrent use; create one evaluator per thread.
class AlphaEvaluator {
 public:
  AlphaEvaluator(const DiscreteMeasure& mu, const Ball& b) : ball_(b), s_(mu.s()) {
    if (mu.dim() != b.dim()) throw InputError("measure and ball dimensions differ");
    check_resolution(mu, b.radius(), "mu");
    scale_ = std::pow(b.radius(), s_);
    for (const Atom& a : mu.atoms()) {
      const double phi = plateau_bump(distance(a.x, b.center()) / b.radius());
      if (phi <= 0.0) continue;
      i_mu_ += phi * a.w;
      mu_coeffs_.push_back({a.x, phi * a.w / scale_});
    }
  }

  const Ball& ball() const noexcept { return ball_; }
  Complex smoothed_mu() const noexcept { return i_mu_; }
  bool mu_vanishes() const noexcept { return mu_coeffs_.empty(); }

  AlphaResult evaluate(const DiscreteMeasure& nu) const {
    if (nu.dim() != ball_.dim()) throw InputError("comparison measure dimension differs");
    check_resolution(nu, ball_.radius(), "nu");
    std::vector<LpCoefficient> coeffs = mu_coeffs_;
    std::vector<std::pair<std::size_t, double>> nu_phi;
    Complex i_nu = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i) {
      const Atom& a = nu.atoms()[i];
      const double phi = plateau_bump(distance(a.x, ball_.center()) / ball_.radius());
      if (phi <= 0.0) continue;
      i_nu += phi * a.w;
      nu_phi.emplace_back(i, phi);
    }
    const Complex c = i_nu == 0.0 ? Complex(0.0) : i_mu_ / i_nu;
    if (c != 0.0)
      for (auto [i, phi] : nu_phi) coeffs.push_back({nu.atoms()[i].x, -c * phi * nu.atoms()[i].w / scale_});
    DualResult d = solver_.solve(coeffs, ball_.center(), ball_.radius());
    AlphaResult res;
    res.value = d.value;
    res.witness = std::move(d.witness);
    res.c = c;
    res.quad_spacing = nu.resolution();
    res.lp_solves = d.lp_solves;
    return res;
  }

 private:
  Ball ball_;
  double s_;
  double scale_ = 1.0;
  Complex i_mu_ = 0.0;
  std::vector<LpCoefficient> mu_coeffs_;
  mutable DualSolver solver_;
};

inline double wrap_angle(double t) {
  t = std::fmod(t, std::numbers::pi);
  return t < 0.0 ? t + std::numbers::pi : t;
}

inline nlohmann::json point_json(const Point& p) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

}  // namespace detail

/// alpha_{mu,nu}(B) for a fixed comparison measure.
inline AlphaResult alpha_mu_nu(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Ball& b) {
  AlphaResult res = detail::AlphaEvaluator(mu, b).evaluate(nu);
  res.comparison = {"fixed", nlohmann::json::object()};
  return res;
}

namespace detail {

// Line search over directions in the plane; shared by the flat and spike searches.
inline AlphaResult flat_search_2d(const AlphaEvaluator& ev, const GridSpec& g) {
  const Ball& b = ev.ball();
  const double r = b.radius();
  const double h = r / g.spacing_divisor;
  int evals = 0;
  std::size_t solves = 0;
  auto line = [&](double theta) {
    const Point basis[1] = {make_point({std::cos(theta), std::sin(theta)})};
    return make_plane_measure(b.center(), basis, 4.0 * r + h, h);
  };
  std::optional<AlphaResult> best;
  double best_theta = 0.0;
  auto f = [&](double theta) {
    AlphaResult res = ev.evaluate(line(theta));
    ++evals;
    solves += res.lp_solves;
    const double v = res.value;
    if (!best || v < best->value) {
      best = std::move(res);
      best_theta = theta;
    }
    return v;
  };
  const double step = std::numbers::pi / g.angle_grid;
  int arg = 0;
  double arg_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.angle_grid; ++k)
    if (const double v = f(step * k); v < arg_val) {
      arg_val = v;
      arg = k;
    }
  golden_section_minimize(f, step * arg - step, step * arg + step, g.angle_tol);

  AlphaResult res = std::move(*best);
  const double theta = wrap_angle(best_theta);
  res.comparison = {"flat", {{"theta", theta}, {"direction", point_json(make_point({std::cos(theta), std::sin(theta)}))}}};
  res.evaluations = evals;
  res.lp_solves = solves;
  res.upper_bound_only = true;
  return res;
}

}  // namespace detail

/// alpha^flat: infimum of alpha_{mu, H^s|x+L} over s-planes L through x.
inline AlphaResult alpha_flat(const DiscreteMeasure& mu, const Ball& b, const GridSpec& g = {}) {
  const int d = mu.dim();
  const double s = mu.s();
  if (!((s == 1.0 || s == 2.0) && (d == 2 || d == 3) && s < d))
    throw InputError("alpha_flat supports s in {1, 2} and d in {2, 3}");
  detail::AlphaEvaluator ev(mu, b);
  if (d == 2) return detail::flat_search_2d(ev, g);

  const double r = b.radius();
  const double h = r / (s == 2.0 ? g.plane_spacing_divisor : g.spacing_divisor);
  auto plane = [&](const Point& u) {
    if (s == 1.0) {
      const Point basis[1] = {u};
      return make_plane_measure(b.center(), basis, 4.0 * r + h, h);
    }
    auto [e1, e2] = detail::orthonormal_complement(u);
    const Point basis[2] = {e1, e2};
    return make_plane_measure(b.center(), basis, 4.0 * r + h, h);
  };
  std::optional<AlphaResult> best;
  Point best_u = zero_point(3);
  int evals = 0;
  std::size_t solves = 0;
  auto f = [&](const Point& u) {
    AlphaResult res = ev.evaluate(plane(u));
    ++evals;
    solves += res.lp_solves;
    const double v = res.value;
    if (!best || v < best->value) {
      best = std::move(res);
      best_u = u;
    }
    return v;
  };
  for (const Point& u : detail::projective_sphere_grid()) f(u);
  const Point u0 = best_u;
  detail::nelder_mead_minimize(
      [&](const std::vector<double>& p) { return f(detail::spherical_direction(p[0], p[1])); },
      {std::acos(std::clamp(u0(2), -1.0, 1.0)), std::atan2(u0(1), u0(0))}, 0.1, g.nm_tol, g.nm_max_evaluations);

  AlphaResult res = std::move(*best);
  res.comparison = {"flat", {{s == 1.0 ? "direction" : "normal", detail::point_json(best_u)}}};
  res.evaluations = evals;
  res.lp_solves = solves;
  res.upper_bound_only = true;
  return res;
}

/// alpha^Spike: infimum of alpha_{mu,nu} over k-spike measures nu whose
/// support contains x. The m = 1 spikes are the lines through x.
inline AlphaResult alpha_spike(const DiscreteMeasure& mu, const Ball& b, int k, const GridSpec& g = {}) {
  if (k < 1 || k % 2 == 0) throw InputError("spike order k must be odd and >= 1");
  if (mu.dim() != 2) throw InputError("alpha_spike requires planar measures");
  detail::AlphaEvaluator ev(mu, b);
  AlphaResult best = detail::flat_search_2d(ev, g);
  {
    const double theta = best.comparison.params["theta"].get<double>();
    best.comparison = {"spike",
                       {{"k", k}, {"m", 1}, {"theta", theta}, {"t", 0.0}, {"vertex", detail::point_json(b.center())}}};
  }
  int evals = best.evaluations;
  std::size_t solves = best.lp_solves;
  const double r = b.radius();
  const Point& x = b.center();

  for (int m = 3; m <= k; m += 2) {
    if (k % m != 0) continue;
    auto spike = [&](double beta, double t, double h) {
      SpikeParams p;
      p.k = k;
      p.m = m;
      p.angle = detail::wrap_angle(beta);
      const Point e = make_point({std::cos(beta), std::sin(beta)});
      p.vertex = x + t * e;
      p.scale = 1.0;
      return make_spike_measure(p, std::abs(t) + 4.0 * r + h, h);
    };
    const double h_fine = r / g.spacing_divisor;
    const bool screen = g.spike_screen_divisor >= 2.0 && g.spike_screen_divisor < g.spacing_divisor;
    const double h_screen = screen ? r / g.spike_screen_divisor : h_fine;
    const double beta_step = std::numbers::pi / g.spike_angle_grid;
    const double t_step = g.spike_offset_grid > 1 ? 8.0 * r / (g.spike_offset_grid - 1) : 0.0;

    struct Cand {
      double value, beta, t;
    };
    std::vector<Cand> grid;
    for (int i = 0; i < g.spike_angle_grid; ++i)
      for (int j = 0; j < g.spike_offset_grid; ++j) {
        const double beta = beta_step * i;
        const double t = g.spike_offset_grid > 1 ? -4.0 * r + t_step * j : 0.0;
        AlphaResult res = ev.evaluate(spike(beta, t, h_screen));
        ++evals;
        solves += res.lp_solves;
        grid.push_back({res.value, beta, t});
      }
    std::stable_sort(grid.begin(), grid.end(), [](const Cand& a, const Cand& c) { return a.value < c.value; });
    const std::size_t n_cand = screen ? std::min<std::size_t>(grid.size(), std::max(1, g.spike_refine_candidates)) : 1;

    std::optional<AlphaResult> m_best;
    double cur_beta = 0.0, cur_t = 0.0;
    auto f = [&](double beta, double t) {
      AlphaResult res = ev.evaluate(spike(beta, t, h_fine));
      ++evals;
      solves += res.lp_solves;
      const double v = res.value;
      if (!m_best || v < m_best->value) {
        m_best = std::move(res);
        cur_beta = beta;
        cur_t = t;
      }
      return v;
    };
    for (std::size_t i = 0; i < n_cand; ++i) f(grid[i].beta, grid[i].t);

    double db = beta_step, dt = t_step;
    for (int round = 0; round < g.spike_descent_rounds; ++round) {
      const double before = m_best->value;
      const double t_fixed = cur_t;
      detail::golden_section_minimize([&](double beta) { return f(beta, t_fixed); }, cur_beta - db, cur_beta + db,
                                      g.angle_tol);
      if (dt > 0.0) {
        const double beta_fixed = cur_beta;
        detail::golden_section_minimize([&](double t) { return f(beta_fixed, t); }, std::max(-4.0 * r, cur_t - dt),
                                        std::min(4.0 * r, cur_t + dt), g.angle_tol * r);
      }
      db *= 0.5;
      dt *= 0.5;
      if (before - m_best->value < 1e-9) break;
    }
    if (m_best->value < best.value) {
      best = std::move(*m_best);
      const double beta = detail::wrap_angle(cur_beta);
      best.comparison = {"spike",
                         {{"k", k},
                          {"m", m},
                          {"theta", beta},
                          {"t", cur_t},
                          {"vertex", detail::point_json(x + cur_t * make_point({std::cos(cur_beta), std::sin(cur_beta)}))}}};
      best.boundary_binding = std::abs(cur_t) >= 4.0 * r * (1.0 - 1e-12);
    }
  }
  best.evaluations = evals;
  best.lp_solves = solves;
  best.upper_bound_only = true;
  return best;
}

// ---------------------------------------------------------------------------
// General symmetric families

struct Candidate {
  DiscreteMeasure nu;
  /// symmetric_point_defect(nu, K, x, 4r).max_defect for the ball's center.
  double symmetric_defect = 0.0;
  std::string label;
};

struct SkippedCandidate {
  std::size_t index;
  std::string reason;
};

class AdmissibilityError : public std::runtime_error {
 public:
  explicit AdmissibilityError(std::vector<SkippedCandidate> skipped)
      : std::runtime_error("no admissible comparison measure: the infimum is over an empty set"),
        skipped_(std::move(skipped)) {}
  const std::vector<SkippedCandidate>& skipped() const noexcept { return skipped_; }

 private:
  std::vector<SkippedCandidate> skipped_;
};

struct GeneralAlpha {
  AlphaResult result;
  std::size_t best_index = 0;
  std::vector<SkippedCandidate> skipped;
};

/// Admissible iff the zero measure, or supp(nu) meets B(x, r/8) and
/// defect / r^s <= 10 h_nu / r.
inline std::optional<std::string> admissibility_failure(const Candidate& cand, const Ball& b) {
  if (cand.nu.empty()) return std::nullopt;
  const double r = b.radius();
  const bool meets = std::any_of(cand.nu.atoms().begin(), cand.nu.atoms().end(), [&](const Atom& a) {
    return a.w != 0.0 && distance(a.x, b.center()) < r / 8.0;
  });
  if (!meets) return "support does not meet B(x, r/8)";
  const double tol = 10.0 * cand.nu.resolution() / r;
  if (cand.symmetric_defect / std::pow(r, cand.nu.s()) > tol) return "x is not a symmetric point within tolerance";
  return std::nullopt;
}

inline GeneralAlpha alpha_general(const DiscreteMeasure& mu, const Ball& b, std::span<const Candidate> family) {
  detail::AlphaEvaluator ev(mu, b);
  GeneralAlpha out;
  std::optional<AlphaResult> best;
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (auto why = admissibility_failure(family[i], b)) {
      out.skipped.push_back({i, *why});
      continue;
    }
    AlphaResult res = ev.evaluate(family[i].nu);
    if (!best || res.value < best->value) {
      res.comparison = {"general", {{"index", i}, {"label", family[i].label}}};
      best = std::move(res);
      out.best_index = i;
    }
  }
  if (!best) throw AdmissibilityError(std::move(out.skipped));
  out.result = std::move(*best);
  return out;
}

// ---------------------------------------------------------------------------
// Decay curves

struct FlatFamily {};
struct SpikeFamily {
  int k = 3;
};
struct FixedFamily {
  DiscreteMeasure nu;
};
using FamilySelector = std::variant<FlatFamily, SpikeFamily, FixedFamily>;

struct DecayPoint {
  double r;
  AlphaResult alpha;
};

/// alpha per radius, in the order given.
inline std::vector<DecayPoint> alpha_decay_curve(const DiscreteMeasure& mu, const Point& x,
                                                 std::span<const double> r_grid, const FamilySelector& family,
                                                 const GridSpec& g = {}) {
  std::vector<DecayPoint> out;
  out.reserve(r_grid.size());
  for (double r : r_grid) {
    detail::check_resolution(mu, r, "mu");
    const Ball b(x, r);
    AlphaResult a = std::visit(
        [&](const auto& fam) -> AlphaResult {
          using F = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<F, FlatFamily>) return alpha_flat(mu, b, g);
          else if constexpr (std::is_same_v<F, SpikeFamily>) return alpha_spike(mu, b, fam.k, g);
          else return alpha_mu_nu(mu, fam.nu, b);
        },
        family);
    out.push_back({r, std::move(a)});
  }
  return out;
}

}  // namespace czo
