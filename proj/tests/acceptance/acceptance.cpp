// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Tolerances and runtime budgets are pinned here.

#include "../oracles.hpp"
#include "czo/czo.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace czo;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Point kOrigin = zero_point(2);

Point polar(double rad, double ang) { return make_point({rad * std::cos(ang), rad * std::sin(ang)}); }

DiscreteMeasure segment(double angle, double half, double h, const Point& center = kOrigin) {
  return make_segment_measure(center, make_point({std::cos(angle), std::sin(angle)}), half, h);
}

/// n atoms in [-1, 1]^2; complex weights when complex_weights is set.
DiscreteMeasure random_measure(std::mt19937_64& rng, int n, bool complex_weights) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.0, 1.0);
  std::vector<Atom> atoms;
  for (int i = 0; i < n; ++i) {
    const Point p = make_point({u(rng), u(rng)});
    atoms.push_back({p, complex_weights ? Complex(u(rng), u(rng)) : Complex(w(rng))});
  }
  return {2, 1.0, 0.01, std::move(atoms), !complex_weights};
}

// ---------------------------------------------------------------------------

Outcome kernel_axioms() {
  Outcome out;
  double worst_size = 0.0, worst_anti = 0.0, worst_smooth = 0.0;
  auto check = [&](const auto& k, std::uint64_t seed) {
    const AxiomReport rep = verify_axioms(k, 10000, {1e-3, 1e3}, seed);
    worst_size = std::max(worst_size, rep.size_ratio / rep.c_k);
    worst_anti = std::max(worst_anti, rep.antisymmetry_defect);
    worst_smooth = std::max(worst_smooth, rep.smoothness_ratio / rep.c_smooth);
    if (!rep.size_ok(1e-12) || rep.antisymmetry_defect > 1e-12 || !rep.smoothness_ok()) {
      out.pass = false;
      out.detail += k.name() + " ";
    }
  };
  std::uint64_t seed = 1;
  for (double s : {0.5, 1.0, 1.9})
    for (int d : {2, 3}) check(RieszKernel(s, d), seed++);
  for (int k : {3, 5}) check(HuovinenKernel(k), seed++);
  out.detail += "size/C_K " + fmt("%.15f", worst_size) + ", antisymmetry " + fmt("%.1e", worst_anti) +
                ", smoothness/C_smooth " + fmt("%.3f", worst_smooth);
  return out;
}

Outcome lp_oracle() {
  Outcome out;
  std::mt19937_64 rng(2025);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 4;
    // Clustered atoms keep the feasible grid small for n = 4.
    const double spread = n == 4 ? 0.12 : 0.3;
    const Point c = make_point({2.0 * u(rng), 2.0 * u(rng)});
    std::vector<LpCoefficient> cs;
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Complex w = trial % 2 ? Complex(u(rng), u(rng)) : Complex(u(rng), 0.0);
      cs.push_back({make_point({c(0) + spread * u(rng), c(1) + spread * u(rng)}), w});
      l1 += std::abs(w);
    }
    const double lp = lipschitz_dual_sup(cs, kOrigin, 1.0).value;
    const double bf = oracle::brute_force_dual(cs, kOrigin, 1.0, 0.01);
    const double rel = l1 > 0.0 ? std::abs(lp - bf) / l1 : 0.0;
    worst = std::max(worst, rel);
    if (rel > 0.02 || lp < bf - 1e-9) ++failures;
  }
  out.pass = failures == 0;
  out.detail = "200 instances, worst |lp - grid| / sum|c| = " + fmt("%.2e", worst) + ", failures " +
               std::to_string(failures);
  return out;
}

Outcome alpha_self_distance() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.5, 0.5), rad(0.1, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteMeasure mu = random_measure(rng, 20 + trial % 30, trial % 3 == 0);
    const Ball b(make_point({u(rng), u(rng)}), rad(rng));
    worst = std::max(worst, alpha_mu_nu(mu, mu, b).value);
  }
  return {worst <= 1e-10, "50 measures, max alpha(mu, mu) = " + fmt("%.1e", worst)};
}

Outcome scaling_identity() {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(-0.5, 0.5), rad(0.1, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const bool cw = trial % 4 == 0;
    const DiscreteMeasure mu = random_measure(rng, 30, cw), nu = random_measure(rng, 25, cw);
    const Point x = make_point({u(rng), u(rng)});
    const double r = rad(rng);
    const double direct = alpha_mu_nu(mu, nu, Ball(x, r)).value;
    const double scaled = alpha_mu_nu(rescale(mu, x, r), rescale(nu, x, r), Ball(kOrigin, 1.0)).value;
    worst = std::max(worst, std::abs(direct - scaled) / std::max(direct, 1e-300));
  }
  return {worst <= 1e-8, "50 cases, worst relative difference " + fmt("%.1e", worst)};
}

Outcome flat_decay() {
  Outcome out;
  const double h = std::ldexp(1.0, -10);
  const DiscreteMeasure mu = segment(0.0, 1.0, h);
  const GridSpec g;
  double worst = 0.0;
  std::vector<double> radii;
  for (int e = 7; e >= 3; --e) radii.push_back(std::ldexp(1.0, -e));
  for (double r : radii) {
    const double a = alpha_flat(mu, Ball(kOrigin, r), g).value;
    const double bound = 8.0 * (h + r / g.spacing_divisor) / r;
    worst = std::max(worst, a / bound);
    if (a > bound) out.pass = false;
  }
  const double r_min = 2.0 * h;
  const auto tr = transform_trace(mu, RieszKernel(1.0, 2), kOrigin, 0.125, 0.5, 4, 1e-9);
  const bool converged = tr.verdict == Verdict::converged;
  const double limit = converged ? magnitude(*tr.limit) : INFINITY;
  if (!converged || limit > 10.0 * h / r_min) out.pass = false;
  out.detail = "max alpha / bound = " + fmt("%.3f", worst) + ", trace " + verdict_name(tr.verdict) + " |limit| " +
               fmt("%.1e", limit);
  return out;
}

Outcome spike_symmetry() {
  Outcome out;
  const double h = 1.0 / 64, extent = 2.0, r_max = 1.0;
  SpikeParams p;
  p.k = 3;
  p.m = 3;
  const DiscreteMeasure nu = make_spike_measure(p, extent, h);
  const HuovinenKernel k(3);
  std::vector<Point> points{p.vertex};
  std::vector<Point> interior;
  // The trace is constant once r drops below the distance to the other lines,
  // sin(pi/3) |x|; atoms at |x| >= 1/4 reach that regime inside the tail window.
  for (const Atom& a : nu.atoms())
    if (a.x.norm() >= 0.25 && a.x.norm() + r_max < extent) interior.push_back(a.x);
  std::mt19937_64 rng(6);
  std::shuffle(interior.begin(), interior.end(), rng);
  points.insert(points.end(), interior.begin(), interior.begin() + 10);
  double worst = 0.0;
  int unconverged = 0;
  for (const Point& x : points) {
    const double d = symmetric_point_defect(nu, k, x, r_max).max_defect;
    worst = std::max(worst, d);
    // Offsetting by h/2 keeps grid radii off the atom distances, where
    // rounding would split a mirrored pair.
    const auto tr = transform_trace(nu, k, x, r_max + 0.5 * h, 0.5, 3, 1e-6);
    if (tr.verdict != Verdict::converged) ++unconverged;
  }
  out.pass = worst <= 12.0 * h && unconverged == 0;
  out.detail = "11 points, max defect / h = " + fmt("%.2f", worst / h) + ", unconverged traces " +
               std::to_string(unconverged);
  return out;
}

Outcome spike_vs_flat() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GridSpec g;
  g.spacing_divisor = 32.0;
  g.angle_grid = 90;
  g.spike_angle_grid = 16;
  g.spike_offset_grid = 9;
  g.spike_descent_rounds = 2;
  const double h = 1.0 / 32, r = 0.25;
  double worst = -INFINITY;
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteMeasure mu = segment(std::numbers::pi * u(rng), 1.0, h, polar(0.05 * u(rng), 6.0 * u(rng)));
    for (int extra = 0; extra < trial % 3; ++extra)
      mu = oracle::sum(mu, segment(std::numbers::pi * u(rng), 1.0, h, polar(0.1 * u(rng), 6.0 * u(rng))));
    const Ball b(polar(0.02 * u(rng), 6.0 * u(rng)), r);
    worst = std::max(worst, alpha_spike(mu, b, 3, g).value - alpha_flat(mu, b, g).value);
  }
  return {worst <= 1e-6, "20 measures, max (spike - flat) = " + fmt("%.1e", worst)};
}

Outcome thin_shell() {
  Outcome out;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto independent_check = [](const DiscreteMeasure& mu, const Point& x, double r, int M, double w,
                              const ThinShell& t) {
    double annulus = 0.0, big = 0.0;
    for (const Atom& a : mu.atoms()) {
      const double d = distance(a.x, x);
      if (d >= (t.M_prime - w) * r && d < (t.M_prime + w) * r) annulus += std::abs(a.w);
      if (d < 2.0 * w * M * r) big += std::abs(a.w);
    }
    return annulus <= 2.0 / M * big && t.M_prime >= M + w && t.M_prime <= 2.0 * w * M;
  };
  int failures = 0;
  for (int trial = 0; trial < 99; ++trial) {
    const int M = 2 * (2 + trial % 6);
    const double w = 1.0 + trial % 4, r = 0.5 + u(rng);
    std::vector<Atom> atoms;
    const double reach = 2.0 * w * M * r;
    for (int i = 0; i < 40; ++i) atoms.push_back({polar(reach * std::pow(u(rng), 0.3), 7.0 * u(rng)), u(rng)});
    const DiscreteMeasure mu(2, 1.0, 1e-3, atoms);
    if (!independent_check(mu, kOrigin, r, M, w, find_thin_shell(mu, kOrigin, r, M, w))) ++failures;
  }
  // A heavy atom in the first shell pushes the choice to the second one.
  const int M = 4;
  const double w = 1024.0;
  const DiscreteMeasure adv(2, 1.0, 0.01, {{make_point({M + w, 0.0}), 1.5}, {make_point({0.0, M + 3 * w}), 1.0}});
  const ThinShell t = find_thin_shell(adv, kOrigin, 1.0, M, w);
  if (!independent_check(adv, kOrigin, 1.0, M, w, t) || t.j != 2) ++failures;
  out.pass = failures == 0;
  out.detail = "100 measures, adversarial shell j = " + std::to_string(t.j) + ", failures " + std::to_string(failures);
  return out;
}

Outcome david_mattila() {
  int failures = 0, cases = 0;
  double worst = 0.0;
  for (double A : {2.0, 4.0}) {
    for (int L = 2; L <= 6; ++L) {
      // Mass A^{-2l} / 2 on the circle of radius 0.6 A^{-l}: strict density decay.
      std::vector<Atom> atoms;
      for (int l = 0; l <= L + 1; ++l) atoms.push_back({polar(0.6 * std::pow(A, -l), l), 0.5 * std::pow(A, -2.0 * l)});
      const DiscreteMeasure mu(2, 1.0, 1e-9, atoms);
      const double r = 1.0;
      const auto dm = david_mattila_pair(mu, RieszKernel(1.0, 2), kOrigin, r, A, L);
      ++cases;
      worst = std::max(worst, dm.lhs / dm.rhs);
      if (!dm.hypothesis_holds || dm.lhs > dm.rhs) ++failures;
      auto dens = [&](int k) { return variation_mass(mu, Ball(kOrigin, r * std::pow(A, -k))) / (r * std::pow(A, -k)); };
      for (int k = 0; k <= L; ++k)
        if (dens(k) > dens(0) / std::pow(A, k) * (1.0 + 1e-12)) ++failures;
    }
  }
  return {failures == 0, std::to_string(cases) + " chains, max lhs / rhs = " + fmt("%.3f", worst) + ", failures " +
                             std::to_string(failures)};
}

Outcome cutoff_bound() {
  Outcome out;
  double worst = 0.0;
  for (double kappa : {0.25, 0.5}) {
    auto psi = [kappa](double t) { return 1.0 - ramp_cutoff(t, 1.0, kappa); };
    auto check = [&](const auto& k, std::uint64_t seed) {
      const auto rep = cutoff_kernel_check(k, psi, 1.0, 1.0, 1.0 / kappa, 10000, seed);
      const double bound = k.c_k() * 1.0 / std::pow(kappa, k.s());
      worst = std::max(worst, rep.sup_value / bound);
      if (rep.sup_value > bound) out.pass = false;
    };
    check(RieszKernel(1.0, 2), 3);
    check(HuovinenKernel(3), 4);
  }
  out.detail = "max sampled sup / bound = " + fmt("%.3f", worst);
  return out;
}

// First calibration run: max difference 1.093e-3 over the five points, all in
// the refl_at_scale_1 branch. The ceiling is about twice that.
constexpr double kPipelineRegressionCeiling = 2.5e-3;

Outcome pipeline_claim() {
  Outcome out;
  const double h = 1.0 / 256, r = 1.0 / 16;
  const DiscreteMeasure mu = segment(0.0, 8.0, h);
  const RieszKernel k(1.0, 2);
  const ScaleParams p = ScaleParams::named("fine");
  double worst_ratio = 0.0, worst_diff = 0.0;
  int compared = 0;
  std::string branches;
  for (double t : {-3.5, -1.75, 0.125, 1.875, 3.25}) {
    const PipelineResult pr = run_pipeline(mu, k, make_point({t, 0.0}), r, p);
    if (!pr.compared) {
      out.pass = false;
      branches += pr.skipped + " ";
      continue;
    }
    ++compared;
    branches += std::string(averaging_branch_name(pr.choice->branch)) + " ";
    const double tol = 0.05 * std::max(1.0, pr.t_r0) + 20.0 * h / pr.doubling.r0;
    worst_ratio = std::max(worst_ratio, pr.difference / tol);
    worst_diff = std::max(worst_diff, pr.difference);
    if (pr.difference > tol || pr.difference > kPipelineRegressionCeiling) out.pass = false;
  }
  out.detail = std::to_string(compared) + "/5 compared [" + branches + "], max difference " +
               fmt("%.3e", worst_diff) + ", max difference / tolerance " + fmt("%.2e", worst_ratio);
  return out;
}

Outcome degenerate_family() {
  Outcome out;
  const double h = 1.0 / 512;
  // Uniform weights give D = 2 at every scale; weights h sqrt|t| give D = (4/3) sqrt(r).
  const DiscreteMeasure flat = segment(0.0, 1.5, h);
  std::vector<Atom> atoms;
  for (const Atom& a : flat.atoms()) atoms.push_back({a.x, a.w * std::sqrt(std::abs(a.x(0)))});
  const DiscreteMeasure vanishing(2, 1.0, h, std::move(atoms));
  const std::vector<Candidate> zero{{empty_measure(2, 1.0, h), 0.0, "zero"}};
  const std::vector<double> radii{0.25, 0.125, 0.0625, 0.03125};

  auto curve = [&](const DiscreteMeasure& mu, double& identity_err) {
    std::vector<double> vals;
    for (double r : radii) {
      const Ball b(kOrigin, r);
      const double a = alpha_general(mu, b, zero).result.value;
      std::vector<LpCoefficient> cs;
      for (const Atom& at : mu.atoms()) cs.push_back({at.x, plateau_bump(distance(at.x, kOrigin) / r) * at.w / r});
      identity_err = std::max(identity_err, std::abs(a - lipschitz_dual_sup(cs, kOrigin, r).value));
      vals.push_back(a);
    }
    return vals;
  };
  double err = 0.0;
  const auto dec = curve(vanishing, err), steady = curve(flat, err);
  // sqrt(r) decay over a factor 8 in r is 0.35; 0.5 leaves room for quadrature.
  bool decreasing = dec.back() <= 0.5 * dec.front();
  for (std::size_t i = 1; i < dec.size(); ++i) decreasing = decreasing && dec[i] < dec[i - 1];
  const double lo = *std::min_element(steady.begin(), steady.end()), hi = *std::max_element(steady.begin(), steady.end());
  const bool bounded_below = lo >= 0.5 * hi && lo > 0.0;
  out.pass = err <= 1e-12 && decreasing && bounded_below;
  out.detail = "identity error " + fmt("%.1e", err) + ", D->0 curve " + fmt("%.3f", dec.front()) + " -> " +
               fmt("%.3f", dec.back()) + ", D=2 curve in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]";
  return out;
}

// First run measured 3.154753; the floor sits 5% below.
constexpr double kCantorFloor = 3.0;

Outcome cantor_floor() {
  const DiscreteMeasure mu = make_cantor4_measure(5, 1.0);
  const double a = alpha_flat(mu, Ball(make_point({0.5, 0.5}), 1.0 / 8)).value;
  return {a > kCantorFloor, "alpha_flat = " + fmt("%.6f", a) + ", floor " + fmt("%.4f", kCantorFloor)};
}

Outcome determinism() {
  const std::string path = std::string(CZO_SCENARIO_DIR) + "/flat_segment.json";
  const auto dir = std::filesystem::temp_directory_path() / "czo_acceptance_determinism";
  std::vector<std::vector<std::string>> bytes;
  for (int run = 0; run < 2; ++run) {
    const auto out = dir / std::to_string(run);
    std::filesystem::remove_all(out);
    const RunResult res = run_scenario(load_scenario(path));
    emit_plots_data(res, out);
    std::vector<std::string> files;
    for (const auto& f : res.files) {
      std::ifstream in(out / f.name, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      files.push_back(ss.str());
    }
    bytes.push_back(std::move(files));
  }
  std::filesystem::remove_all(dir);
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {same, std::to_string(bytes[0].size()) + " CSV files, " + (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "kernel axioms", 1.0, kernel_axioms},
      {2, "LP oracle equivalence", 30.0, lp_oracle},
      {3, "alpha self-distance", 10.0, alpha_self_distance},
      {4, "scaling identity", 30.0, scaling_identity},
      {5, "flat decay and trace", 120.0, flat_decay},
      {6, "spike symmetry", 60.0, spike_symmetry},
      {7, "spike never worse than flat", 120.0, spike_vs_flat},
      {8, "thin shell", 10.0, thin_shell},
      {9, "David-Mattila chain", 10.0, david_mattila},
      {10, "cutoff kernel bound", 5.0, cutoff_bound},
      {11, "pipeline comparison", 300.0, pipeline_claim},
      {12, "degenerate family", 60.0, degenerate_family},
      {13, "non-flat floor", 120.0, cantor_floor},
      {14, "determinism", 60.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %2d %-28s %s  %s; %.2f s of %.0f s%s\n", c.id, c.name.c_str(), pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
