#include "czo/scales.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace czo;

namespace {

const Point kOrigin = make_point({0.0, 0.0});

DiscreteMeasure segment(const Point& center, double half, double h, double weight_scale = 1.0) {
  const DiscreteMeasure seg = make_segment_measure(center, make_point({1.0, 0.0}), half, h);
  std::vector<Atom> atoms(seg.atoms().begin(), seg.atoms().end());
  for (Atom& a : atoms) a.w *= weight_scale;
  return {2, 1.0, h, std::move(atoms)};
}

double D(const DiscreteMeasure& mu, const Point& x, double rho) {
  return variation_mass(mu, Ball(x, rho)) / std::pow(rho, mu.s());
}

// D(B(x, A^{-l})) = (0.9 / A)^l D0 for l <= 2 from one atom per annulus, and
// inside B(x, A^{-3}) a short segment whose density is flat at smaller scales.
DiscreteMeasure geometric_then_flat(double A, double D0, double h) {
  auto target = [&](int l) { return std::pow(0.9 / A, l) * D0; };
  auto mass = [&](int l) { return target(l) * std::pow(A, -l); };
  const double half = 0.45 * std::pow(A, -3);
  const double lambda = 0.5 * target(3);
  const DiscreteMeasure seg = segment(kOrigin, half, h, lambda);
  std::vector<Atom> atoms(seg.atoms().begin(), seg.atoms().end());
  double inner = std::abs(seg.total_mass());
  for (int l = 2; l >= 0; --l) {
    const double rad = 0.9 * std::pow(A, -l);
    const double m = mass(l) - inner;
    atoms.push_back({make_point({rad * std::cos(l + 1.0), rad * std::sin(l + 1.0)}), m});
    inner = mass(l);
  }
  return {2, 1.0, h, std::move(atoms)};
}

}  // namespace

TEST(ScaleParams, PaperDefaultsAndPresets) {
  const ScaleParams p;
  EXPECT_EQ(p.M, 4096);
  EXPECT_NEAR(p.theta, 4.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(p.A, std::ldexp(1.0, 30) * p.theta, 1e-3);
  EXPECT_EQ(p.shell_width, 1024.0);
  EXPECT_EQ(p.density_window, std::ldexp(1.0, 50));
  EXPECT_NEAR(p.theta_R(), 64.0 * p.theta, 1e-12);
  EXPECT_NO_THROW(p.validate());
  for (const char* name : {"coarse", "default", "fine"}) {
    const ScaleParams q = ScaleParams::named(name);
    EXPECT_NO_THROW(q.validate()) << name;
    EXPECT_EQ(q.to_json()["preset"], name);
  }
  EXPECT_THROW(ScaleParams::named("huge"), InputError);
}

TEST(ScaleParams, ValidationRejectsBadKnobs) {
  ScaleParams p;
  p.M = 7;
  EXPECT_THROW(p.validate(), InputError);
  p = ScaleParams{};
  p.A = 1.0;
  EXPECT_THROW(p.validate(), InputError);
  p = ScaleParams{};
  p.epsilon = 1.0;
  EXPECT_THROW(p.validate(), InputError);
}

TEST(ThinShell, EmptyFarFieldAcceptsTheFirstShell) {
  const DiscreteMeasure mu = segment(kOrigin, 1.0, 1.0 / 64);
  const ThinShell t = find_thin_shell(mu, kOrigin, 0.25, 8, 4.0);
  EXPECT_EQ(t.j, 1);
  EXPECT_EQ(t.M_prime, 8 + 4);
  EXPECT_EQ(t.annulus_mass, 0.0);
}

TEST(ThinShell, SegmentMatchesDirectCount) {
  const double h = 1.0 / 64, r = 1.0 / 1024;
  const int M = 4;
  const double w = 1024.0;
  const DiscreteMeasure mu = segment(make_point({0.3, 0.0}), 10.0, h);
  const Point x = make_point({0.1, 0.0});
  const ThinShell t = find_thin_shell(mu, x, r, M, w);

  auto count = [&](double lo, double hi) {
    double m = 0.0;
    for (const Atom& a : mu.atoms()) {
      const double d = std::abs(a.x(0) - x(0));
      if (d >= lo && d < hi) m += h;
    }
    return m;
  };
  const double bound = 2.0 / M * count(0.0, 2.0 * w * M * r);
  EXPECT_NEAR(t.bound, bound, 1e-12);
  int first = 0;
  for (int j = 1; j <= M / 2 && first == 0; ++j)
    if (count((M + 2.0 * (j - 1) * w) * r, (M + 2.0 * j * w) * r) <= bound) first = j;
  ASSERT_GT(first, 0);
  EXPECT_EQ(t.j, first);
  EXPECT_EQ(t.M_prime % 2, 0);
  EXPECT_NEAR(t.annulus_mass, count((t.M_prime - w) * r, (t.M_prime + w) * r), 1e-12);
  EXPECT_LE(t.annulus_mass, t.bound);
}

TEST(ThinShell, AdversarialAnnulusAtom) {
  const int M = 4;
  const double w = 1024.0, r = 1.0;
  // A heavy atom in the first shell forces the scan to the second, which
  // holds the lighter atom at (M + 3w) r.
  const DiscreteMeasure mu(2, 1.0, 0.01,
                           {{make_point({(M + w) * r, 0.0}), 1.5}, {make_point({0.0, (M + 3 * w) * r}), 1.0}});
  const ThinShell t = find_thin_shell(mu, kOrigin, r, M, w);
  EXPECT_EQ(t.j, 2);
  EXPECT_EQ(t.M_prime, M + 3 * static_cast<int>(w));
  EXPECT_EQ(t.annulus_mass, 1.0);
  EXPECT_EQ(t.bound, 1.25);

  // Equal weights tie with the bound, and ties are accepted.
  const DiscreteMeasure tie(2, 1.0, 0.01,
                            {{make_point({(M + w) * r, 0.0}), 1.0}, {make_point({0.0, (M + 3 * w) * r}), 1.0}});
  EXPECT_EQ(find_thin_shell(tie, kOrigin, r, M, w).j, 1);
}

TEST(ThinShell, RandomMeasuresSatisfyTheBound) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int M = 2 * (2 + trial % 6);
    const double w = 1.0 + trial % 4;
    std::vector<Atom> atoms;
    const double reach = 2.0 * w * M;
    for (int i = 0; i < 40; ++i) {
      const double rad = reach * std::pow(u(rng), 0.3), ang = 2.0 * std::numbers::pi * u(rng);
      atoms.push_back({make_point({rad * std::cos(ang), rad * std::sin(ang)}), u(rng)});
    }
    const DiscreteMeasure mu(2, 1.0, 1e-3, atoms);
    const ThinShell t = find_thin_shell(mu, kOrigin, 1.0, M, w);
    EXPECT_LE(t.annulus_mass, t.bound);
    EXPECT_GE(t.M_prime, M + w);
    EXPECT_LE(t.M_prime, 2.0 * w * M);
  }
}

TEST(ThinShell, RejectsOddM) {
  EXPECT_THROW(find_thin_shell(segment(kOrigin, 1.0, 0.1), kOrigin, 1.0, 5), InputError);
}

TEST(Doubling, DenseAtomIsCaseTwo) {
  const ScaleParams p = ScaleParams::named("coarse");
  const DiscreteMeasure mu(2, 1.0, 1e-3, {{kOrigin, p.epsilon * 1.0}});
  const DoublingOutcome o = reduce_to_doubling(mu, kOrigin, 1.0, p);
  EXPECT_EQ(o.kind, DoublingCase::case2_dense);
  EXPECT_EQ(o.r0, 1.0);
  EXPECT_EQ(o.L, 0);
  EXPECT_TRUE(o.doubling_holds);
}

TEST(Doubling, EmptyBallIsAbsolutelyConvergent) {
  const ScaleParams p = ScaleParams::named("coarse");
  const DiscreteMeasure mu(2, 1.0, 1e-3, {{make_point({3.0, 0.0}), 1.0}});
  const DoublingOutcome o = reduce_to_doubling(mu, kOrigin, 1.0, p);
  EXPECT_EQ(o.kind, DoublingCase::absolutely_convergent);
  EXPECT_EQ(o.to_json()["case"], "absolutely_convergent");
}

TEST(Doubling, GeometricDecayThenFlat) {
  ScaleParams p = ScaleParams::named("coarse");
  const double A = p.A;
  const DiscreteMeasure mu = geometric_then_flat(A, 0.2, 1.0 / 8192);
  const DoublingOutcome o = reduce_to_doubling(mu, kOrigin, 1.0, p);
  EXPECT_EQ(o.kind, DoublingCase::case1_doubling);
  EXPECT_EQ(o.L, 3);
  EXPECT_NEAR(o.r0, std::pow(A, -4), 1e-15);
  EXPECT_TRUE(o.doubling_holds);
  EXPECT_LE(D(mu, kOrigin, A * o.r0), A * D(mu, kOrigin, o.r0) * (1 + 1e-12));
  // Every descended level was non-doubling.
  for (int l = 0; l < o.L; ++l) EXPECT_GT(D(mu, kOrigin, std::pow(A, -l)), A * D(mu, kOrigin, std::pow(A, -l - 1)));
}

TEST(Doubling, IsolatedAtomDecaysToAbsoluteConvergence) {
  const ScaleParams p = ScaleParams::named("coarse");
  const DiscreteMeasure mu(2, 1.0, 1e-3, {{make_point({0.6, 0.0}), 0.1}});
  const DoublingOutcome o = reduce_to_doubling(mu, kOrigin, 1.0, p);
  EXPECT_EQ(o.kind, DoublingCase::absolutely_convergent);
  EXPECT_EQ(o.L, 1);
}

TEST(Doubling, ResolutionPrecondition) {
  const ScaleParams p = ScaleParams::named("coarse");
  EXPECT_THROW(reduce_to_doubling(segment(kOrigin, 1.0, 0.1), kOrigin, 0.5, p), InputError);
}

TEST(AveragingScale, LineIsSymmetricAtScaleOne) {
  const ScaleParams p = ScaleParams::named("default");
  const double h = 1.0 / 64, r0 = 1.0 / 16;
  const DiscreteMeasure nu = segment(kOrigin, 4.0, h);
  const DiscreteMeasure mu = segment(kOrigin, 4.0, h / 2);
  const Point x = make_point({0.25, 0.0});
  const AlphaResult a = alpha_mu_nu(mu, nu, Ball(x, p.M * r0));
  const AveragingChoice c = choose_averaging_scale(mu, nu, x, r0, p, a);
  EXPECT_EQ(c.branch, AveragingBranch::refl_at_scale_1);
  EXPECT_EQ(c.x_tilde, x);
  EXPECT_EQ(c.R, 1.0);
  EXPECT_LE(c.scale1_defect, c.defect_tolerance);
}

TEST(AveragingScale, SpikeMovesToItsVertex) {
  ScaleParams p = ScaleParams::named("coarse");
  const double h = 1.0 / 64, r0 = 0.25;
  SpikeParams sp;
  sp.k = 3;
  sp.m = 3;
  const DiscreteMeasure nu = make_spike_measure(sp, 4.0, h);
  const Point x = make_point({r0 / std::sin(std::numbers::pi / 3), 0.0});
  const AlphaResult a = alpha_mu_nu(nu, nu, Ball(x, p.M * r0));
  const AveragingChoice c = choose_averaging_scale(nu, nu, x, r0, p, a, 1e-9);
  EXPECT_EQ(c.branch, AveragingBranch::refl_at_theta_scale);
  EXPECT_LT(c.x_tilde.norm(), 1e-12);
  EXPECT_EQ(c.R, p.theta_R());
  EXPECT_LT(distance(c.x_tilde, x), (p.refl_radius * p.theta + 1.0) * r0);
  EXPECT_GT(c.scale1_defect, c.defect_tolerance);
}

TEST(AveragingScale, LowDensityWithoutComparisonSupport) {
  const ScaleParams p = ScaleParams::named("default");
  const DiscreteMeasure mu(2, 1.0, 1e-3, {{make_point({0.5, 0.0}), 1e-4}});
  const DiscreteMeasure nu = empty_measure(2, 1.0, 1e-3);
  const AlphaResult a = alpha_mu_nu(mu, nu, Ball(kOrigin, 0.5));
  ASSERT_LT(a.value, p.alpha_thresh);
  const AveragingChoice c = choose_averaging_scale(mu, nu, kOrigin, 0.0625, p, a);
  EXPECT_EQ(c.branch, AveragingBranch::low_density);
  EXPECT_EQ(c.x_tilde, kOrigin);
  EXPECT_LE(c.density, p.density_constant * p.epsilon);
  EXPECT_EQ(c.to_json()["branch"], "low_density");
}

TEST(AveragingScale, AlternativeFailedCarriesDiagnostics) {
  const ScaleParams p = ScaleParams::named("default");
  const DiscreteMeasure mu(2, 1.0, 1e-3, {{make_point({0.01, 0.0}), 10.0}});
  const DiscreteMeasure nu = empty_measure(2, 1.0, 1e-3);
  AlphaResult a;
  a.value = 0.0;
  try {
    choose_averaging_scale(mu, nu, kOrigin, 0.0625, p, a);
    FAIL() << "expected AlternativeFailed";
  } catch (const AlternativeFailed& e) {
    EXPECT_GT(e.diagnostics().density, p.density_constant * p.epsilon);
  }
}

TEST(AveragingScale, RequiresSmallAlpha) {
  const ScaleParams p = ScaleParams::named("default");
  AlphaResult a;
  a.value = 0.9;
  const DiscreteMeasure mu = segment(kOrigin, 1.0, 1.0 / 64);
  EXPECT_THROW(choose_averaging_scale(mu, mu, kOrigin, 0.0625, p, a), InputError);
}
