#include "czo/kernels.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace czo;

namespace {

Point random_point(std::mt19937_64& rng, int d, double scale = 1.0) {
  std::normal_distribution<double> g;
  Point p(d);
  for (int i = 0; i < d; ++i) p(i) = scale * g(rng);
  return p;
}

// Grid maximum of the smoothness ratio over |x| = 1 and |x - x'| <= 1/2, the
// oracle from which the frozen constants below were taken.
template <class K>
double smoothness_grid_max(const K& k) {
  double best = 0.0;
  const int d = k.dim();
  Point x = zero_point(d);
  x(0) = 1.0;
  for (int a = 1; a <= 200; ++a) {
    const double rad = 0.5 * a / 200.0;
    for (int b = 0; b < 720; ++b) {
      const double t = 2.0 * std::numbers::pi * b / 720.0;
      Point xp = x;
      xp(0) += rad * std::cos(t);
      xp(1) += rad * std::sin(t);
      best = std::max(best, magnitude(k(xp) - k(x)) / rad);
    }
  }
  return best;
}

}  // namespace

TEST(Riesz, UnitVectorIsFixed) {
  const RieszKernel k(1.0, 2);
  const CVector v = k(make_point({1, 0}));
  EXPECT_EQ(v(0), Complex(1.0));
  EXPECT_EQ(v(1), Complex(0.0));
}

TEST(Huovinen, CubeOfI) {
  const HuovinenKernel k(3);
  const Complex v = k(make_point({0, 1}));
  EXPECT_NEAR(v.real(), 0.0, 1e-15);
  EXPECT_NEAR(v.imag(), -1.0, 1e-15);
}

TEST(Kernels, OriginIsADomainError) {
  EXPECT_THROW(RieszKernel(1.0, 2)(zero_point(2)), DomainError);
  EXPECT_THROW(HuovinenKernel(3)(zero_point(2)), DomainError);
}

TEST(Kernels, InvalidParameters) {
  EXPECT_THROW(RieszKernel(2.0, 2), InputError);
  EXPECT_THROW(RieszKernel(0.0, 2), InputError);
  EXPECT_THROW(HuovinenKernel(2), InputError);
  EXPECT_THROW(HuovinenKernel(-1), InputError);
}

TEST(Kernels, OddAtRandomPoints) {
  std::mt19937_64 rng(11);
  const RieszKernel r(1.5, 3);
  const HuovinenKernel h(5);
  for (int i = 0; i < 100; ++i) {
    const Point x3 = random_point(rng, 3), x2 = random_point(rng, 2);
    EXPECT_EQ(magnitude(CVector(r(Point(-x3)) + r(x3))), 0.0);
    EXPECT_EQ(std::abs(h(Point(-x2)) + h(x2)), 0.0);
  }
}

TEST(Kernels, HomogeneityAndRescaling) {
  std::mt19937_64 rng(3);
  const RieszKernel r(0.7, 3);
  const HuovinenKernel h(3);
  for (int i = 0; i < 100; ++i) {
    const Point x3 = random_point(rng, 3), x2 = random_point(rng, 2);
    const double lambda = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
    const CVector a = std::pow(lambda, r.s()) * r(Point(lambda * x3));
    EXPECT_LT(magnitude(CVector(a - r(x3))), 1e-13 * magnitude(r(x3)));
    const Complex b = lambda * h(Point(lambda * x2));
    EXPECT_LT(std::abs(b - h(x2)), 1e-13 * std::abs(h(x2)));
    EXPECT_NEAR(std::arg(h(Point(lambda * x2))), std::arg(h(x2)), 1e-12);
  }
}

TEST(Kernels, SizeRatioIsOne) {
  const auto rep = verify_axioms(RieszKernel(1.0, 2), 1000, {1e-3, 1e3}, 5);
  EXPECT_NEAR(rep.size_ratio, 1.0, 1e-14);
  EXPECT_TRUE(rep.size_ok(1e-12));
}

TEST(Kernels, AxiomReportIsDeterministic) {
  const auto a = verify_axioms(HuovinenKernel(5), 2000, {0.1, 10.0}, 42);
  const auto b = verify_axioms(HuovinenKernel(5), 2000, {0.1, 10.0}, 42);
  EXPECT_EQ(a.smoothness_ratio, b.smoothness_ratio);
  EXPECT_EQ(a.size_ratio, b.size_ratio);
  EXPECT_EQ(a.smoothness_witness, b.smoothness_witness);
}

TEST(Kernels, SmoothnessConstantsDominateGridMaxima) {
  struct Case {
    AnyKernel k;
    double frozen;
  };
  const Case cases[] = {{RieszKernel(0.5, 2), 1.1189}, {RieszKernel(1.0, 2), 2.0},   {RieszKernel(1.5, 2), 3.6569},
                        {RieszKernel(1.9, 2), 5.4643}, {HuovinenKernel(1), 2.0},     {HuovinenKernel(3), 3.2831},
                        {HuovinenKernel(5), 5.0},      {HuovinenKernel(7), 7.0}};
  for (const auto& c : cases) {
    std::visit(
        [&](const auto& k) {
          const double grid = smoothness_grid_max(k);
          EXPECT_NEAR(grid, c.frozen, 1e-3) << k.name();
          EXPECT_LE(grid, k.c_smooth()) << k.name();
          const auto rep = verify_axioms(k, 10000, {1e-2, 1e2}, 9);
          EXPECT_LE(rep.smoothness_ratio, c.frozen * 1.01) << k.name();
        },
        c.k);
  }
}

TEST(Kernels, JsonSpecRoundTrip) {
  const AnyKernel a = kernel_from_json(nlohmann::json{{"family", "riesz"}, {"s", 1.5}, {"dim", 3}});
  EXPECT_EQ(kernel_s(a), 1.5);
  EXPECT_EQ(kernel_dim(a), 3);
  EXPECT_EQ(kernel_to_json(a), (nlohmann::json{{"family", "riesz"}, {"s", 1.5}, {"dim", 3}}));
  const AnyKernel b = kernel_from_json(nlohmann::json{{"family", "huovinen"}, {"k", 5}});
  EXPECT_EQ(kernel_s(b), 1.0);
  EXPECT_THROW(kernel_from_json(nlohmann::json{{"family", "other"}}), InputError);
  EXPECT_THROW(kernel_from_json(nlohmann::json{{"family", "huovinen"}, {"k", 1.5}}), InputError);
}
