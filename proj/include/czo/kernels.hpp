#pragma once

// The s-Riesz kernel x / |x|^{s+1} and the Huovinen kernels z^k / |z|^{k+1}.
// Both are odd and satisfy |K(x)| = |x|^{-s}, so C_K = 1.

#include "czo/core.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <string>
#include <variant>

namespace czo {

class RieszKernel {
 public:
  using value_type = CVector;

  RieszKernel(double s, int dim) : s_(s), dim_(dim) {
    if (dim < 1 || dim > kMaxDim) throw InputError("Riesz kernel dimension out of range");
    if (!(s > 0.0) || !(s < dim)) throw InputError("Riesz kernel requires 0 < s < d");
  }

  value_type operator()(const Point& x) const {
    const double n = x.norm();
    if (n == 0.0) throw DomainError("kernel evaluated at the origin");
    return to_complex(x / std::pow(n, s_ + 1.0));
  }

  value_type zero() const { return CVector::Zero(dim_); }

  double s() const noexcept { return s_; }
  int dim() const noexcept { return dim_; }
  double c_k() const noexcept { return 1.0; }
  /// |K(x) - K(x')| <= C_smooth |x - x'| / |x|^{s+1} whenever |x - x'| <= |x| / 2.
  double c_smooth() const noexcept { return std::max(1.0, s_) * std::pow(2.0, s_ + 1.0); }
  std::string name() const { return "riesz(s=" + fmt_num(s_) + ",d=" + std::to_string(dim_) + ")"; }
  nlohmann::json to_json() const { return {{"family", "riesz"}, {"s", s_}, {"dim", dim_}}; }

 private:
  static std::string fmt_num(double v) { return nlohmann::json(v).dump(); }

  double s_;
  int dim_;
};

class HuovinenKernel {
 public:
  using value_type = Complex;

  explicit HuovinenKernel(int k) : k_(k) {
    if (k < 1 || k % 2 == 0) throw InputError("Huovinen kernel order must be odd and >= 1");
  }

  value_type operator()(const Point& x) const {
    if (x.size() != 2) throw InputError("Huovinen kernel is planar");
    const double n = x.norm();
    if (n == 0.0) throw DomainError("kernel evaluated at the origin");
    // Repeated multiplication keeps K(-z) = -K(z) exact for odd k.
    const Complex u(x(0) / n, x(1) / n);
    Complex p = u;
    for (int i = 1; i < k_; ++i) p *= u;
    return p / n;
  }

  value_type zero() const { return 0.0; }

  int k() const noexcept { return k_; }
  double s() const noexcept { return 1.0; }
  int dim() const noexcept { return 2; }
  double c_k() const noexcept { return 1.0; }
  double c_smooth() const noexcept { return 2.0 * (k_ + 1); }
  std::string name() const { return "huovinen(k=" + std::to_string(k_) + ")"; }
  nlohmann::json to_json() const { return {{"family", "huovinen"}, {"k", k_}}; }

 private:
  int k_;
};

using AnyKernel = std::variant<RieszKernel, HuovinenKernel>;

inline AnyKernel kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw InputError("kernel spec needs a string field 'family'");
  const std::string family = j["family"].get<std::string>();
  if (family == "riesz") {
    if (!j.contains("s") || !j["s"].is_number()) throw InputError("riesz kernel needs numeric 's'");
    if (!j.contains("dim") || !j["dim"].is_number_integer()) throw InputError("riesz kernel needs integer 'dim'");
    return RieszKernel(j["s"].get<double>(), j["dim"].get<int>());
  }
  if (family == "huovinen") {
    if (!j.contains("k") || !j["k"].is_number_integer()) throw InputError("huovinen kernel needs integer 'k'");
    return HuovinenKernel(j["k"].get<int>());
  }
  throw InputError("unknown kernel family '" + family + "'");
}

inline nlohmann::json kernel_to_json(const AnyKernel& k) {
  return std::visit([](const auto& kk) { return kk.to_json(); }, k);
}

inline double kernel_s(const AnyKernel& k) {
  return std::visit([](const auto& kk) { return kk.s(); }, k);
}

inline int kernel_dim(const AnyKernel& k) {
  return std::visit([](const auto& kk) { return kk.dim(); }, k);
}

// ---------------------------------------------------------------------------
// Axiom checks

struct AxiomReport {
  std::size_t samples = 0;
  double size_ratio = 0.0;          ///< max |K(x)| |x|^s
  double antisymmetry_defect = 0.0; ///< max |K(-x) + K(x)| |x|^s
  double smoothness_ratio = 0.0;    ///< max |K(x) - K(x')| |x|^{s+1} / |x - x'|
  double c_k = 0.0;
  double c_smooth = 0.0;
  Point size_witness;
  Point antisymmetry_witness;
  Point smoothness_witness;
  Point smoothness_witness_pair;

  bool size_ok(double tol) const { return size_ratio <= c_k * (1.0 + tol); }
  bool smoothness_ok() const { return smoothness_ratio <= c_smooth; }
};

/// Samples x with |x| log-uniform in radius_range and x' with
/// 0 < |x - x'| <= |x| / 2. Deterministic in seed.
template <class Kernel>
AxiomReport verify_axioms(const Kernel& kernel, std::size_t sample_count, std::pair<double, double> radius_range,
                          std::uint64_t seed) {
  if (sample_count < 1) throw InputError("sample_count must be at least 1");
  auto [r_lo, r_hi] = radius_range;
  if (!(r_lo > 0.0) || !(r_hi >= r_lo)) throw InputError("radius range must satisfy 0 < lo <= hi");
  const int d = kernel.dim();
  const double s = kernel.s();
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

  AxiomReport rep;
  rep.samples = sample_count;
  rep.c_k = kernel.c_k();
  rep.c_smooth = kernel.c_smooth();
  rep.size_witness = rep.antisymmetry_witness = rep.smoothness_witness = rep.smoothness_witness_pair = zero_point(d);
  const double log_lo = std::log(r_lo), log_hi = std::log(r_hi);
  for (std::size_t n = 0; n < sample_count; ++n) {
    const double rad = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
    const Point x = rad * direction();
    const auto kx = kernel(x);
    const double xs = std::pow(x.norm(), s);

    if (const double v = magnitude(kx) * xs; v > rep.size_ratio) {
      rep.size_ratio = v;
      rep.size_witness = x;
    }
    if (const double v = magnitude(kernel(Point(-x)) + kx) * xs; v > rep.antisymmetry_defect) {
      rep.antisymmetry_defect = v;
      rep.antisymmetry_witness = x;
    }
    double step = 0.5 * x.norm() * (1.0 - unit(rng));
    if (step == 0.0) step = 0.5 * x.norm();
    const Point xp = x + step * direction();
    const double v = magnitude(kernel(xp) - kx) * xs * x.norm() / distance(x, xp);
    if (v > rep.smoothness_ratio) {
      rep.smoothness_ratio = v;
      rep.smoothness_witness = x;
      rep.smoothness_witness_pair = xp;
    }
  }
  return rep;
}

}  // namespace czo
