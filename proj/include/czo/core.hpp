#pragma once

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace czo {

/// Largest ambient dimension supported. Points live on the stack.
inline constexpr int kMaxDim = 8;

using Complex = std::complex<double>;
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using CVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

// ---------------------------------------------------------------------------
// Errors

/// Caller supplied arguments violating a documented precondition.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Evaluation outside the domain of a function (kernel at the origin).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// An average over a set of zero mass was requested.
struct UndefinedAverageError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to reach its stated tolerance.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the line and the offending field path.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, std::string field)
      : std::runtime_error(format(what, line, field)), line_(line), field_(std::move(field)) {}

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& field) {
    std::string out = "parse error";
    if (line > 0) out += " at line " + std::to_string(line);
    if (!field.empty()) out += " in field '" + field + "'";
    return out + ": " + what;
  }

  int line_;
  std::string field_;
};

// ---------------------------------------------------------------------------
// Geometry

inline Point make_point(std::initializer_list<double> coords) {
  Point p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) p(i++) = c;
  return p;
}

inline Point zero_point(int dim) { return Point::Zero(dim); }

/// The one distance used everywhere, so that breakpoint radii and open-ball
/// membership tests agree bit for bit.
inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }

inline bool all_finite(const Point& p) {
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!std::isfinite(p(i))) return false;
  return true;
}

/// Open ball B(center, radius).
class Ball {
 public:
  Ball(Point center, double radius) : center_(std::move(center)), radius_(radius) {
    if (!(radius > 0.0) || !std::isfinite(radius))
      throw InputError("ball radius must be positive and finite");
  }

  const Point& center() const noexcept { return center_; }
  double radius() const noexcept { return radius_; }
  int dim() const noexcept { return static_cast<int>(center_.size()); }

  bool contains(const Point& p) const { return distance(p, center_) < radius_; }

 private:
  Point center_;
  double radius_;
};

// ---------------------------------------------------------------------------
// Value arithmetic shared by vector- and complex-valued kernels

inline double magnitude(const Complex& v) { return std::abs(v); }
inline double magnitude(const CVector& v) { return v.norm(); }

/// Components of a kernel value, for serialization.
inline std::vector<Complex> components(const Complex& v) { return {v}; }
inline std::vector<Complex> components(const CVector& v) {
  return std::vector<Complex>(v.data(), v.data() + v.size());
}

/// Real inner product Re<a, b>, used to compare increment directions.
inline double real_dot(const Complex& a, const Complex& b) { return (std::conj(a) * b).real(); }
inline double real_dot(const CVector& a, const CVector& b) { return a.dot(b).real(); }

inline CVector to_complex(const Point& p) { return p.cast<Complex>(); }

}  // namespace czo
