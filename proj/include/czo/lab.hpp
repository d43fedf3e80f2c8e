#pragma once

// Scenario runner: builds measures, sweeps points and radii, and writes
// deterministic CSV curves plus a manifest and a JSON-lines run log.

#include "czo/kernels.hpp"
#include "czo/lipschitz_dual.hpp"
#include "czo/measure_io.hpp"
#include "czo/measures.hpp"
#include "czo/scales.hpp"
#include "czo/symmetry.hpp"
#include "czo/transforms.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace czo {

/// Invalid scenario configuration; lists every offending field.
class ConfigError : public InputError {
 public:
  explicit ConfigError(std::vector<std::string> fields)
      : InputError("invalid scenario: " + join(fields)), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& f : v) out += (out.empty() ? "" : "; ") + f;
    return out;
  }
  std::vector<std::string> fields_;
};

namespace detail {

inline Point json_point(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim))
    throw InputError(field + ": expected an array of 1 to 8 numbers");
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(field + "[" + std::to_string(i) + "]: expected a number");
    p(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  if (!all_finite(p)) throw InputError(field + ": coordinates must be finite");
  return p;
}

inline double json_number(const nlohmann::json& params, const char* key, std::optional<double> fallback = {}) {
  if (!params.contains(key)) {
    if (fallback) return *fallback;
    throw InputError(std::string("missing parameter '") + key + "'");
  }
  if (!params[key].is_number()) throw InputError(std::string("parameter '") + key + "' must be a number");
  return params[key].get<double>();
}

inline int json_int(const nlohmann::json& params, const char* key, std::optional<int> fallback = {}) {
  if (!params.contains(key)) {
    if (fallback) return *fallback;
    throw InputError(std::string("missing parameter '") + key + "'");
  }
  if (!params[key].is_number_integer()) throw InputError(std::string("parameter '") + key + "' must be an integer");
  return params[key].get<int>();
}

inline Point unit_x(int dim) {
  Point e = zero_point(dim);
  e(0) = 1.0;
  return e;
}

}  // namespace detail

/// Segment whose atoms are displaced along the normal by
/// amplitude sin(2 pi t / wavelength), t the arclength coordinate. Planar only.
inline DiscreteMeasure make_perturbed_segment(const Point& center, const Point& direction, double half_length,
                                              double h, double amplitude, double wavelength) {
  if (center.size() != 2) throw InputError("perturbed_segment is planar");
  if (!(wavelength > 0.0)) throw InputError("wavelength must be positive");
  const DiscreteMeasure base = make_segment_measure(center, direction, half_length, h);
  if (amplitude == 0.0) return base;
  const Point normal = make_point({-direction(1), direction(0)});
  std::vector<Atom> atoms;
  atoms.reserve(base.size());
  for (const Atom& a : base.atoms()) {
    const double t = (a.x - center).dot(direction);
    atoms.push_back({a.x + (amplitude * std::sin(2.0 * std::numbers::pi * t / wavelength)) * normal, a.w});
  }
  return {2, 1.0, h, std::move(atoms)};
}

/// Built-in generators: segment, plane, spike, cantor4, perturbed_segment, empty.
inline DiscreteMeasure builtin_measure(const std::string& name, const nlohmann::json& params) {
  using detail::json_int;
  using detail::json_number;
  if (!params.is_object()) throw InputError("measure params must be an object");
  auto point_or = [&](const char* key, const Point& fallback) {
    return params.contains(key) ? detail::json_point(params[key], key) : fallback;
  };
  if (name == "segment" || name == "perturbed_segment") {
    const Point c = point_or("center", zero_point(2));
    Point dir = point_or("direction", detail::unit_x(static_cast<int>(c.size())));
    if (dir.size() != c.size()) throw InputError("direction and center dimensions differ");
    if (dir.norm() == 0.0) throw InputError("direction must be non-zero");
    dir /= dir.norm();
    const double half = json_number(params, "half_length"), h = json_number(params, "h");
    if (name == "segment") return make_segment_measure(c, dir, half, h);
    return make_perturbed_segment(c, dir, half, h, json_number(params, "amplitude", 0.0),
                                  json_number(params, "wavelength", 1.0));
  }
  if (name == "plane") {
    const Point base = point_or("base", zero_point(3));
    if (!params.contains("basis") || !params["basis"].is_array()) throw InputError("plane needs 'basis'");
    std::vector<Point> basis;
    for (std::size_t i = 0; i < params["basis"].size(); ++i)
      basis.push_back(detail::json_point(params["basis"][i], "basis[" + std::to_string(i) + "]"));
    return make_plane_measure(base, basis, json_number(params, "extent"), json_number(params, "h"));
  }
  if (name == "spike") {
    SpikeParams p;
    p.k = json_int(params, "k");
    p.m = json_int(params, "m", p.k);
    p.angle = json_number(params, "angle", 0.0);
    p.vertex = point_or("vertex", zero_point(2));
    p.scale = json_number(params, "scale", 1.0);
    return make_spike_measure(p, json_number(params, "extent"), json_number(params, "h"));
  }
  if (name == "cantor4") return make_cantor4_measure(json_int(params, "level"), json_number(params, "side", 1.0));
  if (name == "empty")
    return empty_measure(json_int(params, "dim", 2), json_number(params, "s", 1.0), json_number(params, "resolution"));
  throw InputError("unknown builtin measure '" + name + "'");
}

// ---------------------------------------------------------------------------
// Scenarios

inline const std::vector<std::string>& known_analyses() {
  static const std::vector<std::string> names{"trace", "alpha_flat", "alpha_spike", "alpha_fixed", "symmetry",
                                              "pipeline"};
  return names;
}

struct Scenario {
  nlohmann::json raw;
  std::filesystem::path base_dir;
  std::string name = "scenario";
  std::uint64_t seed = 0;
  DiscreteMeasure measure = empty_measure(2, 1.0, 1.0);
  AnyKernel kernel = RieszKernel(1.0, 2);
  std::vector<Point> points;
  double r_max = 0.0;
  double rho = 0.5;
  int count = 1;
  std::vector<std::string> analyses;
  int spike_k = 3;
  std::optional<DiscreteMeasure> fixed_nu;
  int tail_window = 8;
  double trace_tol = 1e-3;
  ScaleParams scales = ScaleParams::named("default");
  GridSpec grid;
  std::string output;

  std::vector<double> radius_grid() const {
    std::vector<double> out;
    double r = r_max;
    for (int j = 0; j < count; ++j, r *= rho) out.push_back(r);
    return out;
  }
};

namespace detail {

inline void apply_grid_overrides(GridSpec& g, const nlohmann::json& j, std::vector<std::string>& errors) {
  if (!j.is_object()) {
    errors.push_back("grid: expected an object");
    return;
  }
  auto set_int = [&](const char* key, int& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer() || j[key].get<int>() < 1) errors.push_back(std::string("grid.") + key + ": expected a positive integer");
    else dst = j[key].get<int>();
  };
  auto set_num = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number() || !(j[key].get<double>() > 0.0)) errors.push_back(std::string("grid.") + key + ": expected a positive number");
    else dst = j[key].get<double>();
  };
  set_num("spacing_divisor", g.spacing_divisor);
  set_num("plane_spacing_divisor", g.plane_spacing_divisor);
  set_int("angle_grid", g.angle_grid);
  set_num("angle_tol", g.angle_tol);
  set_int("nm_max_evaluations", g.nm_max_evaluations);
  set_num("nm_tol", g.nm_tol);
  set_int("spike_angle_grid", g.spike_angle_grid);
  set_int("spike_offset_grid", g.spike_offset_grid);
  set_num("spike_screen_divisor", g.spike_screen_divisor);
  set_int("spike_refine_candidates", g.spike_refine_candidates);
  set_int("spike_descent_rounds", g.spike_descent_rounds);
}

inline void apply_scale_overrides(ScaleParams& p, const nlohmann::json& j, std::vector<std::string>& errors) {
  if (!j.is_object()) {
    errors.push_back("scales: expected an object");
    return;
  }
  if (j.contains("preset")) {
    try {
      p = ScaleParams::named(j["preset"].get<std::string>());
    } catch (const std::exception& e) {
      errors.push_back(std::string("scales.preset: ") + e.what());
    }
  }
  if (j.contains("M")) {
    if (!j["M"].is_number_integer()) errors.push_back("scales.M: expected an integer");
    else p.M = j["M"].get<int>();
  }
  for (auto [key, dst] : {std::pair<const char*, double*>{"A", &p.A}, {"theta", &p.theta}, {"epsilon", &p.epsilon},
                          {"alpha_thresh", &p.alpha_thresh}, {"delta", &p.delta}, {"shell_width", &p.shell_width},
                          {"refl_radius", &p.refl_radius}, {"enlargement", &p.enlargement},
                          {"density_window", &p.density_window}, {"density_constant", &p.density_constant}}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number()) errors.push_back(std::string("scales.") + key + ": expected a number");
    else *dst = j[key].get<double>();
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("scales: ") + e.what());
  }
}

inline std::vector<Point> sample_support_points(const DiscreteMeasure& mu, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(mu.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < std::min(n, idx.size()); ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<Point> out;
  for (std::size_t i : idx) out.push_back(mu.atoms()[i].x);
  return out;
}

}  // namespace detail

/// Validates a scenario document. File paths resolve against base_dir.
/// Every problem found is reported at once through ConfigError.
inline Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = {},
                               std::optional<std::uint64_t> seed_override = {},
                               std::optional<std::string> preset_override = {}) {
  std::vector<std::string> errors;
  Scenario sc;
  sc.raw = j;
  sc.base_dir = base_dir;
  if (!j.is_object()) throw ConfigError({"scenario: expected a JSON object"});
  if (!j.contains("schema") || j["schema"] != 1) errors.push_back("schema: expected 1");
  if (j.contains("name")) {
    if (j["name"].is_string()) sc.name = j["name"].get<std::string>();
    else errors.push_back("name: expected a string");
  }
  if (j.contains("seed")) {
    if (j["seed"].is_number_unsigned()) sc.seed = j["seed"].get<std::uint64_t>();
    else errors.push_back("seed: expected a non-negative integer");
  }
  if (seed_override) sc.seed = *seed_override;

  bool have_measure = false;
  try {
    const auto& m = j.at("measure");
    if (m.contains("file")) {
      sc.measure = load_measure((base_dir / m["file"].get<std::string>()).string());
    } else {
      sc.measure = builtin_measure(m.at("builtin").get<std::string>(), m.value("params", nlohmann::json::object()));
    }
    have_measure = true;
  } catch (const std::exception& e) {
    errors.push_back(std::string("measure: ") + e.what());
  }
  try {
    sc.kernel = kernel_from_json(j.at("kernel"));
    if (have_measure && kernel_dim(sc.kernel) != sc.measure.dim())
      errors.push_back("kernel: dimension differs from the measure");
  } catch (const std::exception& e) {
    errors.push_back(std::string("kernel: ") + e.what());
  }

  try {
    const auto& r = j.at("radii");
    sc.r_max = r.at("r_max").get<double>();
    sc.rho = r.value("rho", 0.5);
    sc.count = r.value("count", 1);
    if (!(sc.r_max > 0.0)) errors.push_back("radii.r_max: expected a positive number");
    if (!(sc.rho > 0.0 && sc.rho < 1.0)) errors.push_back("radii.rho: expected a number in (0, 1)");
    if (sc.count < 1) errors.push_back("radii.count: expected a positive integer");
    if (have_measure && sc.count >= 1 && sc.r_max * std::pow(sc.rho, sc.count - 1) < 2.0 * sc.measure.resolution())
      errors.push_back("radii: smallest radius lies below twice the measure resolution");
  } catch (const std::exception& e) {
    errors.push_back(std::string("radii: ") + e.what());
  }

  if (!j.contains("analyses") || !j["analyses"].is_array() || j["analyses"].empty()) {
    errors.push_back("analyses: expected a non-empty array");
  } else {
    std::set<std::string> seen;
    for (const auto& a : j["analyses"]) {
      const std::string name = a.is_string() ? a.get<std::string>() : "";
      const auto& known = known_analyses();
      if (std::find(known.begin(), known.end(), name) == known.end()) errors.push_back("analyses: unknown entry '" + name + "'");
      else if (seen.insert(name).second) sc.analyses.push_back(name);
    }
  }
  auto wants = [&](const char* a) { return std::find(sc.analyses.begin(), sc.analyses.end(), a) != sc.analyses.end(); };
  if (j.contains("spike_k")) {
    if (j["spike_k"].is_number_integer()) sc.spike_k = j["spike_k"].get<int>();
    else errors.push_back("spike_k: expected an integer");
  }
  if (wants("alpha_fixed")) {
    try {
      sc.fixed_nu = load_measure((base_dir / j.at("alpha_fixed_nu").get<std::string>()).string());
    } catch (const std::exception& e) {
      errors.push_back(std::string("alpha_fixed_nu: ") + e.what());
    }
  }
  if (have_measure) {
    const int d = sc.measure.dim();
    const double s = sc.measure.s();
    if (wants("alpha_flat") && !((s == 1.0 || s == 2.0) && (d == 2 || d == 3) && s < d))
      errors.push_back("analyses: alpha_flat needs s in {1, 2} and d in {2, 3}");
    if (wants("alpha_spike") && (d != 2 || s != 1.0)) errors.push_back("analyses: alpha_spike needs a planar s = 1 measure");
    if (wants("pipeline") && !((s == 1.0 || s == 2.0) && (d == 2 || d == 3) && s < d))
      errors.push_back("analyses: pipeline needs a flat comparison family");
  }
  if (j.contains("trace")) {
    sc.tail_window = j["trace"].value("tail_window", sc.tail_window);
    sc.trace_tol = j["trace"].value("tol", sc.trace_tol);
    if (sc.tail_window < 2) errors.push_back("trace.tail_window: expected at least 2");
    if (!(sc.trace_tol > 0.0)) errors.push_back("trace.tol: expected a positive number");
  }
  if (preset_override) {
    try {
      sc.scales = ScaleParams::named(*preset_override);
    } catch (const std::exception& e) {
      errors.push_back(std::string("preset: ") + e.what());
    }
  }
  if (j.contains("scales")) {
    nlohmann::json sj = j["scales"];
    if (preset_override && sj.is_object()) sj.erase("preset");
    detail::apply_scale_overrides(sc.scales, sj, errors);
  }
  if (j.contains("grid")) detail::apply_grid_overrides(sc.grid, j["grid"], errors);
  if (j.contains("output")) {
    if (j["output"].is_string()) sc.output = j["output"].get<std::string>();
    else errors.push_back("output: expected a string");
  }

  if (have_measure) {
    try {
      const auto& pj = j.at("points");
      if (pj.is_object()) {
        const auto n = pj.at("sample").get<std::size_t>();
        sc.points = detail::sample_support_points(sc.measure, n, pj.value("seed", sc.seed));
      } else {
        for (std::size_t i = 0; i < pj.size(); ++i) {
          Point p = detail::json_point(pj[i], "points[" + std::to_string(i) + "]");
          if (p.size() != sc.measure.dim()) errors.push_back("points[" + std::to_string(i) + "]: dimension differs from the measure");
          sc.points.push_back(std::move(p));
        }
      }
      if (sc.points.empty() && errors.empty()) errors.push_back("points: no points to analyze");
    } catch (const std::exception& e) {
      errors.push_back(std::string("points: ") + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return sc;
}

inline Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed_override = {},
                              std::optional<std::string> preset_override = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open scenario file '" + path + "'"});
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("scenario JSON: ") + e.what()});
  }
  return parse_scenario(j, std::filesystem::path(path).parent_path(), seed_override, preset_override);
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineResult {
  DoublingOutcome doubling;
  std::optional<AlphaResult> alpha;
  std::optional<AveragingChoice> choice;
  std::optional<ThinShell> shell;
  double t_r0 = 0.0;     ///< |T_{r0}(mu)(x)|
  double average = 0.0;  ///< |double average|
  double difference = 0.0;
  bool compared = false;
  std::string skipped;  ///< why no comparison was made, empty when compared

  nlohmann::json to_json() const {
    nlohmann::json j{{"doubling", doubling.to_json()}, {"compared", compared}};
    if (!skipped.empty()) j["skipped"] = skipped;
    if (alpha) j["alpha"] = alpha->to_json();
    if (choice) j["choice"] = choice->to_json();
    if (shell) j["thin_shell"] = {{"M_prime", shell->M_prime}, {"annulus_mass", shell->annulus_mass}, {"bound", shell->bound}};
    if (compared) j["comparison"] = {{"t_r0", t_r0}, {"average", average}, {"difference", difference}};
    return j;
  }
};

namespace detail {

/// The flat plane through x found by alpha_flat, as a measure of the given extent.
inline DiscreteMeasure flat_from_alpha(const AlphaResult& a, const Point& x, int s, double extent, double h) {
  const auto& params = a.comparison.params;
  if (params.contains("direction")) {
    const Point basis[1] = {json_point(params["direction"], "direction")};
    return make_plane_measure(x, basis, extent, h);
  }
  const Point n = json_point(params.at("normal"), "normal");
  auto [e1, e2] = orthonormal_complement(n);
  const Point basis[2] = {e1, e2};
  (void)s;
  return make_plane_measure(x, basis, extent, h);
}

}  // namespace detail

/// Doubling reduction, flat comparison at B(x, M r0), averaging-scale
/// choice, then |T_{r0}(mu)(x) - double_average(mu, x~, R, r0)|. Stops
/// without comparing when the transform converges absolutely or no plane is
/// within alpha_thresh.
template <class Kernel>
PipelineResult run_pipeline(const DiscreteMeasure& mu, const Kernel& k, const Point& x, double r,
                            const ScaleParams& p, const GridSpec& g = {}) {
  PipelineResult out;
  out.doubling = reduce_to_doubling(mu, x, r, p);
  if (out.doubling.kind == DoublingCase::absolutely_convergent) {
    out.skipped = "absolutely_convergent";
    return out;
  }
  const double r0 = out.doubling.r0;
  const double big = p.M * r0;
  out.alpha = alpha_flat(mu, Ball(x, big), g);
  if (!(out.alpha->value < p.alpha_thresh)) {
    out.skipped = "alpha_above_threshold";
    return out;
  }
  const int s = static_cast<int>(mu.s());
  const double h = big / (s == 2 ? g.plane_spacing_divisor : g.spacing_divisor);
  const double reach = p.refl_radius * r0 * (1.0 + p.theta * (1.0 + p.enlargement)) + r0;
  const DiscreteMeasure nu = detail::flat_from_alpha(*out.alpha, x, s, std::max(4.0 * big, reach) + h, h);
  out.choice = choose_averaging_scale(mu, nu, x, r0, p, *out.alpha);
  out.shell = find_thin_shell(mu, x, out.choice->R * r0, p.M, std::floor(p.shell_width));
  using V = typename Kernel::value_type;
  const V t = truncated_transform(mu, k, x, r0);
  const V avg = double_average(mu, k, out.choice->x_tilde, out.choice->R, r0);
  out.t_r0 = magnitude(t);
  out.average = magnitude(avg);
  out.difference = magnitude(V(t - avg));
  out.compared = true;
  return out;
}

// ---------------------------------------------------------------------------
// Running and emitting

struct OutputFile {
  std::string name;
  std::size_t point = 0;
  std::string analysis;
  std::string contents;
};

struct RunRecord {
  std::size_t point_index = 0;
  Point point;
  nlohmann::json data = nlohmann::json::object();  ///< per-analysis results
  double seconds = 0.0;
};

struct RunResult {
  std::vector<RunRecord> records;
  std::vector<OutputFile> files;
  nlohmann::json params;  ///< parameter echo shared by every manifest entry
};

namespace detail {

inline std::string alpha_curve_csv(const std::vector<DecayPoint>& curve) {
  std::string out = "r,alpha,c_re,c_im,quad_spacing,evaluations,witness_hash\n";
  for (const auto& p : curve) {
    out += format_double(p.r) + ',' + format_double(p.alpha.value) + ',' + format_double(p.alpha.c.real()) + ',' +
           format_double(p.alpha.c.imag()) + ',' + format_double(p.alpha.quad_spacing) + ',' +
           std::to_string(p.alpha.evaluations) + ',' + p.alpha.witness.hash() + '\n';
  }
  return out;
}

inline std::string symmetry_csv(const SymmetryReport& rep) {
  std::string out = "r,defect\n";
  for (auto [r, d] : rep.defect_by_radius) out += format_double(r) + ',' + format_double(d) + '\n';
  return out;
}

inline std::string pipeline_csv(const PipelineResult& p, double r) {
  std::string out = "r,r0,case,L,branch,R,t_r0,average,difference\n";
  // Without a comparison the branch column names the reason and the values are blank.
  out += format_double(r) + ',' + format_double(p.doubling.r0) + ',' + doubling_case_name(p.doubling.kind) + ',' +
         std::to_string(p.doubling.L) + ',' + (p.choice ? averaging_branch_name(p.choice->branch) : p.skipped) + ',' +
         (p.choice ? format_double(p.choice->R) : "");
  if (p.compared)
    out += ',' + format_double(p.t_r0) + ',' + format_double(p.average) + ',' + format_double(p.difference) + '\n';
  else
    out += ",,,\n";
  return out;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Runs every analysis at every point. Results are deterministic given the
/// scenario; only the timing fields vary between runs.
inline RunResult run_scenario(const Scenario& sc) {
  RunResult res;
  res.params = {{"scenario", sc.raw},   {"seed", sc.seed},           {"kernel", kernel_to_json(sc.kernel)},
                {"scales", sc.scales.to_json()}, {"radius_grid", {{"r_max", sc.r_max}, {"rho", sc.rho}, {"count", sc.count}}},
                {"trace", {{"tail_window", sc.tail_window}, {"tol", sc.trace_tol}}}};
  const std::vector<double> radii = sc.radius_grid();
  for (std::size_t i = 0; i < sc.points.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.point_index = i;
    rec.point = sc.points[i];
    const Point& x = sc.points[i];
    auto emit = [&](const std::string& analysis, std::string csv) {
      res.files.push_back({"point" + std::to_string(i) + "_" + analysis + ".csv", i, analysis, std::move(csv)});
    };
    for (const std::string& a : sc.analyses) try {
      if (a == "trace") {
        std::visit(
            [&](const auto& k) {
              const int window = sc.tail_window;
              const auto tr = transform_trace(sc.measure, k, x, sc.r_max, sc.rho, window, sc.trace_tol);
              nlohmann::json tj{{"verdict", verdict_name(tr.verdict)}, {"tail_oscillation", tr.tail_oscillation},
                                {"radii", tr.radii.size()}};
              if (tr.limit) tj["limit_magnitude"] = magnitude(*tr.limit);
              rec.data["trace"] = std::move(tj);
              emit("trace", tr.to_csv());
            },
            sc.kernel);
      } else if (a == "alpha_flat" || a == "alpha_spike" || a == "alpha_fixed") {
        FamilySelector fam = FlatFamily{};
        if (a == "alpha_spike") fam = SpikeFamily{sc.spike_k};
        if (a == "alpha_fixed") fam = FixedFamily{*sc.fixed_nu};
        const auto curve = alpha_decay_curve(sc.measure, x, radii, fam, sc.grid);
        nlohmann::json cj = nlohmann::json::array();
        for (const auto& p : curve) cj.push_back({{"r", p.r}, {"alpha", p.alpha.to_json()}});
        rec.data[a] = std::move(cj);
        emit(a, detail::alpha_curve_csv(curve));
      } else if (a == "symmetry") {
        const auto rep = std::visit([&](const auto& k) { return symmetric_point_defect(sc.measure, k, x, sc.r_max); },
                                    sc.kernel);
        rec.data["symmetry"] = {{"max_defect", rep.max_defect}, {"tolerance", rep.tolerance}, {"admissible", rep.admissible}};
        emit("symmetry", detail::symmetry_csv(rep));
      } else if (a == "pipeline") {
        const auto pr = std::visit([&](const auto& k) { return run_pipeline(sc.measure, k, x, sc.r_max, sc.scales, sc.grid); },
                                   sc.kernel);
        rec.data["pipeline"] = pr.to_json();
        emit("pipeline", detail::pipeline_csv(pr, sc.r_max));
      }
    } catch (const InputError& e) {
      throw InputError("point " + std::to_string(i) + ", analysis " + a + ": " + e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.records.push_back(std::move(rec));
  }
  return res;
}

/// Writes every CSV, runlog.jsonl and finally manifest.json into dir.
inline nlohmann::json emit_plots_data(const RunResult& res, const std::filesystem::path& dir) {
  if (res.records.empty()) throw InputError("no records to emit");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : res.files) {
    detail::write_atomic(dir / f.name, f.contents);
    files.push_back({{"name", f.name}, {"point", f.point}, {"analysis", f.analysis},
                     {"sha256", detail::sha256_hex(f.contents)}, {"bytes", f.contents.size()}, {"params", res.params}});
  }
  std::string log;
  for (const auto& r : res.records) {
    nlohmann::json line{{"point_index", r.point_index}, {"point", detail::point_json(r.point)},
                        {"results", r.data},         {"seconds", r.seconds},
                        {"params", res.params}};
    log += line.dump() + '\n';
  }
  detail::write_atomic(dir / "runlog.jsonl", log);
  nlohmann::json manifest{{"schema", 1}, {"params", res.params}, {"files", files}};
  detail::write_atomic(dir / "manifest.json", manifest.dump(2) + '\n');
  return manifest;
}

}  // namespace czo
