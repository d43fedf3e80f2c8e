// czo-lab: command-line front end for scenarios, transportation numbers,
// principal-value traces and kernel checks.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include "czo/czo.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

czo::Point parse_point(const std::vector<double>& coords) {
  if (coords.empty() || coords.size() > static_cast<std::size_t>(czo::kMaxDim))
    throw czo::InputError("--x needs 1 to 8 coordinates");
  czo::Point p(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) p(static_cast<Eigen::Index>(i)) = coords[i];
  return p;
}

/// "riesz:S" (dimension from the measure), "huovinen:K", or a JSON object.
czo::AnyKernel parse_kernel(const std::string& spec, int dim) {
  if (!spec.empty() && spec.front() == '{') return czo::kernel_from_json(nlohmann::json::parse(spec));
  const auto colon = spec.find(':');
  const std::string family = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (family == "riesz") return czo::RieszKernel(arg.empty() ? 1.0 : std::stod(arg), dim);
  if (family == "huovinen") return czo::HuovinenKernel(arg.empty() ? 3 : std::stoi(arg));
  throw czo::InputError("unknown kernel '" + spec + "'");
}

int cmd_run(const std::string& scenario, const std::string& out, std::optional<std::uint64_t> seed,
            std::optional<std::string> preset) {
  const czo::Scenario sc = czo::load_scenario(scenario, seed, preset);
  const std::string dir = !out.empty() ? out : sc.output;
  if (dir.empty()) throw czo::InputError("no output directory: pass --out or set 'output'");
  const czo::RunResult res = czo::run_scenario(sc);
  const auto manifest = czo::emit_plots_data(res, dir);
  std::cout << "wrote " << manifest["files"].size() << " files for " << res.records.size() << " points to " << dir
            << '\n';
  return 0;
}

int cmd_alpha(const std::string& measure, const std::string& family, const std::vector<double>& x, double r) {
  const czo::DiscreteMeasure mu = czo::load_measure(measure);
  const czo::Ball b(parse_point(x), r);
  czo::AlphaResult res;
  if (family == "flat") {
    res = czo::alpha_flat(mu, b);
  } else if (family.rfind("spike:", 0) == 0) {
    res = czo::alpha_spike(mu, b, std::stoi(family.substr(6)));
  } else if (family.rfind("fixed:", 0) == 0) {
    res = czo::alpha_mu_nu(mu, czo::load_measure(family.substr(6)), b);
  } else {
    throw czo::InputError("family must be flat, spike:K or fixed:PATH");
  }
  std::cout << res.to_json().dump(2) << '\n';
  return 0;
}

int cmd_trace(const std::string& measure, const std::string& kernel, const std::vector<double>& x, double rmax,
              double rho, int window, double tol, const std::string& csv) {
  const czo::DiscreteMeasure mu = czo::load_measure(measure);
  const czo::AnyKernel k = parse_kernel(kernel, mu.dim());
  const czo::Point p = parse_point(x);
  return std::visit(
      [&](const auto& kk) {
        const auto tr = czo::transform_trace(mu, kk, p, rmax, rho, window, tol);
        if (!csv.empty()) czo::detail::write_atomic(csv, tr.to_csv());
        nlohmann::json j{{"verdict", czo::verdict_name(tr.verdict)},
                         {"tail_oscillation", tr.tail_oscillation},
                         {"tail_alternations", tr.tail_alternations},
                         {"radii", tr.radii.size()}};
        if (tr.limit) j["limit_magnitude"] = czo::magnitude(*tr.limit);
        std::cout << j.dump(2) << '\n';
        return 0;
      },
      k);
}

int cmd_verify_kernel(const std::string& family, double s, int dim, int k, std::size_t samples, std::uint64_t seed) {
  auto report = [&](const auto& kernel) {
    const auto rep = czo::verify_axioms(kernel, samples, {1e-3, 1e3}, seed);
    nlohmann::json j{{"kernel", kernel.to_json()},
                     {"samples", rep.samples},
                     {"size_ratio", rep.size_ratio},
                     {"antisymmetry_defect", rep.antisymmetry_defect},
                     {"smoothness_ratio", rep.smoothness_ratio},
                     {"c_k", rep.c_k},
                     {"c_smooth", rep.c_smooth},
                     {"size_ok", rep.size_ok(1e-12)},
                     {"smoothness_ok", rep.smoothness_ok()}};
    std::cout << j.dump(2) << '\n';
    return rep.size_ok(1e-12) && rep.smoothness_ok() && rep.antisymmetry_defect <= 1e-12 ? 0 : kExitNumeric;
  };
  if (family == "riesz") return report(czo::RieszKernel(s, dim));
  if (family == "huovinen") return report(czo::HuovinenKernel(k));
  throw czo::InputError("family must be riesz or huovinen");
}

int cmd_make_measure(const std::string& name, const std::string& params, const std::string& out) {
  const auto mu = czo::builtin_measure(name, nlohmann::json::parse(params));
  czo::save_measure(mu, out);
  std::cout << "wrote " << mu.size() << " atoms to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calderon-Zygmund operator lab"};
  app.require_subcommand(1);

  std::string scenario, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  auto* run = app.add_subcommand("run", "Run a scenario and write CSV curves and a manifest");
  run->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--preset", preset, "Scale preset")->check(CLI::IsMember({"coarse", "default", "fine"}));

  std::string measure, family = "flat", kernel = "riesz:1", csv;
  std::vector<double> x;
  double r = 0.0, rmax = 0.0, rho = 0.5, tol = 1e-3;
  int window = 8;
  auto* alpha = app.add_subcommand("alpha", "Transportation number of a measure in a ball");
  alpha->add_option("--measure", measure, "Measure JSON file")->required()->check(CLI::ExistingFile);
  alpha->add_option("--family", family, "flat, spike:K or fixed:PATH");
  alpha->add_option("--x", x, "Ball center")->required()->delimiter(',');
  alpha->add_option("--r", r, "Ball radius")->required();

  auto* trace = app.add_subcommand("trace", "Truncated transforms along a geometric radius grid");
  trace->add_option("--measure", measure, "Measure JSON file")->required()->check(CLI::ExistingFile);
  trace->add_option("--kernel", kernel, "riesz:S, huovinen:K or a JSON object");
  trace->add_option("--x", x, "Evaluation point")->required()->delimiter(',');
  trace->add_option("--rmax", rmax, "Largest radius")->required();
  trace->add_option("--rho", rho, "Radius ratio in (0, 1)");
  trace->add_option("--tail-window", window, "Radii in the convergence window");
  trace->add_option("--tol", tol, "Convergence tolerance");
  trace->add_option("--csv", csv, "Write the trace CSV here");

  std::string kfamily;
  double s = 1.0;
  int dim = 2, korder = 3;
  std::size_t samples = 10000;
  std::uint64_t kseed = 1;
  auto* verify = app.add_subcommand("verify-kernel", "Sample the kernel axioms");
  verify->add_option("--family", kfamily, "riesz or huovinen")->required();
  verify->add_option("--s", s, "Riesz exponent");
  verify->add_option("--dim", dim, "Riesz ambient dimension");
  verify->add_option("--k", korder, "Huovinen order");
  verify->add_option("--samples", samples, "Sample count");
  verify->add_option("--seed", kseed, "Sampling seed");

  std::string builtin, params = "{}", measure_out;
  auto* make = app.add_subcommand("make-measure", "Write a built-in measure as JSON");
  make->add_option("name", builtin, "segment, plane, spike, cantor4, perturbed_segment or empty")->required();
  make->add_option("--params", params, "Generator parameters as a JSON object");
  make->add_option("--out", measure_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(scenario, out, seed, preset);
    if (*alpha) return cmd_alpha(measure, family, x, r);
    if (*trace) return cmd_trace(measure, kernel, x, rmax, rho, window, tol, csv);
    if (*verify) return cmd_verify_kernel(kfamily, s, dim, korder, samples, kseed);
    if (*make) return cmd_make_measure(builtin, params, measure_out);
  } catch (const czo::ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& f : e.fields()) std::cerr << "  " << f << '\n';
    return kExitConfig;
  } catch (const czo::InputError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const czo::ParseError& e) {
    std::cerr << "parse error at line " << e.line() << " field '" << e.field() << "': " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
