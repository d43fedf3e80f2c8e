#pragma once

// JSON measure files:
// {"dim": d, "s": s, "resolution": h, "nonneg": b, "atoms": [{"x": [...], "w": w | [re, im]}]}

#include "czo/measures.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace czo {

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing field", 0, path + key);
  return *it;
}

inline double require_number(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number()) throw ParseError("expected a number", 0, field);
  return v.get<double>();
}

}  // namespace detail

inline nlohmann::json measure_to_json(const DiscreteMeasure& mu) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const Atom& a : mu.atoms()) {
    nlohmann::json x = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.x.size(); ++i) x.push_back(a.x(i));
    nlohmann::json w;
    if (a.w.imag() != 0.0 || std::signbit(a.w.imag()))
      w = nlohmann::json::array({a.w.real(), a.w.imag()});
    else
      w = a.w.real();
    atoms.push_back({{"x", std::move(x)}, {"w", std::move(w)}});
  }
  return {{"dim", mu.dim()},
          {"s", mu.s()},
          {"resolution", mu.resolution()},
          {"nonneg", mu.nonneg()},
          {"atoms", std::move(atoms)}};
}

/// Structural errors raise ParseError naming the field; invariant violations
/// raise InputError from the DiscreteMeasure constructor.
inline DiscreteMeasure measure_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("measure must be a JSON object", 0, "");
  const auto& jd = detail::require(j, "dim", "");
  if (!jd.is_number_integer()) throw ParseError("expected an integer", 0, "dim");
  const long long dim = jd.get<long long>();
  if (dim < 1 || dim > kMaxDim) throw InputError("dim must lie in [1, " + std::to_string(kMaxDim) + "]");
  const double s = detail::require_number(detail::require(j, "s", ""), "s");
  const double h = detail::require_number(detail::require(j, "resolution", ""), "resolution");
  bool nonneg = true;
  if (auto it = j.find("nonneg"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError("expected a boolean", 0, "nonneg");
    nonneg = it->get<bool>();
  }
  const auto& ja = detail::require(j, "atoms", "");
  if (!ja.is_array()) throw ParseError("expected an array", 0, "atoms");
  std::vector<Atom> atoms;
  atoms.reserve(ja.size());
  for (std::size_t i = 0; i < ja.size(); ++i) {
    const std::string path = "atoms[" + std::to_string(i) + "].";
    const auto& a = ja[i];
    if (!a.is_object()) throw ParseError("expected an object", 0, path.substr(0, path.size() - 1));
    const auto& jx = detail::require(a, "x", path);
    if (!jx.is_array()) throw ParseError("expected an array", 0, path + "x");
    if (jx.size() != static_cast<std::size_t>(dim))
      throw InputError("atom " + std::to_string(i) + " has " + std::to_string(jx.size()) +
                       " coordinates, expected " + std::to_string(dim));
    Point x(dim);
    for (long long c = 0; c < dim; ++c)
      x(c) = detail::require_number(jx[c], path + "x[" + std::to_string(c) + "]");
    const auto& jw = detail::require(a, "w", path);
    Complex w;
    if (jw.is_number()) {
      w = jw.get<double>();
    } else if (jw.is_array() && jw.size() == 2) {
      w = {detail::require_number(jw[0], path + "w[0]"), detail::require_number(jw[1], path + "w[1]")};
    } else {
      throw ParseError("weight must be a number or a [re, im] pair", 0, path + "w");
    }
    atoms.push_back({std::move(x), w});
  }
  return {static_cast<int>(dim), s, h, std::move(atoms), nonneg};
}

inline DiscreteMeasure parse_measure(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), detail::line_of_offset(text, e.byte), "");
  }
  return measure_from_json(j);
}

inline DiscreteMeasure load_measure(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open measure file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_measure(buf.str());
}

inline void save_measure(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write measure file " + path);
  out << measure_to_json(mu).dump(1) << '\n';
  if (!out) throw InputError("failed writing measure file " + path);
}

}  // namespace czo
