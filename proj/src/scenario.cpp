#include "rfenchel/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace rfenchel {

namespace {

double domain_end(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ScenarioError("domain endpoint string must be 'inf' or '-inf'");
  }
  if (!v.is_number()) throw ScenarioError("domain endpoint must be a number or inf string");
  return v.get<double>();
}

PiecewiseConvexFn integrand_section_from_json(const Json& j) {
  const std::string kind = j.value("kind", std::string("plq"));
  if (kind == "quadratic")
    return PiecewiseConvexFn::quadratic(j.value("a", 0.5), j.value("b", 0.0),
                                        j.value("c", 0.0));
  if (kind == "abs") return PiecewiseConvexFn::abs_scaled(j.value("scale", 1.0));
  if (kind == "linear")
    return PiecewiseConvexFn::linear(j.value("slope", 1.0), j.value("intercept", 0.0));
  if (kind == "exp_sampled") {
    const double lo = j.value("lo", -8.0);
    const double hi = j.value("hi", 8.0);
    const int knots = j.value("knots", 512);
    if (knots < 2 || hi <= lo) throw ScenarioError("exp_sampled: bad knot spec");
    std::vector<double> xs(knots);
    for (int i = 0; i < knots; ++i)
      xs[i] = lo + (hi - lo) * i / static_cast<double>(knots - 1);
    return PiecewiseConvexFn::sample_convex([](double x) { return std::exp(x); }, xs,
                                            0.0, std::exp(hi));
  }
  if (kind == "plq") return plq_from_json(j);
  throw ScenarioError("unknown integrand kind: " + kind);
}

}  // namespace

PiecewiseConvexFn plq_from_json(const Json& j) {
  try {
    const double lo = domain_end(j.value("domain", Json::object()), "lo", -kInf);
    const double hi = domain_end(j.value("domain", Json::object()), "hi", kInf);
    std::vector<double> breaks;
    for (const auto& b : j.value("breakpoints", Json::array()))
      breaks.push_back(b.get<double>());
    std::vector<QuadPiece> pieces;
    for (const auto& p : j.at("pieces"))
      pieces.push_back({p.value("a", 0.0), p.value("b", 0.0), p.value("c", 0.0)});
    return PiecewiseConvexFn(lo, hi, std::move(breaks), std::move(pieces));
  } catch (const Json::exception& e) {
    throw ScenarioError(std::string("piecewise function: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("piecewise function invalid: ") + e.what());
  }
}

Json plq_to_json(const PiecewiseConvexFn& f) {
  Json j;
  j["domain"]["lo"] = std::isfinite(f.domain_lo()) ? Json(f.domain_lo()) : Json("-inf");
  j["domain"]["hi"] = std::isfinite(f.domain_hi()) ? Json(f.domain_hi()) : Json("inf");
  j["breakpoints"] = f.breakpoints();
  Json pieces = Json::array();
  for (const auto& p : f.pieces()) pieces.push_back({{"a", p.a}, {"b", p.b}, {"c", p.c}});
  j["pieces"] = pieces;
  return j;
}

std::string format_num(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string format_ext(const ExtReal& v) { return format_num(v.value()); }

Scenario load_scenario(const Json& doc) {
  Scenario sc;
  try {
    if (doc.value("schema_version", 0) != 1)
      throw ScenarioError("schema_version must be 1");
    if (!doc.contains("space") || !doc.at("space").contains("weights"))
      throw ScenarioError("space.weights is required");
    std::vector<double> w;
    for (const auto& x : doc.at("space").at("weights")) w.push_back(x.get<double>());
    sc.space = make_space(w);
    const std::size_t m = sc.space->size();

    if (doc.contains("integrand")) {
      const Json& ij = doc.at("integrand");
      if (ij.value("kind", std::string()) == "per_atom") {
        std::vector<PiecewiseConvexFn> secs;
        for (const auto& s : ij.at("sections"))
          secs.push_back(integrand_section_from_json(s));
        if (secs.size() != m) throw ScenarioError("per_atom: one section per atom");
        sc.integrand.emplace(sc.space, std::move(secs));
      } else {
        sc.integrand.emplace(Integrand::constant_section(sc.space,
                                                         integrand_section_from_json(ij)));
      }
    }

    if (doc.contains("penalty")) {
      const Json& pj = doc.at("penalty");
      const std::string kind = pj.value("kind", std::string());
      const Json data = pj.value("data", Json::object());
      if (kind == "dirac") {
        std::vector<double> d;
        for (const auto& x : data.at("density")) d.push_back(x.get<double>());
        sc.penalty = Penalty::dirac(Density(sc.space, d));
      } else if (kind == "polyhedral") {
        std::vector<Density> verts;
        for (const auto& vj : data.at("vertices")) {
          std::vector<double> d;
          for (const auto& x : vj) d.push_back(x.get<double>());
          verts.emplace_back(sc.space, d);
        }
        sc.penalty = Penalty::polyhedral(std::move(verts));
      } else if (kind == "entropic") {
        sc.penalty = Penalty::entropic(sc.space);
      } else {
        throw ScenarioError("unknown penalty kind: " + kind);
      }
    }

    auto read_rvs = [&](const char* key, std::vector<RandomVariable>& out) {
      if (!doc.contains(key)) return;
      for (const auto& vj : doc.at(key)) {
        std::vector<double> v;
        for (const auto& x : vj) v.push_back(x.get<double>());
        out.emplace_back(sc.space, v);
      }
    };
    read_rvs("xis", sc.xis);
    read_rvs("etas", sc.etas);

    if (doc.contains("cone")) {
      ConeSpec cone;
      for (const auto& gj : doc.at("cone").value("generators", Json::array())) {
        std::vector<double> v;
        for (const auto& x : gj) v.push_back(x.get<double>());
        cone.generators.emplace_back(sc.space, v);
      }
      sc.cone = std::move(cone);
    }

    if (doc.contains("utility")) {
      const Json& uj = doc.at("utility");
      PiecewiseConvexFn mirror = [&] {
        const Json& mj = uj.at("mirror");
        if (mj.is_string() && mj.get<std::string>() == "exponential") {
          // -U(-x) = e^x for U(x) = -e^{-x}, sampled on a wide window.
          std::vector<double> xs;
          for (int i = 0; i <= 900; ++i) xs.push_back(-20.0 + 28.0 * i / 900.0);
          return PiecewiseConvexFn::sample_convex(
              [](double x) { return std::exp(x); }, xs, 0.0, std::exp(8.0));
        }
        return integrand_section_from_json(mj);
      }();
      std::vector<double> d, b;
      for (const auto& x : uj.at("discount")) d.push_back(x.get<double>());
      for (const auto& x : uj.at("claim")) b.push_back(x.get<double>());
      sc.utility = UtilitySpec{std::move(mirror), RandomVariable(sc.space, d),
                               RandomVariable(sc.space, b)};
    }

    if (doc.contains("config")) {
      const Json& cj = doc.at("config");
      sc.config.grid_radius = cj.value("grid_radius", sc.config.grid_radius);
      sc.config.grid_points = cj.value("grid_points", sc.config.grid_points);
      sc.config.grid_levels = cj.value("grid_levels", sc.config.grid_levels);
      sc.config.tolerance = cj.value("tolerance", sc.config.tolerance);
      sc.config.seed = cj.value("seed", sc.config.seed);
      sc.config.truncation = cj.value("truncation", sc.config.truncation);
      if (cj.contains("w_grid")) {
        sc.config.w_grid.clear();
        for (const auto& x : cj.at("w_grid")) sc.config.w_grid.push_back(x.get<double>());
      }
    }
  } catch (const Json::exception& e) {
    throw ScenarioError(std::string("schema violation: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(std::string("schema violation: ") + e.what());
  }
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file: " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    throw ScenarioError(std::string("malformed JSON: ") + e.what());
  }
  return load_scenario(doc);
}

}  // namespace rfenchel
