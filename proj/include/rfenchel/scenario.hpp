#ifndef RFENCHEL_SCENARIO_HPP
#define RFENCHEL_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfenchel/duality.hpp"
#include "rfenchel/functional.hpp"
#include "rfenchel/penalty.hpp"

namespace rfenchel {

using Json = nlohmann::ordered_json;

struct SolverConfig {
  double grid_radius = 8.0;
  int grid_points = 17;
  int grid_levels = 4;
  double tolerance = 1e-8;
  std::uint64_t seed = 1;
  std::size_t truncation = 10000;
  std::vector<double> w_grid = {0.5, 1.0, 2.0, 5.0, 10.0, 50.0};
};

/// A parsed scenario file (schema_version 1). Parse errors throw
/// ScenarioError, which the CLI maps to exit code 2.
struct Scenario {
  SpacePtr space;
  std::optional<Integrand> integrand;
  std::optional<Penalty> penalty;
  std::vector<RandomVariable> xis;
  std::vector<RandomVariable> etas;
  std::optional<ConeSpec> cone;
  std::optional<UtilitySpec> utility;
  SolverConfig config;
};

class ScenarioError : public std::runtime_error {
public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

Scenario load_scenario(const Json& doc);
Scenario load_scenario_file(const std::string& path);

PiecewiseConvexFn plq_from_json(const Json& j);
Json plq_to_json(const PiecewiseConvexFn& f);

std::string format_num(double v);
std::string format_ext(const ExtReal& v);

}  // namespace rfenchel

#endif
