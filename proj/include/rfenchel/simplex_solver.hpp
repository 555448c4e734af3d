#ifndef RFENCHEL_SIMPLEX_SOLVER_HPP
#define RFENCHEL_SIMPLEX_SOLVER_HPP

#include <functional>
#include <vector>

#include "rfenchel/ext_real.hpp"

namespace rfenchel {

/// Deterministic 1-D minimization of a convex (hence unimodal) function by
/// iterated grid shrinking. Tolerant of +inf plateaus at the interval edges.
/// Returns the best point found; value accuracy is limited only by double
/// arithmetic for the budgets used here.
struct Min1DResult {
  double x = 0.0;
  double value = kInf;
};
Min1DResult minimize_convex_1d(const std::function<double(double)>& f, double lo,
                               double hi, int rounds = 42, int points = 17);

struct SimplexSolveOptions {
  int sweeps = 120;            // pairwise coordinate-descent passes
  int line_rounds = 34;        // grid-shrink rounds per 1-D search
  int line_points = 11;
  double stall_tol = 1e-14;    // relative sweep improvement cutoff
  int restarts = 3;            // perturbed restarts if the caller's gap is loose
};

struct SimplexSolveResult {
  std::vector<double> point;   // psi with sum_i w_i psi_i = 1, psi >= 0
  double value = kInf;
  bool feasible = false;       // a finite value was found
  int sweeps_used = 0;
};

/// Minimizes a convex function over the weighted simplex
/// {psi >= 0 : sum_i w_i psi_i = 1} by pairwise coordinate descent with exact
/// convex line searches. The objective may return +inf (extended-valued
/// convex); infeasible starts are preprocessed by probing vertices and
/// pairwise mixtures. Fully deterministic.
SimplexSolveResult minimize_on_weighted_simplex(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& weights, const SimplexSolveOptions& opt = {},
    const std::vector<double>* warm_start = nullptr);

/// Same machinery on the unit simplex {lambda >= 0 : sum lambda = 1}.
SimplexSolveResult minimize_on_unit_simplex(
    const std::function<double(const std::vector<double>&)>& objective,
    std::size_t n, const SimplexSolveOptions& opt = {},
    const std::vector<double>* warm_start = nullptr);

/// Exhaustive nested 1-D minimization in mass coordinates; exact for convex
/// objectives including nonsmooth ones where pairwise descent can stall at
/// kink intersections. Only dimensions <= 3 are supported (the fallback is
/// pairwise descent above that).
SimplexSolveResult minimize_on_weighted_simplex_nested(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& weights, int rounds = 30, int points = 11);

/// Frank-Wolfe style optimality gap for minimization over the weighted
/// simplex: max over vertices v of <subgrad, psi - v>. Valid upper bound on
/// value(psi) - min by convexity, for any subgradient.
double simplex_fw_gap(const std::vector<double>& subgrad,
                      const std::vector<double>& psi,
                      const std::vector<double>& weights);

/// Tightens a near-optimal point by bisecting the (monotone) directional
/// derivative along pairwise simplex directions. Drives the FW gap toward
/// machine precision for smooth objectives; value-based line searches alone
/// stall once improvements drop under the double rounding floor.
void gradient_polish_on_weighted_simplex(
    const std::function<std::vector<double>(const std::vector<double>&)>& subgrad,
    const std::vector<double>& weights, std::vector<double>& psi, int sweeps = 6);

/// Coordinatewise descent over a box [0, hi]^K (expanding hi as needed is the
/// caller's job). Used for cone-coefficient problems.
struct BoxSolveResult {
  std::vector<double> point;
  double value = kInf;
  bool hit_boundary = false;  // some coordinate ended at its upper bound
};
BoxSolveResult minimize_on_box(
    const std::function<double(const std::vector<double>&)>& objective,
    std::vector<double> start, const std::vector<double>& hi,
    int sweeps = 80, int line_rounds = 40, int line_points = 13);

}  // namespace rfenchel

#endif
