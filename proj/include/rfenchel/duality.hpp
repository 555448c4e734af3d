#ifndef RFENCHEL_DUALITY_HPP
#define RFENCHEL_DUALITY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rfenchel/functional.hpp"

namespace rfenchel {

/// Finitely generated convex cone C = {sum t_k g_k : t >= 0} in L^inf.
/// An empty generator list is the cone {0}.
struct ConeSpec {
  std::vector<RandomVariable> generators;
};

/// Is eta in the dual cone C° = {eta : E[g eta] <= 0 for all generators}?
bool in_polar_cone(const ConeSpec& cone, const RandomVariable& eta, double tol = 1e-9);

/// Euclidean (weighted) projection onto C° by cyclic halfspace projections.
RandomVariable project_polar_cone(const ConeSpec& cone, const RandomVariable& eta,
                                  int cycles = 200);

/// Refining product grids on [-R, R]^m. Level 0 enumerates the base grid;
/// each later level re-centers a shrunken window on the incumbent argmax
/// (sound for the concave objectives used here), so the running maximum is
/// nondecreasing across levels.
struct GridSpec {
  double radius = 8.0;
  int base_points = 17;
  int levels = 4;
};

struct ConjugateCheck {
  std::vector<double> level_bounds;  // running brute-force maxima per level
  double brute = -kInf;              // final grid value
  HResult h;                         // solver value of H_{f*,gamma}(eta)
  bool boundary_hit = false;         // argmax touched the level-0 box
};

/// Restriction-to-L^1 oracle: brute-force I*(eta) from below
/// against the divergence solver value.
ConjugateCheck conjugate_on_L1(const Integrand& f, const Penalty& p,
                               const RandomVariable& eta, const GridSpec& grid);

struct DualRepCheck {
  double i_value = 0.0;
  double best_lower = -kInf;           // best E[x eta] - H(eta) found
  double slack = kInf;                 // i_value - best_lower (>= 0)
  std::optional<RandomVariable> eta_hat;
  std::vector<double> level_values;    // grid sweep when enabled
};

/// Checks I(x) = sup_eta (E[x eta] - H(eta)) from below, using the
/// first-order candidate eta = psi-hat * f'(., x) plus an optional eta-grid.
DualRepCheck dual_representation_check(const Integrand& f, const Penalty& p,
                                       const RandomVariable& x, const GridSpec& grid,
                                       bool with_grid = false);

struct SubdiffResult {
  RandomVariable eta_hat;
  double fenchel_residual;  // I + H - E[x eta]; ~0 certifies membership
};
SubdiffResult subdifferential(const Integrand& f, const Penalty& p,
                              const RandomVariable& x);

struct BatteryConfig {
  int xi_samples = 6;
  int directions = 4;
  int sequences = 3;
  int sequence_len = 12;
  double ray_t1 = 16.0;
  double ray_t2 = 64.0;
  double tol = 1e-6;
  std::uint64_t seed = 1;
};

struct BatteryReport {
  bool dom_full = false;  // precondition: I finite on all samples
  bool gauge_finite = false;      // constants have gauge-finite f(., x)^+
  bool sublevel_compact = false;  // H sublevel boundedness (coercivity on rays)
  bool lebesgue = false;          // continuity along bounded a.s. sequences
  bool attained = false;          // dual supremum attained at sampled points
  bool consistent = false;
  std::string details;
};
BatteryReport regularity_battery(const Integrand& f, const Penalty& p,
                                const BatteryConfig& cfg);

struct DualityReport {
  ExtReal primal_value = ExtReal::pos_inf();
  ExtReal dual_value = ExtReal::neg_inf();
  double gap = kInf;
  std::optional<RandomVariable> primal_point;
  std::optional<RandomVariable> dual_eta;
  std::optional<Density> attained_q;
  bool dual_feasible = false;
  bool both_infinite = false;
  bool unbounded = false;
  double weak_duality_min_slack = kInf;  // min over evaluated iterates of I - dual
  std::string diagnostics;
};

/// inf_{xi in C} I_{f,gamma}(xi) = -min_{eta in C°} H_{f*,gamma}(-eta).
/// Primal by coordinate descent over cone coefficients with box expansion;
/// dual candidate from the subgradient at the primal solution, projected into
/// C° if needed. gap = primal + H(-eta) >= 0 certifies both sides.
DualityReport fenchel_solve(const Integrand& f, const Penalty& p, const ConeSpec& cone);

struct ScalingCheck {
  bool condition_holds = false;
  double delta = 0.0;
  double p_exponent = 0.0;
  bool monotone_shortcut = false;  // g nondecreasing: the negative branch is free
  bool conjugate_identity_ok = false;  // f*(., y) == g*(y / W) exactly
};
/// Example "random scaling": f(w, x) = g(W(w) x) with exact PLQ rescaling.
std::pair<Integrand, ScalingCheck> transform_scaling(const PiecewiseConvexFn& g,
                                                     const RandomVariable& W,
                                                     const Penalty& p);

struct ShiftCheck {
  bool conjugate_identity_ok = false;  // f_B*(., y) == f*(., y) - y B exactly
};
/// Example "random shift": f_B(w, x) = f(w, x + B(w)).
std::pair<Integrand, ShiftCheck> transform_shift(const Integrand& f,
                                                 const RandomVariable& B);

/// max over the supplied etas of |H_{f_B*,gamma}(eta) - (H_{f*,gamma}(eta) - E[eta B])|
/// over the common finite domain; infinite-on-both counts as agreeing.
double shift_identity_gap(const Integrand& f, const Integrand& f_shifted,
                          const Penalty& p, const RandomVariable& B,
                          const std::vector<RandomVariable>& etas);

/// Concave utility stored through its convex mirror x -> -U(-x).
struct UtilitySpec {
  PiecewiseConvexFn mirror;
  RandomVariable discount;  // D > 0 atomwise
  RandomVariable claim;     // B
};

/// sup_{xi in C} u_{D,B,gamma}(xi) = min_{eta in C°_V} (H_{V,gamma}(D eta) + E[D B eta]).
DualityReport robust_utility_solve(const UtilitySpec& u, const Penalty& p,
                                   const ConeSpec& cone);

struct MinimaxResult {
  double inf_sup = 0.0;
  double sup_inf = 0.0;
  double gap = 0.0;  // inf_sup - sup_inf, >= 0 up to solver tolerance
};
/// Lagrangian exchange check: L(Q, xi) = nu(xi) - E_Q[f(., xi)] + gamma(Q)
/// over models x a xi-grid.
MinimaxResult minimax_check(const Integrand& f, const Penalty& p,
                            const RandomVariable& nu_r, const GridSpec& grid);

struct DlvpResult {
  PiecewiseConvexFn g;
  double bound;  // sup over the family of E[g(|eta|)]
};
/// de la Vallee-Poussin certificate: a coercive even convex g with slopes
/// k on knots chosen so the family tail mass beyond a_k is <= 2^-k, paired
/// with the classical penalty gamma = Dirac(P).
DlvpResult dlvp_certificate(const std::vector<RandomVariable>& family);

}  // namespace rfenchel

#endif
