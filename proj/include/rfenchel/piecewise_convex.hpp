#ifndef RFENCHEL_PIECEWISE_CONVEX_HPP
#define RFENCHEL_PIECEWISE_CONVEX_HPP

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "rfenchel/ext_real.hpp"

namespace rfenchel {

/// One polynomial piece a*x^2 + b*x + c with a >= 0.
struct QuadPiece {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double eval(double x) const { return (a * x + b) * x + c; }
  double slope(double x) const { return 2.0 * a * x + b; }
};

/// Closed proper convex function on R with an exact piecewise
/// linear-quadratic representation.
///
/// The effective domain is the closed interval [lo, hi] (either end may be
/// infinite). Interior breakpoints split it into pieces; closedness forces
/// the value at a finite endpoint to equal the adjacent piece's value there,
/// so no separate endpoint bookkeeping is carried.
///
/// Immutable after construction; all operations are const and allocation-free
/// where possible, safe for concurrent callers.
class PiecewiseConvexFn {
public:
  static constexpr std::size_t kDefaultPieceCap = 4096;

  /// Builds and validates. Throws std::invalid_argument on any invariant
  /// violation (non-monotone slopes, discontinuity, negative curvature, ...).
  PiecewiseConvexFn(double lo, double hi, std::vector<double> breakpoints,
                    std::vector<QuadPiece> pieces);

  // -- builders ------------------------------------------------------------
  static PiecewiseConvexFn quadratic(double a, double b, double c);
  static PiecewiseConvexFn linear(double b, double c);
  static PiecewiseConvexFn abs_scaled(double s);  // s * |x|
  static PiecewiseConvexFn indicator_interval(double lo, double hi);
  static PiecewiseConvexFn support_interval(double lo, double hi);  // max(lo*y, hi*y)
  static PiecewiseConvexFn single_point(double x0, double v0);
  /// Chord interpolation of a convex callable on the given increasing knots.
  /// left_slope / right_slope extend the domain to the whole line when they
  /// respect convexity (left_slope <= first chord <= ... <= right_slope);
  /// pass NaN to cut the domain at the boundary knot instead.
  static PiecewiseConvexFn sample_convex(const std::function<double(double)>& g,
                                         const std::vector<double>& knots,
                                         double left_slope, double right_slope);

  // -- basic queries ---------------------------------------------------------
  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  std::size_t piece_count() const { return pieces_.size(); }
  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<QuadPiece>& pieces() const { return pieces_; }

  ExtReal eval(double x) const;

  /// One-sided derivatives; -inf / +inf at (or beyond) domain endpoints.
  double slope_left(double x) const;
  double slope_right(double x) const;

  /// Global minimum value (finite; pieces are polynomials on a closed set
  /// only when the recession slopes allow, otherwise -inf is possible for
  /// improper data which construction rejects... the minimum over the closed
  /// domain, -inf iff the function is unbounded below).
  ExtReal min_value() const;

  // -- the Legendre transform -----------------------------------------------
  /// Exact convex conjugate f*(y) = sup_x (x*y - f(x)). Throws
  /// std::overflow_error if the result would exceed piece_cap pieces.
  PiecewiseConvexFn legendre(std::size_t piece_cap = kDefaultPieceCap) const;

  /// (a^-, a^+) = lim_{k->-inf} f(k)/k and lim_{k->+inf} f(k)/k.
  /// When *this is a conjugate f*, these bracket the domain of f.
  std::pair<ExtReal, ExtReal> recession_slopes() const;

  /// Perspective of *this = f*:  z*f*(y/z) for z>0, y*a^{sign y} for z=0,
  /// and 0 at y=z=0. Throws on z < 0.
  ExtReal perspective(double y, double z) const;

  /// Leftmost maximizer of x*y - f(x) over dom f. Returns +inf / -inf when
  /// the supremum is approached only along an unbounded domain.
  double argmax_affine_gap(double y) const;

  /// Both endpoints of the maximizer set of x*y - f(x); they differ exactly
  /// when y matches the slope of a linear piece.
  std::pair<double, double> argmax_affine_interval(double y) const;

  // -- exact transforms -------------------------------------------------------
  PiecewiseConvexFn scale_arg(double w) const;       // x -> f(w*x), w > 0
  PiecewiseConvexFn shift_arg(double b) const;       // x -> f(x + b)
  PiecewiseConvexFn add_linear(double s, double t = 0.0) const;  // f + s*x + t
  PiecewiseConvexFn reflect() const;                 // x -> f(-x)

  /// Pointwise agreement at sample points of both representations (all
  /// breakpoints, midpoints, domain probes). Used for normalization-blind
  /// equality checks.
  bool approx_equal(const PiecewiseConvexFn& o, double tol) const;

private:
  void validate() const;
  void normalize();
  std::size_t piece_index(double x) const;

  double lo_;
  double hi_;
  std::vector<double> breaks_;     // strictly increasing, inside (lo_, hi_)
  std::vector<QuadPiece> pieces_;  // breaks_.size() + 1 entries
};

/// xy <= z*f(x) + pers(f*, y, z) up to tol; the Young inequality driver.
bool check_young_pointwise(const PiecewiseConvexFn& f,
                           const PiecewiseConvexFn& fstar, double x, double y,
                           double z, double tol = 1e-10);

}  // namespace rfenchel

#endif
