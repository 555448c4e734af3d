#include "rfenchel/piecewise_convex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfenchel {

namespace {

constexpr double kSlopeTol = 1e-9;
constexpr double kJoinTol = 1e-9;

double piece_slope_at(const QuadPiece& p, double x, double fallback_sign) {
  if (!std::isfinite(x)) {
    if (p.a > 0.0) return fallback_sign * kInf;
    return p.b;
  }
  return p.slope(x);
}

}  // namespace

PiecewiseConvexFn::PiecewiseConvexFn(double lo, double hi,
                                     std::vector<double> breakpoints,
                                     std::vector<QuadPiece> pieces)
    : lo_(lo), hi_(hi), breaks_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  normalize();
  validate();
}

void PiecewiseConvexFn::normalize() {
  // Merge adjacent pieces with identical polynomials; a canonical form makes
  // legendre(legendre(f)) structurally comparable to f.
  if (pieces_.size() < 2) return;
  std::vector<double> nb;
  std::vector<QuadPiece> np;
  np.push_back(pieces_.front());
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    const QuadPiece& l = np.back();
    const QuadPiece& r = pieces_[i + 1];
    const double t = breaks_[i];
    const double scale = 1.0 + std::abs(l.eval(t));
    const bool same = std::abs(l.a - r.a) <= 1e-13 &&
                      std::abs(l.b - r.b) <= 1e-13 * (1.0 + std::abs(l.b)) &&
                      std::abs(l.c - r.c) <= 1e-12 * scale;
    if (!same) {
      nb.push_back(t);
      np.push_back(r);
    }
  }
  breaks_ = std::move(nb);
  pieces_ = std::move(np);
}

void PiecewiseConvexFn::validate() const {
  if (std::isnan(lo_) || std::isnan(hi_) || lo_ > hi_)
    throw std::invalid_argument("PiecewiseConvexFn: empty or invalid domain");
  if (lo_ == kInf || hi_ == -kInf)
    throw std::invalid_argument("PiecewiseConvexFn: domain at infinity");
  if (pieces_.empty()) throw std::invalid_argument("PiecewiseConvexFn: no pieces");
  if (pieces_.size() != breaks_.size() + 1)
    throw std::invalid_argument("PiecewiseConvexFn: piece/breakpoint mismatch");
  if (lo_ == hi_ && !breaks_.empty())
    throw std::invalid_argument("PiecewiseConvexFn: breakpoints in a point domain");
  double prev = lo_;
  for (double t : breaks_) {
    if (!std::isfinite(t) || t <= prev || t >= hi_)
      throw std::invalid_argument("PiecewiseConvexFn: breakpoints not increasing inside domain");
    prev = t;
  }
  for (const QuadPiece& p : pieces_) {
    if (std::isnan(p.a) || std::isnan(p.b) || std::isnan(p.c))
      throw std::invalid_argument("PiecewiseConvexFn: NaN coefficient");
    if (p.a < -1e-13)
      throw std::invalid_argument("PiecewiseConvexFn: negative curvature");
  }
  // Convexity = nondecreasing slopes within and across pieces; closedness =
  // continuity at every interior junction.
  for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
    const double t = breaks_[i];
    const double vl = pieces_[i].eval(t);
    const double vr = pieces_[i + 1].eval(t);
    const double scale = 1.0 + std::max(std::abs(vl), std::abs(vr));
    if (std::abs(vl - vr) > kJoinTol * scale)
      throw std::invalid_argument("PiecewiseConvexFn: discontinuous at breakpoint");
    const double sl = pieces_[i].slope(t);
    const double sr = pieces_[i + 1].slope(t);
    if (sl > sr + kSlopeTol * (1.0 + std::abs(sl)))
      throw std::invalid_argument("PiecewiseConvexFn: slopes decrease at breakpoint");
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const double l = (i == 0) ? lo_ : breaks_[i - 1];
    const double r = (i == breaks_.size()) ? hi_ : breaks_[i];
    if (pieces_[i].a > 0.0) continue;  // slope monotone within piece anyway
    (void)l;
    (void)r;
  }
}

std::size_t PiecewiseConvexFn::piece_index(double x) const {
  // First piece whose right boundary is >= x.
  const auto it = std::lower_bound(breaks_.begin(), breaks_.end(), x);
  return static_cast<std::size_t>(it - breaks_.begin());
}

ExtReal PiecewiseConvexFn::eval(double x) const {
  if (std::isnan(x)) throw std::invalid_argument("eval: NaN argument");
  if (x < lo_ || x > hi_) return ExtReal::pos_inf();
  if (!std::isfinite(x)) return ExtReal::pos_inf();
  return ExtReal(pieces_[piece_index(x)].eval(x));
}

double PiecewiseConvexFn::slope_left(double x) const {
  if (x <= lo_) return -kInf;
  if (x > hi_) return kInf;
  std::size_t i = piece_index(x);
  // At a breakpoint the left derivative comes from the piece to the left.
  if (i > 0 && x == breaks_[i - 1]) --i;
  return piece_slope_at(pieces_[i], x, 1.0);
}

double PiecewiseConvexFn::slope_right(double x) const {
  if (x >= hi_) return kInf;
  if (x < lo_) return -kInf;
  const std::size_t i = piece_index(x);
  return piece_slope_at(pieces_[i], x, -1.0);
}

ExtReal PiecewiseConvexFn::min_value() const {
  double best = kInf;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const double l = (i == 0) ? lo_ : breaks_[i - 1];
    const double r = (i == breaks_.size()) ? hi_ : breaks_[i];
    const QuadPiece& p = pieces_[i];
    if (p.a > 0.0) {
      const double xv = -p.b / (2.0 * p.a);
      const double x = std::min(std::max(xv, l), r);
      if (std::isfinite(x)) best = std::min(best, p.eval(x));
      // An infinite vertex clamp means the minimum over this piece is at the
      // finite end, handled below.
    } else if (p.b == 0.0) {
      best = std::min(best, p.c);
    } else {
      const double x = (p.b > 0.0) ? l : r;
      if (!std::isfinite(x)) return ExtReal::neg_inf();
      best = std::min(best, p.eval(x));
    }
    if (std::isfinite(l)) best = std::min(best, p.eval(l));
    if (std::isfinite(r)) best = std::min(best, p.eval(r));
  }
  return ExtReal(best);
}

std::pair<ExtReal, ExtReal> PiecewiseConvexFn::recession_slopes() const {
  ExtReal lo_slope = ExtReal::neg_inf();
  ExtReal hi_slope = ExtReal::pos_inf();
  if (lo_ > -kInf) {
    lo_slope = ExtReal::neg_inf();  // f = +inf below lo: f(k)/k -> -inf (k<0)
  } else {
    const QuadPiece& p = pieces_.front();
    lo_slope = (p.a > 0.0) ? ExtReal::neg_inf() : ExtReal(p.b);
  }
  if (hi_ < kInf) {
    hi_slope = ExtReal::pos_inf();
  } else {
    const QuadPiece& p = pieces_.back();
    hi_slope = (p.a > 0.0) ? ExtReal::pos_inf() : ExtReal(p.b);
  }
  return {lo_slope, hi_slope};
}

ExtReal PiecewiseConvexFn::perspective(double y, double z) const {
  if (std::isnan(y) || std::isnan(z)) throw std::invalid_argument("perspective: NaN");
  if (z < 0.0) throw std::invalid_argument("perspective: z < 0");
  if (z > 0.0) {
    const ExtReal v = eval(y / z);
    if (v.is_pos_inf()) return v;
    return ExtReal(z * v.value());
  }
  if (y == 0.0) return ExtReal(0.0);
  const auto [am, ap] = recession_slopes();
  const ExtReal dir = (y > 0.0) ? ap : am;
  return ExtReal(y) * dir;
}

double PiecewiseConvexFn::argmax_affine_gap(double y) const {
  // Leftmost maximizer of g(x) = x*y - f(x); g concave with slopes y - f'(x)
  // decreasing, so the maximizer is the first x where the right slope of f
  // reaches y.
  if (lo_ == hi_) return lo_;
  if (lo_ > -kInf) {
    if (slope_right(lo_) >= y) return lo_;
  } else {
    const QuadPiece& p = pieces_.front();
    const double s0 = (p.a > 0.0) ? -kInf : p.b;
    if (s0 >= y) return -kInf;  // sup approached along x -> -inf
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const double l = (i == 0) ? lo_ : breaks_[i - 1];
    const double r = (i == breaks_.size()) ? hi_ : breaks_[i];
    const QuadPiece& p = pieces_[i];
    const double sl = piece_slope_at(p, l, -1.0);
    const double sr = piece_slope_at(p, r, 1.0);
    if (y < sl) return l;  // kink at l swallows y
    if (y <= sr) {
      if (p.a > 0.0) return (y - p.b) / (2.0 * p.a);
      return l;  // linear piece with slope == y: leftmost point
    }
  }
  return hi_;  // +inf when the domain is unbounded above
}

std::pair<double, double> PiecewiseConvexFn::argmax_affine_interval(double y) const {
  const double left = argmax_affine_gap(y);
  // Rightmost maximizer: last x whose left slope is still <= y.
  if (lo_ == hi_) return {lo_, hi_};
  double right = left;
  if (hi_ < kInf) {
    if (slope_left(hi_) <= y) return {left, hi_};
  } else {
    const QuadPiece& p = pieces_.back();
    const double s_end = (p.a > 0.0) ? kInf : p.b;
    if (s_end <= y) return {left, kInf};
  }
  for (std::size_t k = pieces_.size(); k-- > 0;) {
    const double l = (k == 0) ? lo_ : breaks_[k - 1];
    const double r = (k == breaks_.size()) ? hi_ : breaks_[k];
    const QuadPiece& p = pieces_[k];
    const double sl = piece_slope_at(p, l, -1.0);
    const double sr = piece_slope_at(p, r, 1.0);
    if (sl > y) continue;  // entire piece has slopes above y
    if (sr <= y) {
      right = r;  // slope y swallowed by the kink at r (or piece ends at it)
      break;
    }
    right = (p.a > 0.0) ? (y - p.b) / (2.0 * p.a) : r;
    break;
  }
  return {left, std::max(left, right)};
}

PiecewiseConvexFn PiecewiseConvexFn::legendre(std::size_t piece_cap) const {
  struct Segment {
    double ylo, yhi;
    QuadPiece p;
  };
  std::vector<Segment> segs;
  segs.reserve(pieces_.size() * 2 + 2);

  auto push = [&segs](double ylo, double yhi, QuadPiece p) {
    if (yhi < ylo) return;
    if (yhi == ylo && !segs.empty()) return;  // zero-width, kink only
    segs.push_back({ylo, yhi, p});
  };

  // Point domain: conjugate is the affine function x0*y - f(x0).
  if (lo_ == hi_) {
    const double v = pieces_[0].eval(lo_);
    return PiecewiseConvexFn(-kInf, kInf, {}, {{0.0, lo_, -v}});
  }

  // Left tail: slopes below the initial slope map to the left endpoint.
  const double s_first =
      piece_slope_at(pieces_.front(), lo_, (pieces_.front().a > 0.0 && lo_ == -kInf) ? -1.0 : 1.0);
  double dom_lo;
  if (lo_ > -kInf) {
    dom_lo = -kInf;
    push(-kInf, s_first, {0.0, lo_, -pieces_.front().eval(lo_)});
  } else {
    // Unbounded domain: conjugate is +inf below the recession slope.
    dom_lo = (pieces_.front().a > 0.0) ? -kInf : pieces_.front().b;
  }

  double prev_slope = s_first;
  double prev_x = lo_;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const double l = (i == 0) ? lo_ : breaks_[i - 1];
    const double r = (i == breaks_.size()) ? hi_ : breaks_[i];
    const QuadPiece& p = pieces_[i];
    const double sl = piece_slope_at(p, l, -1.0);
    const double sr = piece_slope_at(p, r, 1.0);
    // Kink between previous piece and this one: affine stretch of slope l.
    if (i > 0 && sl > prev_slope) {
      push(prev_slope, sl, {0.0, l, -pieces_[i - 1].eval(l)});
    }
    if (p.a > 0.0 && sr > sl) {
      // Interior stretch: f*(y) = (y-b)^2/(4a) - c on [sl, sr].
      push(std::max(sl, prev_slope), sr,
           {1.0 / (4.0 * p.a), -p.b / (2.0 * p.a), p.b * p.b / (4.0 * p.a) - p.c});
    }
    prev_slope = std::max(prev_slope, sr);
    prev_x = r;
  }

  double dom_hi;
  if (hi_ < kInf) {
    dom_hi = kInf;
    push(prev_slope, kInf, {0.0, hi_, -pieces_.back().eval(hi_)});
  } else {
    dom_hi = (pieces_.back().a > 0.0) ? kInf : pieces_.back().b;
    (void)prev_x;
  }

  if (segs.empty()) {
    // All slope ranges degenerate: f is affine on an unbounded domain, the
    // conjugate lives on the single point dom_lo == dom_hi.
    const double y0 = dom_lo;
    // f(x) = b*x + c on R => f*(b) = -c.
    return PiecewiseConvexFn(y0, y0, {}, {{0.0, 0.0, -pieces_.front().c}});
  }

  if (segs.size() > piece_cap)
    throw std::overflow_error("legendre: piece cap exceeded");

  std::vector<double> nb;
  std::vector<QuadPiece> np;
  np.push_back(segs.front().p);
  for (std::size_t i = 1; i < segs.size(); ++i) {
    nb.push_back(segs[i].ylo);
    np.push_back(segs[i].p);
  }
  return PiecewiseConvexFn(dom_lo, dom_hi, std::move(nb), std::move(np));
}

// -- builders ----------------------------------------------------------------

PiecewiseConvexFn PiecewiseConvexFn::quadratic(double a, double b, double c) {
  if (a < 0.0) throw std::invalid_argument("quadratic: a < 0");
  return PiecewiseConvexFn(-kInf, kInf, {}, {{a, b, c}});
}

PiecewiseConvexFn PiecewiseConvexFn::linear(double b, double c) {
  return PiecewiseConvexFn(-kInf, kInf, {}, {{0.0, b, c}});
}

PiecewiseConvexFn PiecewiseConvexFn::abs_scaled(double s) {
  if (s < 0.0) throw std::invalid_argument("abs_scaled: s < 0");
  if (s == 0.0) return linear(0.0, 0.0);
  return PiecewiseConvexFn(-kInf, kInf, {0.0}, {{0.0, -s, 0.0}, {0.0, s, 0.0}});
}

PiecewiseConvexFn PiecewiseConvexFn::indicator_interval(double lo, double hi) {
  return PiecewiseConvexFn(lo, hi, {}, {{0.0, 0.0, 0.0}});
}

PiecewiseConvexFn PiecewiseConvexFn::support_interval(double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("support_interval: empty interval");
  if (lo == hi) return linear(lo, 0.0);
  return PiecewiseConvexFn(-kInf, kInf, {0.0}, {{0.0, lo, 0.0}, {0.0, hi, 0.0}});
}

PiecewiseConvexFn PiecewiseConvexFn::single_point(double x0, double v0) {
  return PiecewiseConvexFn(x0, x0, {}, {{0.0, 0.0, v0}});
}

PiecewiseConvexFn PiecewiseConvexFn::sample_convex(
    const std::function<double(double)>& g, const std::vector<double>& knots,
    double left_slope, double right_slope) {
  if (knots.size() < 2) throw std::invalid_argument("sample_convex: need >= 2 knots");
  std::vector<double> nb;
  std::vector<QuadPiece> np;
  std::vector<double> vals(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) vals[i] = g(knots[i]);

  double lo = knots.front(), hi = knots.back();
  if (!std::isnan(left_slope)) {
    lo = -kInf;
    np.push_back({0.0, left_slope, vals.front() - left_slope * knots.front()});
    nb.push_back(knots.front());
  }
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double s = (vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i]);
    np.push_back({0.0, s, vals[i] - s * knots[i]});
    if (i + 2 < knots.size()) nb.push_back(knots[i + 1]);
  }
  if (!std::isnan(right_slope)) {
    hi = kInf;
    nb.push_back(knots.back());
    np.push_back({0.0, right_slope, vals.back() - right_slope * knots.back()});
  }
  return PiecewiseConvexFn(lo, hi, std::move(nb), std::move(np));
}

// -- exact transforms ----------------------------------------------------------

PiecewiseConvexFn PiecewiseConvexFn::scale_arg(double w) const {
  if (!(w > 0.0)) throw std::invalid_argument("scale_arg: w must be > 0");
  std::vector<double> nb(breaks_);
  for (double& t : nb) t /= w;
  std::vector<QuadPiece> np(pieces_);
  for (QuadPiece& p : np) {
    p.a *= w * w;
    p.b *= w;
  }
  return PiecewiseConvexFn(lo_ / w, hi_ / w, std::move(nb), std::move(np));
}

PiecewiseConvexFn PiecewiseConvexFn::shift_arg(double s) const {
  std::vector<double> nb(breaks_);
  for (double& t : nb) t -= s;
  std::vector<QuadPiece> np(pieces_);
  for (QuadPiece& p : np) {
    // f(x+s): substitute.
    const double a = p.a, b = p.b, c = p.c;
    p.a = a;
    p.b = 2.0 * a * s + b;
    p.c = (a * s + b) * s + c;
  }
  return PiecewiseConvexFn(lo_ - s, hi_ - s, std::move(nb), std::move(np));
}

PiecewiseConvexFn PiecewiseConvexFn::add_linear(double s, double t) const {
  std::vector<QuadPiece> np(pieces_);
  for (QuadPiece& p : np) {
    p.b += s;
    p.c += t;
  }
  return PiecewiseConvexFn(lo_, hi_, breaks_, std::move(np));
}

PiecewiseConvexFn PiecewiseConvexFn::reflect() const {
  std::vector<double> nb(breaks_.rbegin(), breaks_.rend());
  for (double& t : nb) t = -t;
  std::vector<QuadPiece> np(pieces_.rbegin(), pieces_.rend());
  for (QuadPiece& p : np) p.b = -p.b;
  return PiecewiseConvexFn(-hi_, -lo_, std::move(nb), std::move(np));
}

bool PiecewiseConvexFn::approx_equal(const PiecewiseConvexFn& o, double tol) const {
  auto close = [tol](double a, double b) {
    if (a == b) return true;
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
  };
  if (!close(lo_, o.lo_) && !(lo_ == o.lo_)) return false;
  if (!close(hi_, o.hi_) && !(hi_ == o.hi_)) return false;

  std::vector<double> probes;
  auto add_probes = [&probes](const PiecewiseConvexFn& f) {
    for (double t : f.breaks_) probes.push_back(t);
    if (std::isfinite(f.lo_)) probes.push_back(f.lo_);
    if (std::isfinite(f.hi_)) probes.push_back(f.hi_);
  };
  add_probes(*this);
  add_probes(o);
  if (probes.empty()) probes.push_back(0.0);
  std::sort(probes.begin(), probes.end());
  const double span = std::max(1.0, probes.back() - probes.front());
  std::vector<double> pts;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    pts.push_back(probes[i]);
    if (i + 1 < probes.size()) pts.push_back(0.5 * (probes[i] + probes[i + 1]));
  }
  pts.push_back(probes.front() - 0.37 * span);
  pts.push_back(probes.back() + 0.37 * span);
  for (double x : pts) {
    const ExtReal a = eval(x), b = o.eval(x);
    if (a.is_pos_inf() != b.is_pos_inf()) return false;
    if (a.is_finite() && !close(a.value(), b.value())) return false;
  }
  return true;
}

bool check_young_pointwise(const PiecewiseConvexFn& f,
                           const PiecewiseConvexFn& fstar, double x, double y,
                           double z, double tol) {
  const ExtReal fx = f.eval(x);
  if (fx.is_pos_inf()) throw std::invalid_argument("check_young_pointwise: x outside dom f");
  const ExtReal rhs_pers = fstar.perspective(y, z);
  if (rhs_pers.is_pos_inf()) return true;
  const double rhs = z * fx.value() + rhs_pers.value();
  const double scale = 1.0 + std::abs(rhs) + std::abs(x * y);
  return x * y <= rhs + tol * scale;
}

}  // namespace rfenchel
