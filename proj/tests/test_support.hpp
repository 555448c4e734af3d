#ifndef RFENCHEL_TEST_SUPPORT_HPP
#define RFENCHEL_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "rfenchel/penalty.hpp"
#include "rfenchel/piecewise_convex.hpp"
#include "rfenchel/rng.hpp"
#include "rfenchel/space.hpp"

namespace rftest {

using rfenchel::Density;
using rfenchel::ExtReal;
using rfenchel::kInf;
using rfenchel::PiecewiseConvexFn;
using rfenchel::QuadPiece;
using rfenchel::RandomVariable;
using rfenchel::Rng;
using rfenchel::SpacePtr;

// Random closed proper convex PLQ function built from a nondecreasing slope
// profile, so the invariants hold by construction.
struct PlqOptions {
  int max_pieces = 4;
  double coord_scale = 3.0;
  bool allow_quadratic = true;
  bool allow_bounded_domain = true;
};

inline PiecewiseConvexFn random_plq(Rng& rng, const PlqOptions& opt = {}) {
  const int pieces = 1 + static_cast<int>(rng.below(opt.max_pieces));
  std::vector<double> knots(pieces + 1);
  double t = rng.uniform(-opt.coord_scale, 0.0);
  for (int i = 0; i <= pieces; ++i) {
    knots[i] = t;
    t += rng.uniform(0.3, opt.coord_scale);
  }
  const bool lo_inf = !opt.allow_bounded_domain || rng.uniform() < 0.6;
  const bool hi_inf = !opt.allow_bounded_domain || rng.uniform() < 0.6;

  std::vector<double> breaks;
  std::vector<QuadPiece> qp;
  double slope = rng.uniform(-2.0, 0.5);
  double value = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < pieces; ++i) {
    const double xl = knots[i];
    double a = 0.0;
    if (opt.allow_quadratic && rng.uniform() < 0.5) a = rng.uniform(0.05, 1.0);
    const double b = slope - 2.0 * a * xl;
    const double c = value - (a * xl + b) * xl;
    qp.push_back({a, b, c});
    const double xr = knots[i + 1];
    value = (a * xr + b) * xr + c;
    slope = 2.0 * a * xr + b;
    if (rng.uniform() < 0.5) slope += rng.uniform(0.0, 1.5);  // kink
    if (i + 1 < pieces) breaks.push_back(xr);
  }
  const double lo = lo_inf ? -kInf : knots.front();
  const double hi = hi_inf ? kInf : knots.back();
  return PiecewiseConvexFn(lo, hi, std::move(breaks), std::move(qp));
}

// Brute-force conjugate oracle: max over an x-grid of x*y - f(x), restricted
// to the domain. Independent of the exact transform code path.
inline double brute_conjugate(const PiecewiseConvexFn& f, double y, double radius = 64.0,
                              int points = 200001) {
  const double lo = std::max(f.domain_lo(), -radius);
  const double hi = std::min(f.domain_hi(), radius);
  double best = -kInf;
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / static_cast<double>(points - 1);
    const ExtReal v = f.eval(x);
    if (v.is_pos_inf()) continue;
    best = std::max(best, x * y - v.value());
  }
  return best;
}

inline SpacePtr random_space(Rng& rng, std::size_t m) {
  std::vector<double> w(m);
  double s = 0.0;
  for (auto& v : w) {
    v = rng.uniform(0.2, 1.0);
    s += v;
  }
  for (auto& v : w) v /= s;
  // Renormalize exactly against accumulated rounding.
  double s2 = 0.0;
  for (double v : w) s2 += v;
  w[0] += 1.0 - s2;
  return rfenchel::make_space(w);
}

inline Density random_density(Rng& rng, const SpacePtr& sp) {
  std::vector<double> d(sp->size());
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = rng.uniform(0.05, 2.0);
    mean += d[i] * sp->weight(i);
  }
  for (auto& v : d) v /= mean;
  double mean2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) mean2 += d[i] * sp->weight(i);
  d[0] += (1.0 - mean2) / sp->weight(0);
  return Density(sp, d);
}

inline RandomVariable random_rv(Rng& rng, const SpacePtr& sp, double scale = 3.0) {
  std::vector<double> v(sp->size());
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return RandomVariable(sp, v);
}

inline rfenchel::Penalty random_penalty(Rng& rng, const SpacePtr& sp, int kind3) {
  using rfenchel::Penalty;
  switch (kind3 % 3) {
    case 0:
      return Penalty::dirac(random_density(rng, sp));
    case 1: {
      std::vector<Density> verts;
      const int n = 2 + static_cast<int>(rng.below(2));
      for (int k = 0; k < n; ++k) verts.push_back(random_density(rng, sp));
      return Penalty::polyhedral(std::move(verts));
    }
    default:
      return Penalty::entropic(sp);
  }
}

// Sampled e^x on [lo, hi] with constant continuation to the left and steep
// linear continuation to the right; convex on all of R.
inline PiecewiseConvexFn sampled_exp(double lo, double hi, int knots) {
  std::vector<double> xs(knots);
  for (int i = 0; i < knots; ++i)
    xs[i] = lo + (hi - lo) * i / static_cast<double>(knots - 1);
  return PiecewiseConvexFn::sample_convex([](double x) { return std::exp(x); }, xs, 0.0,
                                          std::exp(hi));
}

}  // namespace rftest

#endif
