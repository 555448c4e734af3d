#include "rfenchel/simplex_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfenchel {

Min1DResult minimize_convex_1d(const std::function<double(double)>& f, double lo,
                               double hi, int rounds, int points) {
  if (!(lo <= hi)) throw std::invalid_argument("minimize_convex_1d: empty interval");
  if (points < 5) points = 5;
  Min1DResult best;
  best.x = lo;
  best.value = kInf;
  double a = lo, b = hi;
  for (int r = 0; r < rounds; ++r) {
    const double h = (b - a) / (points - 1);
    int arg = -1;
    double val = kInf;
    for (int i = 0; i < points; ++i) {
      const double x = (i == points - 1) ? b : a + h * i;
      const double v = f(x);
      if (v < val) {
        val = v;
        arg = i;
      }
    }
    if (arg < 0 || val == kInf) {
      // Everything infinite on this mesh: either the finite set is thinner
      // than the mesh or the function is +inf on [a, b]. Halve around the
      // middle a few times before giving up.
      const double mid = 0.5 * (a + b);
      const double w = 0.25 * (b - a);
      a = mid - w;
      b = mid + w;
      if (b - a < 1e-300) break;
      continue;
    }
    if (val < best.value) {
      best.value = val;
      best.x = (arg == points - 1) ? b : a + h * arg;
    }
    const double xa = std::max(a, best.x - h);
    const double xb = std::min(b, best.x + h);
    a = xa;
    b = xb;
    const double scale = 1.0 + std::abs(best.x);
    if (b - a <= 1e-16 * scale) break;
  }
  return best;
}

namespace {

// Probes a deterministic set of feasible points until the objective is
// finite; pairwise-CD needs a finite anchor. Every probe satisfies
// sum_i w_i psi_i = 1 exactly up to rounding.
bool find_finite_start(const std::function<double(const std::vector<double>&)>& f,
                       const std::vector<double>& weights, std::vector<double>& psi,
                       double& val) {
  const std::size_t m = weights.size();
  std::vector<std::vector<double>> probes;
  {
    // Equal mass per atom.
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = 1.0 / (weights[i] * m);
    probes.push_back(std::move(v));
  }
  {
    // The reference density, feasible iff the weights are a probability.
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (std::abs(wsum - 1.0) <= 1e-9) probes.push_back(std::vector<double>(m, 1.0));
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> v(m, 0.0);
    v[i] = 1.0 / weights[i];
    probes.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      std::vector<double> v(m, 0.0);
      v[i] = 0.5 / weights[i];
      v[j] = 0.5 / weights[j];
      probes.push_back(std::move(v));
    }
  }
  for (auto& p : probes) {
    const double v = f(p);
    if (v < kInf) {
      psi = std::move(p);
      val = v;
      return true;
    }
  }
  return false;
}

}  // namespace

SimplexSolveResult minimize_on_weighted_simplex(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& weights, const SimplexSolveOptions& opt,
    const std::vector<double>* warm_start) {
  const std::size_t m = weights.size();
  SimplexSolveResult res;
  if (m == 0) throw std::invalid_argument("minimize_on_weighted_simplex: empty");
  if (m == 1) {
    res.point = {1.0 / weights[0]};
    res.value = objective(res.point);
    res.feasible = res.value < kInf;
    return res;
  }

  std::vector<double> psi;
  double val = kInf;
  if (warm_start && warm_start->size() == m && objective(*warm_start) < kInf) {
    psi = *warm_start;
    val = objective(psi);
  } else if (!find_finite_start(objective, weights, psi, val)) {
    res.feasible = false;
    return res;
  }

  std::vector<double> trial(psi);
  std::vector<double> best_psi(psi);
  double best_val = val;
  for (int pass = 0; pass <= opt.restarts; ++pass) {
    for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
      const double before = val;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
          // Move t along e_i/w_i - e_j/w_j: feasible for
          // t in [-w_i psi_i, w_j psi_j].
          const double tlo = -weights[i] * psi[i];
          const double thi = weights[j] * psi[j];
          if (thi - tlo <= 0.0) continue;
          auto line = [&](double t) {
            trial = psi;
            trial[i] = psi[i] + t / weights[i];
            trial[j] = psi[j] - t / weights[j];
            if (trial[i] < 0.0) trial[i] = 0.0;
            if (trial[j] < 0.0) trial[j] = 0.0;
            return objective(trial);
          };
          const Min1DResult r =
              minimize_convex_1d(line, tlo, thi, opt.line_rounds, opt.line_points);
          if (r.value < val) {
            val = r.value;
            psi[i] += r.x / weights[i];
            psi[j] -= r.x / weights[j];
            if (psi[i] < 0.0) psi[i] = 0.0;
            if (psi[j] < 0.0) psi[j] = 0.0;
          }
        }
      }
      ++res.sweeps_used;
      const double scale = 1.0 + std::abs(val);
      if (before - val <= opt.stall_tol * scale) break;
    }
    if (val < best_val) {
      best_val = val;
      best_psi = psi;
    }
    if (pass == opt.restarts) break;
    // Deterministic interior nudge toward the barycenter (mass-feasible for
    // any weights) to escape pairwise-descent stalls at boundary kinks; the
    // incumbent is kept, so a failed escape costs nothing.
    const double mix = 1e-3 / (pass + 1.0);
    std::vector<double> nudged(m);
    for (std::size_t i = 0; i < m; ++i)
      nudged[i] = (1.0 - mix) * best_psi[i] + mix / (weights[i] * m);
    const double nv = objective(nudged);
    if (nv < kInf) {
      psi = std::move(nudged);
      val = nv;
    } else {
      psi = best_psi;
      val = best_val;
    }
  }

  res.point = std::move(best_psi);
  res.value = best_val;
  res.feasible = true;
  return res;
}

SimplexSolveResult minimize_on_unit_simplex(
    const std::function<double(const std::vector<double>&)>& objective,
    std::size_t n, const SimplexSolveOptions& opt,
    const std::vector<double>* warm_start) {
  std::vector<double> ones(n, 1.0);
  return minimize_on_weighted_simplex(objective, ones, opt, warm_start);
}

SimplexSolveResult minimize_on_weighted_simplex_nested(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<double>& weights, int rounds, int points) {
  const std::size_t m = weights.size();
  SimplexSolveResult res;
  if (m == 0 || m > 3)
    throw std::invalid_argument("minimize_on_weighted_simplex_nested: dim must be 1..3");
  std::vector<double> psi(m, 0.0);
  if (m == 1) {
    psi[0] = 1.0 / weights[0];
    res.point = psi;
    res.value = objective(psi);
    res.feasible = res.value < kInf;
    return res;
  }
  if (m == 2) {
    double best_s = 0.0;
    auto line = [&](double s) {
      psi[0] = s / weights[0];
      psi[1] = (1.0 - s) / weights[1];
      return objective(psi);
    };
    const Min1DResult r = minimize_convex_1d(line, 0.0, 1.0, rounds, points);
    best_s = r.x;
    psi[0] = best_s / weights[0];
    psi[1] = (1.0 - best_s) / weights[1];
    res.point = psi;
    res.value = r.value;
    res.feasible = r.value < kInf;
    return res;
  }
  // m == 3: outer mass on atom 0, inner mass on atom 1; the profile of a
  // convex function under partial minimization stays convex.
  std::vector<double> trial(3, 0.0);
  double best_s0 = 0.0, best_s1 = 0.0, best = kInf;
  auto inner = [&](double s0) {
    auto line = [&](double s1) {
      trial[0] = s0 / weights[0];
      trial[1] = s1 / weights[1];
      trial[2] = (1.0 - s0 - s1) / weights[2];
      if (trial[2] < 0.0) return kInf;
      return objective(trial);
    };
    return minimize_convex_1d(line, 0.0, 1.0 - s0, rounds, points);
  };
  auto outer = [&](double s0) { return inner(s0).value; };
  const Min1DResult ro = minimize_convex_1d(outer, 0.0, 1.0, rounds, points);
  best_s0 = ro.x;
  const Min1DResult ri = inner(best_s0);
  best_s1 = ri.x;
  best = ri.value;
  psi[0] = best_s0 / weights[0];
  psi[1] = best_s1 / weights[1];
  psi[2] = (1.0 - best_s0 - best_s1) / weights[2];
  if (psi[2] < 0.0) psi[2] = 0.0;
  res.point = psi;
  res.value = best;
  res.feasible = best < kInf;
  return res;
}

void gradient_polish_on_weighted_simplex(
    const std::function<std::vector<double>(const std::vector<double>&)>& subgrad,
    const std::vector<double>& weights, std::vector<double>& psi, int sweeps) {
  const std::size_t m = weights.size();
  std::vector<double> trial(psi);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        double tlo = -weights[i] * psi[i];
        double thi = weights[j] * psi[j];
        if (thi <= tlo) continue;
        auto dphi = [&](double t) {
          trial = psi;
          trial[i] = std::max(0.0, psi[i] + t / weights[i]);
          trial[j] = std::max(0.0, psi[j] - t / weights[j]);
          const std::vector<double> g = subgrad(trial);
          return g[i] / weights[i] - g[j] / weights[j];
        };
        double dlo = dphi(tlo), dhi = dphi(thi);
        double t;
        if (dlo >= 0.0)
          t = tlo;
        else if (dhi <= 0.0)
          t = thi;
        else {
          for (int it = 0; it < 80; ++it) {
            t = 0.5 * (tlo + thi);
            (dphi(t) < 0.0 ? tlo : thi) = t;
            if (thi - tlo < 1e-17 * (1.0 + std::abs(t))) break;
          }
          t = 0.5 * (tlo + thi);
        }
        if (t != 0.0) {
          psi[i] = std::max(0.0, psi[i] + t / weights[i]);
          psi[j] = std::max(0.0, psi[j] - t / weights[j]);
        }
      }
    }
  }
}

double simplex_fw_gap(const std::vector<double>& subgrad,
                      const std::vector<double>& psi,
                      const std::vector<double>& weights) {
  // min over vertices v = e_i/w_i of <g, v>; gap = <g, psi> - that minimum.
  double gpsi = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) gpsi += subgrad[i] * psi[i];
  double vmin = kInf;
  for (std::size_t i = 0; i < psi.size(); ++i)
    vmin = std::min(vmin, subgrad[i] / weights[i]);
  return gpsi - vmin;
}

BoxSolveResult minimize_on_box(
    const std::function<double(const std::vector<double>&)>& objective,
    std::vector<double> start, const std::vector<double>& hi, int sweeps,
    int line_rounds, int line_points) {
  const std::size_t k = start.size();
  BoxSolveResult res;
  std::vector<double> x = std::move(start);
  double val = objective(x);
  std::vector<double> trial(x);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double before = val;
    for (std::size_t i = 0; i < k; ++i) {
      auto line = [&](double t) {
        trial = x;
        trial[i] = t;
        return objective(trial);
      };
      const Min1DResult r = minimize_convex_1d(line, 0.0, hi[i], line_rounds, line_points);
      if (r.value < val) {
        val = r.value;
        x[i] = r.x;
      }
    }
    // Joint radial search helps on cones where the optimum scales all
    // coordinates together.
    if (k > 1) {
      double smax = 4.0;
      for (std::size_t i = 0; i < k; ++i)
        if (x[i] > 0.0) smax = std::min(smax, hi[i] / x[i]);
      auto ray = [&](double s) {
        for (std::size_t i = 0; i < k; ++i) trial[i] = s * x[i];
        return objective(trial);
      };
      const Min1DResult r = minimize_convex_1d(ray, 0.0, smax, line_rounds, line_points);
      if (r.value < val) {
        val = r.value;
        for (std::size_t i = 0; i < k; ++i) x[i] *= r.x;
      }
    }
    if (before - val <= 1e-15 * (1.0 + std::abs(val))) break;
  }
  res.hit_boundary = false;
  for (std::size_t i = 0; i < k; ++i)
    if (x[i] >= hi[i] * (1.0 - 1e-9)) res.hit_boundary = true;
  res.point = std::move(x);
  res.value = val;
  return res;
}

}  // namespace rfenchel
