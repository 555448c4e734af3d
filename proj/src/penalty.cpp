#include "rfenchel/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rfenchel/simplex_solver.hpp"

namespace rfenchel {

namespace {

constexpr double kDiracMatchTol = 1e-12;
constexpr double kMembershipTol = 1e-10;
constexpr double kCustomGapTarget = 1e-9;

double xlogx(double x) {
  if (x < 0.0) throw std::invalid_argument("xlogx: negative");
  if (x == 0.0) return 0.0;
  return x * std::log(x);
}

// Dense Gaussian elimination with partial pivoting; returns false when the
// system is numerically singular.
bool solve_dense(std::vector<std::vector<double>> A, std::vector<double>& b) {
  const std::size_t n = A.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    if (std::abs(A[piv][c]) < 1e-14) return false;
    std::swap(A[piv], A[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double fct = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= fct * A[c][k];
      b[r] -= fct * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    for (std::size_t k = c + 1; k < n; ++k) b[c] -= A[c][k] * b[k];
    b[c] /= A[c][c];
  }
  return true;
}

// Exact distance from q to conv(vertices) by enumerating active sets: for
// each support S, solve the equality-constrained least squares KKT system
// and keep feasible solutions. The vertex count is small by construction.
double simplex_fit_residual(const std::vector<Density>& vertices,
                            const std::vector<double>& q) {
  const std::size_t n = vertices.size();
  const std::size_t m = q.size();
  double best = kInf;
  for (std::size_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> S;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (1u << k)) S.push_back(k);
    const std::size_t s = S.size();
    // KKT of min ||V l - q||^2 s.t. sum l = 1: [2 V^T V, 1; 1^T, 0].
    std::vector<std::vector<double>> A(s + 1, std::vector<double>(s + 1, 0.0));
    std::vector<double> b(s + 1, 0.0);
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t c = 0; c < s; ++c) {
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) dot += vertices[S[a]][i] * vertices[S[c]][i];
        A[a][c] = 2.0 * dot;
      }
      A[a][s] = 1.0;
      A[s][a] = 1.0;
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += vertices[S[a]][i] * q[i];
      b[a] = 2.0 * dot;
    }
    b[s] = 1.0;
    if (!solve_dense(A, b)) continue;
    bool feas = true;
    for (std::size_t a = 0; a < s; ++a) feas = feas && b[a] >= -1e-11;
    if (!feas) continue;
    double resid = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double mix = 0.0;
      for (std::size_t a = 0; a < s; ++a) mix += b[a] * vertices[S[a]][i];
      const double d = mix - q[i];
      resid += d * d;
    }
    best = std::min(best, std::sqrt(resid));
  }
  return best;
}

}  // namespace

Penalty::Penalty(PenaltyKind k, SpacePtr s) : kind_(k), space_(std::move(s)) {
  if (!space_) throw std::invalid_argument("Penalty: null space");
  visible_.assign(space_->size(), false);
}

Penalty Penalty::dirac(Density center) {
  Penalty p(PenaltyKind::Dirac, center.space());
  for (std::size_t i = 0; i < center.size(); ++i) p.visible_[i] = center[i] > 0.0;
  p.center_ = std::move(center);
  return p;
}

Penalty Penalty::polyhedral(std::vector<Density> vertices) {
  if (vertices.empty()) throw std::invalid_argument("polyhedral: no vertices");
  Penalty p(PenaltyKind::Polyhedral, vertices.front().space());
  for (const Density& v : vertices) {
    require_same_space(v.space(), p.space_);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] > 0.0) p.visible_[i] = true;
  }
  p.vertices_ = std::move(vertices);
  return p;
}

Penalty Penalty::entropic(SpacePtr space) {
  Penalty p(PenaltyKind::Entropic, std::move(space));
  p.visible_.assign(p.space_->size(), true);
  return p;
}

Penalty Penalty::custom(SpacePtr space, CustomPenaltyOracle oracle) {
  if (!oracle.eval) throw std::invalid_argument("custom: eval oracle required");
  Penalty p(PenaltyKind::Custom, std::move(space));
  p.visible_.assign(p.space_->size(), true);
  // Nonnegativity contract probed at construction.
  const std::size_t m = p.space_->size();
  std::vector<std::vector<double>> probes;
  probes.push_back(std::vector<double>(m, 1.0));
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> v(m, 0.0);
    v[i] = 1.0 / p.space_->weight(i);
    probes.push_back(std::move(v));
  }
  for (const auto& q : probes) {
    const ExtReal g = oracle.eval(q);
    if (g < ExtReal(0.0))
      throw std::invalid_argument("custom: penalty oracle returned a negative value");
  }
  p.oracle_ = std::move(oracle);
  return p;
}

const Density& Penalty::dirac_center() const {
  if (kind_ != PenaltyKind::Dirac) throw std::logic_error("not a Dirac penalty");
  return *center_;
}

const std::vector<Density>& Penalty::vertices() const {
  if (kind_ != PenaltyKind::Polyhedral) throw std::logic_error("not polyhedral");
  return vertices_;
}

const CustomPenaltyOracle& Penalty::oracle() const {
  if (kind_ != PenaltyKind::Custom) throw std::logic_error("not custom");
  return *oracle_;
}

ExtReal Penalty::gamma_raw(const std::vector<double>& psi) const {
  if (psi.size() != space_->size()) throw std::invalid_argument("gamma: dimension mismatch");
  switch (kind_) {
    case PenaltyKind::Dirac: {
      const Density& c = *center_;
      for (std::size_t i = 0; i < psi.size(); ++i)
        if (std::abs(psi[i] - c[i]) > kDiracMatchTol * (1.0 + std::abs(c[i])))
          return ExtReal::pos_inf();
      return ExtReal(0.0);
    }
    case PenaltyKind::Polyhedral: {
      // Membership in conv(vertices) via exact active-set least squares;
      // boundary points count as members.
      if (simplex_fit_residual(vertices_, psi) <=
          kMembershipTol * std::sqrt(static_cast<double>(psi.size())))
        return ExtReal(0.0);
      return ExtReal::pos_inf();
    }
    case PenaltyKind::Entropic: {
      double s = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i) {
        if (psi[i] < 0.0) return ExtReal::pos_inf();
        s += space_->weight(i) * xlogx(psi[i]);
      }
      return ExtReal(s);
    }
    case PenaltyKind::Custom:
      return oracle_->eval(psi);
  }
  throw std::logic_error("unreachable");
}

ExtReal Penalty::gamma(const Density& q) const {
  require_same_space(q.space(), space_);
  return gamma_raw(q.values());
}

namespace {

double log_sum_exp(const FiniteSpace& space, const std::vector<double>& xi) {
  double mx = -kInf;
  for (double v : xi) mx = std::max(mx, v);
  double s = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i)
    s += space.weight(i) * std::exp(xi[i] - mx);
  return mx + std::log(s);
}

struct CustomMax {
  double value;
  std::vector<double> point;
  double gap;  // certified when a subgradient oracle exists, else heuristic
};

CustomMax custom_rho_solve(const Penalty& p, const std::vector<double>& xi) {
  const FiniteSpace& sp = *p.space();
  const std::size_t m = sp.size();
  auto neg_obj = [&](const std::vector<double>& psi) {
    const ExtReal g = p.gamma_raw(psi);
    if (g.is_pos_inf()) return kInf;
    double e = 0.0;
    for (std::size_t i = 0; i < m; ++i) e += sp.weight(i) * psi[i] * xi[i];
    return g.value() - e;
  };
  SimplexSolveOptions opt;
  opt.sweeps = 200;
  opt.restarts = 4;
  const SimplexSolveResult r = minimize_on_weighted_simplex(neg_obj, sp.weights(), opt);
  if (!r.feasible)
    throw std::runtime_error("custom penalty: no feasible model found");
  CustomMax out;
  out.value = -r.value;
  out.point = r.point;
  out.gap = kInf;
  if (p.oracle().subgrad) {
    // Subgradient of the minimized objective gamma(psi) - E[psi xi].
    auto neg_grad = [&](const std::vector<double>& psi) {
      std::vector<double> g = p.oracle().subgrad(psi);
      for (std::size_t i = 0; i < m; ++i) g[i] -= sp.weight(i) * xi[i];
      return g;
    };
    // Value-based line searches stall near the rounding floor; the gradient
    // polish sharpens the point so the FW certificate can reach the target.
    std::vector<double> polished(out.point);
    gradient_polish_on_weighted_simplex(neg_grad, sp.weights(), polished);
    const double gap_cd = simplex_fw_gap(neg_grad(out.point), out.point, sp.weights());
    const double gap_pol = simplex_fw_gap(neg_grad(polished), polished, sp.weights());
    if (gap_pol < gap_cd && neg_obj(polished) < kInf) {
      out.point = polished;
      out.value = -neg_obj(polished);
      out.gap = std::max(0.0, gap_pol);
    } else {
      out.gap = std::max(0.0, gap_cd);
    }
  }
  return out;
}

}  // namespace

double rho_gamma(const Penalty& p, const RandomVariable& xi) {
  require_same_space(xi.space(), p.space());
  switch (p.kind()) {
    case PenaltyKind::Dirac:
      return expectation_under(p.dirac_center(), xi);
    case PenaltyKind::Polyhedral: {
      double best = -kInf;
      for (const Density& v : p.vertices())
        best = std::max(best, expectation_under(v, xi));
      return best;
    }
    case PenaltyKind::Entropic:
      return log_sum_exp(*p.space(), xi.values());
    case PenaltyKind::Custom: {
      const CustomMax r = custom_rho_solve(p, xi.values());
      if (r.gap > kCustomGapTarget && r.gap != kInf)
        throw std::runtime_error("custom penalty solver: duality gap above target");
      return r.value;
    }
  }
  throw std::logic_error("unreachable");
}

ExtReal rho_gamma_ext(const Penalty& p, const std::vector<ExtReal>& xi) {
  if (xi.size() != p.space()->size())
    throw std::invalid_argument("rho_gamma_ext: dimension mismatch");
  std::vector<double> finite(xi.size(), 0.0);
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (xi[i].is_neg_inf())
      throw std::invalid_argument("rho_gamma_ext: -inf atom (ill-posed)");
    if (xi[i].is_pos_inf()) {
      if (p.visible_atoms()[i]) return ExtReal::pos_inf();
      finite[i] = 0.0;  // invisible atom: 0 * inf = 0 under every admissible Q
    } else {
      finite[i] = xi[i].value();
    }
  }
  return ExtReal(rho_gamma(p, RandomVariable(p.space(), finite)));
}

Density rho_argmax(const Penalty& p, const RandomVariable& xi) {
  require_same_space(xi.space(), p.space());
  switch (p.kind()) {
    case PenaltyKind::Dirac:
      return p.dirac_center();
    case PenaltyKind::Polyhedral: {
      std::size_t best = 0;
      double bv = -kInf;
      for (std::size_t k = 0; k < p.vertices().size(); ++k) {
        const double v = expectation_under(p.vertices()[k], xi);
        if (v > bv) {
          bv = v;
          best = k;
        }
      }
      return p.vertices()[best];
    }
    case PenaltyKind::Entropic: {
      // Gibbs density e^xi / E[e^xi].
      const double lse = log_sum_exp(*p.space(), xi.values());
      std::vector<double> g(xi.size());
      for (std::size_t i = 0; i < xi.size(); ++i) g[i] = std::exp(xi[i] - lse);
      // Renormalize exactly to guard the Density mean-1 invariant.
      double mean = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) mean += p.space()->weight(i) * g[i];
      for (double& v : g) v /= mean;
      return Density(p.space(), g);
    }
    case PenaltyKind::Custom: {
      CustomMax r = custom_rho_solve(p, xi.values());
      double mean = 0.0;
      for (std::size_t i = 0; i < r.point.size(); ++i)
        mean += p.space()->weight(i) * r.point[i];
      for (double& v : r.point) v /= mean;
      return Density(p.space(), r.point);
    }
  }
  throw std::logic_error("unreachable");
}

double gauge_norm(const Penalty& p, const RandomVariable& xi) {
  require_same_space(xi.space(), p.space());
  const double sup = xi.sup_norm();
  if (sup == 0.0) return 0.0;
  std::vector<double> ax(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) ax[i] = std::abs(xi[i]);

  auto rho_scaled = [&](double lambda) {
    std::vector<double> v(ax);
    for (double& t : v) t /= lambda;
    return rho_gamma(p, RandomVariable(p.space(), v));
  };

  const double kBracket = 1e6;
  double lo = sup / kBracket, hi = sup * kBracket;
  int expand = 0;
  while (rho_scaled(hi) > 1.0 && expand++ < 60) hi *= 16.0;
  while (rho_scaled(lo) <= 1.0 && expand++ < 120) {
    hi = lo;
    lo /= 16.0;
    if (lo < 1e-300) return 0.0;
  }
  // Invariant: rho(lo) > 1 >= rho(hi); rho nonincreasing in lambda.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rho_scaled(mid) <= 1.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-9 * std::max(1.0, hi)) break;
  }
  return hi;
}

double gauge_norm_dual(const Penalty& p, const RandomVariable& xi) {
  require_same_space(xi.space(), p.space());
  std::vector<double> ax(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) ax[i] = std::abs(xi[i]);
  const RandomVariable axv(p.space(), ax);
  switch (p.kind()) {
    case PenaltyKind::Dirac:
      return expectation_under(p.dirac_center(), axv);
    case PenaltyKind::Polyhedral: {
      double best = 0.0;
      for (const Density& v : p.vertices())
        best = std::max(best, expectation_under(v, axv));
      return best;
    }
    default: {
      // Quasiconcave ratio; the pairwise line searches remain exact because
      // the restriction to a segment is still unimodal.
      const FiniteSpace& sp = *p.space();
      auto neg_ratio = [&](const std::vector<double>& psi) {
        const ExtReal g = p.gamma_raw(psi);
        if (g.is_pos_inf()) return kInf;
        double e = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i)
          e += sp.weight(i) * psi[i] * ax[i];
        return -e / (1.0 + g.value());
      };
      SimplexSolveOptions opt;
      opt.sweeps = 300;
      opt.restarts = 5;
      const SimplexSolveResult r = minimize_on_weighted_simplex(neg_ratio, sp.weights(), opt);
      return r.feasible ? -r.value : 0.0;
    }
  }
}

AssumptionReport assumption_check(const Penalty& p, double tol) {
  AssumptionReport rep;
  const FiniteSpace& sp = *p.space();
  const std::size_t m = sp.size();

  // Normalization: inf gamma over the simplex.
  switch (p.kind()) {
    case PenaltyKind::Dirac:
    case PenaltyKind::Polyhedral:
      rep.min_gamma = 0.0;
      break;
    case PenaltyKind::Entropic:
      rep.min_gamma = 0.0;  // attained at the reference measure
      break;
    case PenaltyKind::Custom: {
      auto obj = [&](const std::vector<double>& psi) {
        const ExtReal g = p.gamma_raw(psi);
        return g.is_pos_inf() ? kInf : g.value();
      };
      SimplexSolveOptions opt;
      opt.sweeps = 200;
      const SimplexSolveResult r = minimize_on_weighted_simplex(obj, sp.weights(), opt);
      rep.min_gamma = r.feasible ? r.value : kInf;
      break;
    }
  }
  rep.normalization = rep.min_gamma <= tol;

  // Sensitivity: a fully supported model with finite penalty.
  switch (p.kind()) {
    case PenaltyKind::Dirac: {
      rep.sensitivity = true;
      for (std::size_t i = 0; i < m; ++i)
        if (!(p.dirac_center()[i] > 0.0)) rep.sensitivity = false;
      break;
    }
    case PenaltyKind::Polyhedral: {
      // Equivalent to the uniform mixture of vertices charging every atom.
      rep.sensitivity = true;
      for (std::size_t i = 0; i < m; ++i) {
        double mix = 0.0;
        for (const Density& v : p.vertices()) mix += v[i];
        if (!(mix > 0.0)) rep.sensitivity = false;
      }
      break;
    }
    case PenaltyKind::Entropic:
      rep.sensitivity = true;  // gamma(P) = 0 with full support
      break;
    case PenaltyKind::Custom: {
      rep.sensitivity = false;
      std::vector<std::vector<double>> probes;
      probes.push_back(std::vector<double>(m, 1.0));
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> v(m, 0.5);
        double mass = 0.0;
        for (std::size_t j = 0; j < m; ++j) mass += sp.weight(j) * v[j];
        v[i] += (1.0 - mass) / sp.weight(i);
        if (v[i] > 0.0) probes.push_back(v);
      }
      for (const auto& q : probes) {
        bool pos = true;
        for (double t : q) pos = pos && t > 0.0;
        if (pos && !p.gamma_raw(q).is_pos_inf()) {
          rep.sensitivity = true;
          break;
        }
      }
      break;
    }
  }

  // Sublevel compactness is automatic on a finite space (the simplex is
  // compact and the built-in gammas are lsc); for Custom we sample for lsc
  // violations we could detect, otherwise trust the construction contract.
  rep.sublevel_bounded = true;
  if (p.kind() == PenaltyKind::Custom)
    rep.note = "sublevel closedness of a custom penalty is a construction contract; "
               "boundedness holds on the finite simplex";
  else
    rep.note = "sublevel sets live in the compact density simplex";
  return rep;
}

}  // namespace rfenchel
