#ifndef RFENCHEL_ASYMPTOTICS_HPP
#define RFENCHEL_ASYMPTOTICS_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace rfenchel {
namespace seqmodel {

/// h(x) = x^+ e^x = x^+ e^{x^+}; the badly behaving integrand is
/// f(n, x) = n h(x) evaluated in closed form.
double h_badly(double x);

/// Bounded-or-catalog sequence on N = {1, 2, ...}: finite prefix followed by
/// a rule tail with exactly computable limsup.
class SequenceRule {
public:
  enum class Tail { Constant, Periodic, SqrtN, LinearN, LogN, InvN };

  static SequenceRule constant(double c);
  static SequenceRule prefixed(std::vector<double> prefix, double tail_const);
  static SequenceRule periodic(std::vector<double> prefix, std::vector<double> cycle);
  static SequenceRule formula(Tail kind, double coeff);  // c*sqrt(n), c*n, c*log n, c/n

  double at(std::size_t n) const;  // 1-based
  double limsup() const;           // exact from the rule (+inf for growing tails)
  bool bounded() const;
  double sup_norm(std::size_t up_to) const;
  std::size_t prefix_size() const { return prefix_.size(); }
  std::string describe() const;

private:
  SequenceRule() = default;
  std::vector<double> prefix_;
  Tail tail_ = Tail::Constant;
  double coeff_ = 0.0;
  std::vector<double> cycle_;
};

/// Truncation of (N, 2^N, P) with P({n}) = 2^{-n} renormalized over n <= N
/// and the model family P_1 = delta_1, P_n({1}) = 1 - 1/n, P_n({n}) = 1/n.
class SequenceModel {
public:
  explicit SequenceModel(std::size_t truncation);

  std::size_t truncation() const { return n_; }

  /// E_{P_n}[f(., xi)] = (1 - 1/n) h(xi(1)) + h(xi(n)), exact.
  double model_expectation(const SequenceRule& xi, std::size_t n) const;

private:
  std::size_t n_;
};

/// I_{f,gamma}(xi) at truncation level N: sup_{n <= N} E_{P_n}[f(., xi)].
/// Requires a bounded rule.
double I_counterexample(const SequenceModel& m, const SequenceRule& xi);

/// sup_{n <= N} E_{P_n}[f(., xi) 1_{f(., xi) >= T}], exact.
double tail_functional(const SequenceModel& m, const SequenceRule& xi, double threshold);

struct TailLimitCheck {
  double limit_estimate = 0.0;  // tail functional at the largest threshold
  double rule_limsup_h = 0.0;   // limsup_n h(xi(n)) from the rule
  bool agrees = false;
  std::vector<std::pair<double, double>> sweep;  // (T, value)
};
/// Threshold sweep reproducing lim_T sup_n E_{P_n}[f 1_{f >= T}] = limsup h(xi(n)).
TailLimitCheck tail_limit_check(const SequenceModel& m, const SequenceRule& xi,
                                double tol = 1e-6);

/// limsup_n xi(n) <= 0, evaluated exactly from the rule and cross-validated
/// against the tail functional vanishing.
bool D_membership(const SequenceModel& m, const SequenceRule& xi);

/// sup_{x >= 0} x (w - e^x); zero exactly when w <= 1.
double singular_conjugate(double w);

struct TruncationCheck {
  double closed_form = 0.0;
  double lower = 0.0;  // via test vectors (0, x, x, ...) on an N-point grid
  double upper = 0.0;  // concave tangent envelope on the same grid
};
TruncationCheck singular_conjugate_truncation_check(double w, std::size_t grid_n);

struct UiScanReport {
  std::vector<double> thresholds;
  std::vector<double> sup_values;  // sup_{n <= N} E_{P_n}[xi 1_{xi > K}]
  bool uniformly_integrable = false;
  double final_value = 0.0;
};
/// Uniform-integrability surrogate on the sequence space; xi must be >= 0.
/// The sublevel parameter c is immaterial for the indicator penalty of this
/// model and is kept for interface fidelity.
UiScanReport ui_criterion_scan(const SequenceModel& m, const SequenceRule& xi,
                               double c = 1.0);

}  // namespace seqmodel
}  // namespace rfenchel

#endif
