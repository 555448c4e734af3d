#include "rfenchel/space.hpp"

#include <cmath>

namespace rfenchel {

namespace {
constexpr double kMeanTol = 1e-12;
}

FiniteSpace::FiniteSpace(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("FiniteSpace: no atoms");
  double s = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("FiniteSpace: weights must be strictly positive");
    s += w;
  }
  if (std::abs(s - 1.0) > kMeanTol * weights_.size())
    throw std::invalid_argument("FiniteSpace: weights must sum to 1");
}

SpacePtr uniform_space(std::size_t m) {
  return make_space(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

void require_same_space(const SpacePtr& a, const SpacePtr& b) {
  if (a == b) return;
  if (!a || !b || a->weights() != b->weights())
    throw std::invalid_argument("space mismatch");
}

Density::Density(SpacePtr space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_ || values_.size() != space_->size())
    throw std::invalid_argument("Density: dimension mismatch");
  double mean = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
      throw std::invalid_argument("Density: values must be finite and nonnegative");
    mean += values_[i] * space_->weight(i);
  }
  if (std::abs(mean - 1.0) > 1e-10)
    throw std::invalid_argument("Density: mean under P must be 1");
}

RandomVariable::RandomVariable(SpacePtr space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_ || values_.size() != space_->size())
    throw std::invalid_argument("RandomVariable: dimension mismatch");
  for (double v : values_)
    if (!std::isfinite(v))
      throw std::invalid_argument("RandomVariable: values must be finite");
}

double RandomVariable::sup_norm() const {
  double s = 0.0;
  for (double v : values_) s = std::max(s, std::abs(v));
  return s;
}

double expectation(const RandomVariable& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.space()->weight(i) * x[i];
  return s;
}

double expectation_under(const Density& q, const RandomVariable& x) {
  require_same_space(q.space(), x.space());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += q.space()->weight(i) * q[i] * x[i];
  return s;
}

double pairing(const RandomVariable& x, const RandomVariable& eta) {
  require_same_space(x.space(), eta.space());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x.space()->weight(i) * x[i] * eta[i];
  return s;
}

ExtReal weighted_sum(const FiniteSpace& space, const std::vector<ExtReal>& terms) {
  if (terms.size() != space.size())
    throw std::invalid_argument("weighted_sum: dimension mismatch");
  bool pos_inf = false, neg_inf = false;
  double finite = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].is_pos_inf())
      pos_inf = true;
    else if (terms[i].is_neg_inf())
      neg_inf = true;
    else
      finite += space.weight(i) * terms[i].value();
  }
  if (pos_inf && neg_inf)
    throw std::domain_error("weighted_sum: +inf and -inf terms both present");
  if (pos_inf) return ExtReal::pos_inf();
  if (neg_inf) return ExtReal::neg_inf();
  return ExtReal(finite);
}

}  // namespace rfenchel
