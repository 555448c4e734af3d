#ifndef RFENCHEL_SPACE_HPP
#define RFENCHEL_SPACE_HPP

#include <memory>
#include <stdexcept>
#include <vector>

#include "rfenchel/ext_real.hpp"

namespace rfenchel {

/// Atoms with strictly positive reference weights summing to one.
class FiniteSpace {
public:
  explicit FiniteSpace(std::vector<double> weights);

  std::size_t size() const { return weights_.size(); }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }

private:
  std::vector<double> weights_;
};

using SpacePtr = std::shared_ptr<const FiniteSpace>;

inline SpacePtr make_space(std::vector<double> weights) {
  return std::make_shared<const FiniteSpace>(std::move(weights));
}

SpacePtr uniform_space(std::size_t m);

void require_same_space(const SpacePtr& a, const SpacePtr& b);

/// dQ/dP for a probability Q << P: nonnegative values with unit mean.
class Density {
public:
  Density(SpacePtr space, std::vector<double> values);

  const SpacePtr& space() const { return space_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

private:
  SpacePtr space_;
  std::vector<double> values_;
};

/// A finite-valued random variable (an L^inf element on a finite space).
class RandomVariable {
public:
  RandomVariable(SpacePtr space, std::vector<double> values);

  const SpacePtr& space() const { return space_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double sup_norm() const;

private:
  SpacePtr space_;
  std::vector<double> values_;
};

double expectation(const RandomVariable& x);                     // E_P[x]
double expectation_under(const Density& q, const RandomVariable& x);  // E_Q[x]
double pairing(const RandomVariable& x, const RandomVariable& eta);   // E[x*eta]

/// Atomwise sum of w_i * terms_i in ascending atom order; throws if +inf and
/// -inf both occur. 0-weight convention never applies (weights > 0).
ExtReal weighted_sum(const FiniteSpace& space, const std::vector<ExtReal>& terms);

}  // namespace rfenchel

#endif
