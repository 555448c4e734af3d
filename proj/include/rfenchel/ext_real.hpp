#ifndef RFENCHEL_EXT_REAL_HPP
#define RFENCHEL_EXT_REAL_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rfenchel {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Extended real value in [-inf, +inf]. NaN is never a legal state; any
/// operation that would produce one (inf - inf, 0 * inf outside the
/// perspective convention) throws instead of poisoning downstream sums.
class ExtReal {
public:
  ExtReal() : v_(0.0) {}
  ExtReal(double v) : v_(v) {
    if (std::isnan(v)) throw std::invalid_argument("ExtReal: NaN");
  }

  static ExtReal pos_inf() { return ExtReal(kInf); }
  static ExtReal neg_inf() { return ExtReal(-kInf); }

  double value() const { return v_; }
  bool is_finite() const { return std::isfinite(v_); }
  bool is_pos_inf() const { return v_ == kInf; }
  bool is_neg_inf() const { return v_ == -kInf; }

  ExtReal operator-() const { return ExtReal(-v_); }

  ExtReal operator+(const ExtReal& o) const {
    if ((is_pos_inf() && o.is_neg_inf()) || (is_neg_inf() && o.is_pos_inf()))
      throw std::domain_error("ExtReal: inf + (-inf) is undefined");
    return ExtReal(v_ + o.v_);
  }
  ExtReal operator-(const ExtReal& o) const { return *this + (-o); }

  /// Plain product; 0 * inf is an error here. The perspective function applies
  /// its own convention before calling this.
  ExtReal operator*(const ExtReal& o) const {
    if ((v_ == 0.0 && !o.is_finite()) || (o.v_ == 0.0 && !is_finite()))
      throw std::domain_error("ExtReal: 0 * inf is undefined");
    return ExtReal(v_ * o.v_);
  }

  bool operator==(const ExtReal& o) const { return v_ == o.v_; }
  bool operator!=(const ExtReal& o) const { return v_ != o.v_; }
  bool operator<(const ExtReal& o) const { return v_ < o.v_; }
  bool operator<=(const ExtReal& o) const { return v_ <= o.v_; }
  bool operator>(const ExtReal& o) const { return v_ > o.v_; }
  bool operator>=(const ExtReal& o) const { return v_ >= o.v_; }

  std::string str() const {
    if (is_pos_inf()) return "inf";
    if (is_neg_inf()) return "-inf";
    return std::to_string(v_);
  }

private:
  double v_;
};

/// Scalar multiple with the convention 0 * (+-inf) = 0 used where the
/// measure-theoretic integral demands it.
inline ExtReal scale_convention(double c, const ExtReal& x) {
  if (c == 0.0) return ExtReal(0.0);
  return ExtReal(c) * x;
}

}  // namespace rfenchel

#endif
