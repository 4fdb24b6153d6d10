#pragma once

// Log-domain scalar for probabilities and security levels far below the
// smallest normal double (think 2^-10000).  The value is carried as its
// base-10 logarithm; zero is represented by -infinity.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>

#include "errors.hpp"

namespace qkdcrit {

class Log10Value {
public:
  Log10Value() : log10_(-std::numeric_limits<double>::infinity()) {}

  static Log10Value zero() { return Log10Value(); }
  static Log10Value one() { return from_log10(0.0); }

  static Log10Value from_log10(double lg) {
    Log10Value v;
    v.log10_ = lg;
    return v;
  }

  static Log10Value from_log2(double lb) {
    return from_log10(lb * kLog10Of2);
  }

  static Log10Value from_double(double x) {
    if (x < 0.0) throw NegativeProbabilityError("Log10Value: negative value");
    if (x == 0.0) return zero();
    return from_log10(std::log10(x));
  }

  /// Value of (mantissa) * 10^(exponent10); mantissa must be positive.
  static Log10Value from_mantissa_exponent(double mantissa, double exponent10) {
    if (mantissa < 0.0)
      throw NegativeProbabilityError("Log10Value: negative mantissa");
    if (mantissa == 0.0) return zero();
    return from_log10(std::log10(mantissa) + exponent10);
  }

  double log10() const { return log10_; }
  double log2() const { return log10_ / kLog10Of2; }
  double ln() const { return log10_ * kLnOf10; }
  bool is_zero() const { return std::isinf(log10_) && log10_ < 0.0; }

  /// Round-trip to double; underflows to 0 below ~1e-308 (by design).
  double value() const {
    return is_zero() ? 0.0 : std::pow(10.0, log10_);
  }

  /// Decimal mantissa in [1, 10) and integer exponent, for display.
  void decompose(double& mantissa, long long& exponent10) const {
    if (is_zero()) {
      mantissa = 0.0;
      exponent10 = 0;
      return;
    }
    double e = std::floor(log10_);
    double m = std::pow(10.0, log10_ - e);
    // Guard the m == 10.0 rounding edge.
    if (m >= 10.0) {
      m /= 10.0;
      e += 1.0;
    }
    mantissa = m;
    exponent10 = static_cast<long long>(e);
  }

  /// Scientific-notation string, e.g. "2.1544e-7".  Exact even when the
  /// value underflows double ("1.0000e-3010").
  std::string to_sci_string(int digits = 4) const {
    if (is_zero()) return "0";
    double m;
    long long e;
    decompose(m, e);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*fe%+lld", digits, m, e);
    // Re-normalize if the mantissa rounded up to 10.0000.
    std::string s(buf);
    if (s.rfind("10.", 0) == 0) {
      std::snprintf(buf, sizeof(buf), "%.*fe%+lld", digits, m / 10.0, e + 1);
      s = buf;
    }
    return s;
  }

  Log10Value operator*(const Log10Value& o) const {
    if (is_zero() || o.is_zero()) return zero();
    return from_log10(log10_ + o.log10_);
  }

  Log10Value operator/(const Log10Value& o) const {
    if (o.is_zero()) throw OutOfRangeError("Log10Value: division by zero");
    if (is_zero()) return zero();
    return from_log10(log10_ - o.log10_);
  }

  /// Sum in the log domain (log-sum-exp, base 10).
  Log10Value operator+(const Log10Value& o) const {
    if (is_zero()) return o;
    if (o.is_zero()) return *this;
    double hi = log10_ > o.log10_ ? log10_ : o.log10_;
    double lo = log10_ > o.log10_ ? o.log10_ : log10_;
    return from_log10(hi + std::log10(1.0 + std::pow(10.0, lo - hi)));
  }

  Log10Value pow(double p) const {
    if (is_zero()) {
      if (p <= 0.0) throw OutOfRangeError("Log10Value: 0 to non-positive power");
      return zero();
    }
    return from_log10(log10_ * p);
  }

  bool operator<(const Log10Value& o) const { return log10_ < o.log10_; }
  bool operator>(const Log10Value& o) const { return log10_ > o.log10_; }
  bool operator<=(const Log10Value& o) const { return log10_ <= o.log10_; }
  bool operator>=(const Log10Value& o) const { return log10_ >= o.log10_; }

  static constexpr double kLog10Of2 = 0.30102999566398119521373889472449;
  static constexpr double kLnOf10 = 2.3025850929940456840179914546844;

private:
  double log10_;
};

}  // namespace qkdcrit
