#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Core>

namespace noether {

/// Raised when an expression or kernel hits an operation outside its domain
/// (log of a non-positive value, square root of a negative value, division by
/// zero, non-integer power of a negative base).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <typename T>
struct Dual;

/// Primal (innermost real) value of a possibly nested dual.
inline double value_of(double v) { return v; }
template <typename T>
double value_of(const Dual<T>& d);

/// Forward-mode dual number a + b*eps with eps^2 = 0.
///
/// The scalar parameter may itself be a Dual, which gives forward-over-forward
/// differentiation (used for Newton matrices of systems that already contain
/// first derivatives).
template <typename T>
struct Dual {
  T real{};
  T inf{};

  Dual() = default;
  Dual(double value) : real(value), inf(0.0) {}  // NOLINT(google-explicit-constructor)
  template <typename U = T, std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  Dual(const T& value) : real(value), inf(0.0) {}  // NOLINT(google-explicit-constructor)
  Dual(const T& r, const T& i) : real(r), inf(i) {}

  Dual& operator+=(const Dual& o) {
    real += o.real;
    inf += o.inf;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    real -= o.real;
    inf -= o.inf;
    return *this;
  }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.real + b.real, a.inf + b.inf}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.real - b.real, a.inf - b.inf}; }
  friend Dual operator-(const Dual& a) { return {-a.real, -a.inf}; }
  friend Dual operator+(const Dual& a) { return a; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.real * b.real, a.real * b.inf + a.inf * b.real};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    if (value_of(b.real) == 0.0) throw DomainError("division by zero");
    const T q = a.real / b.real;
    return {q, (a.inf - q * b.inf) / b.real};
  }

  // Comparisons look at the primal value only.
  friend bool operator<(const Dual& a, const Dual& b) { return value_of(a) < value_of(b); }
  friend bool operator>(const Dual& a, const Dual& b) { return value_of(a) > value_of(b); }
  friend bool operator<=(const Dual& a, const Dual& b) { return value_of(a) <= value_of(b); }
  friend bool operator>=(const Dual& a, const Dual& b) { return value_of(a) >= value_of(b); }
  friend bool operator==(const Dual& a, const Dual& b) {
    return a.real == b.real && a.inf == b.inf;
  }
  friend bool operator!=(const Dual& a, const Dual& b) { return !(a == b); }

  friend std::ostream& operator<<(std::ostream& os, const Dual& d) {
    return os << d.real << "+" << d.inf << "e";
  }
};

template <typename T>
struct is_dual : std::false_type {};
template <typename T>
struct is_dual<Dual<T>> : std::true_type {};

template <typename T>
double value_of(const Dual<T>& d) {
  return value_of(d.real);
}

namespace detail {
inline bool is_zero(double v) { return v == 0.0; }
template <typename T>
bool is_zero(const Dual<T>& d) {
  return is_zero(d.real) && is_zero(d.inf);
}
}  // namespace detail

// Elementary functions. Each one is written so that it works for plain doubles
// and for any nesting depth of Dual.

inline double safe_div(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return a / b;
}
template <typename T>
Dual<T> safe_div(const Dual<T>& a, const Dual<T>& b) {
  return a / b;
}

inline double ln(double v) {
  if (!(v > 0.0)) throw DomainError("ln of non-positive value " + std::to_string(v));
  return std::log(v);
}
template <typename T>
Dual<T> ln(const Dual<T>& d) {
  return {ln(d.real), safe_div(d.inf, d.real)};
}

inline double sqrt_checked(double v) {
  if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  return std::sqrt(v);
}
template <typename T>
Dual<T> sqrt_checked(const Dual<T>& d) {
  const T r = sqrt_checked(d.real);
  if (detail::is_zero(d.inf)) return {r, T(0.0)};
  return {r, safe_div(d.inf, T(2.0) * r)};
}

inline double sin_of(double v) { return std::sin(v); }
inline double cos_of(double v) { return std::cos(v); }
inline double exp_of(double v) { return std::exp(v); }
template <typename T>
Dual<T> sin_of(const Dual<T>& d) {
  return {sin_of(d.real), cos_of(d.real) * d.inf};
}
template <typename T>
Dual<T> cos_of(const Dual<T>& d) {
  return {cos_of(d.real), -sin_of(d.real) * d.inf};
}
template <typename T>
Dual<T> exp_of(const Dual<T>& d) {
  const T e = exp_of(d.real);
  return {e, e * d.inf};
}

/// |x| with derivative sign(x), and derivative 0 at x = 0.
inline double abs_of(double v) { return std::abs(v); }
template <typename T>
Dual<T> abs_of(const Dual<T>& d) {
  const double p = value_of(d);
  if (p > 0.0) return d;
  if (p < 0.0) return -d;
  return {abs_of(d.real), T(0.0)};
}

inline double pow_of(double base, double exponent) {
  if (base < 0.0 && exponent != std::floor(exponent)) {
    throw DomainError("non-integer power of negative base");
  }
  if (base == 0.0 && exponent < 0.0) throw DomainError("division by zero");
  return std::pow(base, exponent);
}

template <typename T>
Dual<T> pow_of(const Dual<T>& base, const Dual<T>& exponent) {
  const T value = pow_of(base.real, exponent.real);
  if (detail::is_zero(exponent.inf)) {
    // d(a^b) = b a^(b-1) a'; valid for negative a with integer b.
    if (detail::is_zero(base.inf)) return {value, T(0.0)};
    return {value, exponent.real * pow_of(base.real, exponent.real - T(1.0)) * base.inf};
  }
  // General case needs ln(a).
  T d = value * exponent.inf * ln(base.real);
  if (!detail::is_zero(base.inf)) {
    d += exponent.real * pow_of(base.real, exponent.real - T(1.0)) * base.inf;
  }
  return {value, d};
}

/// Lift a scalar into a dual with the given infinitesimal seed.
template <typename T>
Dual<T> seeded(const T& value, double seed = 1.0) {
  return {value, T(seed)};
}

}  // namespace noether

namespace Eigen {

template <typename T>
struct NumTraits<noether::Dual<T>> : GenericNumTraits<noether::Dual<T>> {
  using Real = noether::Dual<T>;
  using NonInteger = noether::Dual<T>;
  using Nested = noether::Dual<T>;
  using Literal = noether::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2 * NumTraits<T>::ReadCost,
    AddCost = 2 * NumTraits<T>::AddCost,
    MulCost = 3 * NumTraits<T>::MulCost + NumTraits<T>::AddCost
  };
  static inline Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static inline Real dummy_precision() { return Real(NumTraits<double>::dummy_precision()); }
  static inline int digits10() { return NumTraits<double>::digits10(); }
};

}  // namespace Eigen
