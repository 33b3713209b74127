#pragma once

// Real scalar backends. Every numeric template in the library is written
// against a scalar type S that is either `double` or `Extended` (MPFR with a
// process-wide, runtime-configurable mantissa width).

#include <boost/multiprecision/mpfr.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

namespace mwlab {

namespace bmp = boost::multiprecision;

/// Extended-precision real. Expression templates are disabled so the type
/// behaves like a plain value inside Eigen expressions and `auto` declarations.
using Extended = bmp::number<bmp::mpfr_float_backend<0>, bmp::et_off>;

enum class Backend { Double, Extended };

/// Sets the mantissa width (in bits, >= 53) of every Extended created afterwards.
/// Must be called before worker threads are started.
void set_extended_bits(unsigned bits);
/// Mantissa width of newly created Extended values.
unsigned extended_bits();

const char* backend_name(Backend b);
Backend parse_backend(std::string_view name);

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr Backend backend = Backend::Double;
  static const char* name() { return "double"; }
  static unsigned bits() { return 53; }
  static int digits() { return 17; }
};

template <>
struct ScalarTraits<Extended> {
  static constexpr Backend backend = Backend::Extended;
  static const char* name() { return "extended"; }
  static unsigned bits() { return extended_bits(); }
  /// Enough significant digits for a lossless decimal round trip.
  static int digits() { return static_cast<int>(std::ceil(1.0 + bits() * 0.30103)); }
};

inline double to_double(double x) { return x; }
inline double to_double(const Extended& x) { return x.convert_to<double>(); }

std::string to_string(double x);
std::string to_string(const Extended& x);

template <class S>
S parse_scalar(std::string_view text);
template <>
double parse_scalar<double>(std::string_view text);
template <>
Extended parse_scalar<Extended>(std::string_view text);

/// x^n by repeated squaring; exact for powers of two and free of `pow`.
template <class S>
S ipow(S x, unsigned n) {
  S r(1);
  while (n) {
    if (n & 1u) r *= x;
    x *= x;
    n >>= 1u;
  }
  return r;
}

/// Backend-aware relative tolerance 2^-(bits-20) * max(1, scale).
template <class S>
S tolerance(const S& scale = S(1)) {
  using std::abs;
  S base = ipow(S(0.5), ScalarTraits<S>::bits() - 20);
  S s = abs(scale);
  return base * (s > S(1) ? s : S(1));
}

}  // namespace mwlab
