#include "mwlab/scalar.hpp"

#include "mwlab/errors.hpp"

#include <charconv>
#include <cstdio>
#include <mpfr.h>

namespace mwlab {

void set_extended_bits(unsigned bits) {
  if (bits < 53) throw ConfigError("extended precision needs at least 53 bits");
  // Boost sizes MPFR values from a decimal digit count; pick the smallest count
  // whose binary precision covers the request.
  unsigned d10 = static_cast<unsigned>(std::ceil(bits * 0.30103));
  Extended::default_precision(d10);
}

unsigned extended_bits() {
  Extended probe;
  return static_cast<unsigned>(mpfr_get_prec(probe.backend().data()));
}

const char* backend_name(Backend b) {
  return b == Backend::Double ? "double" : "extended";
}

Backend parse_backend(std::string_view name) {
  if (name == "double") return Backend::Double;
  if (name == "extended") return Backend::Extended;
  throw ConfigError("unknown backend '" + std::string(name) + "'");
}

std::string to_string(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string to_string(const Extended& x) {
  return x.str(ScalarTraits<Extended>::digits(), std::ios_base::scientific);
}

template <>
double parse_scalar<double>(std::string_view text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DomainError("not a number: '" + std::string(text) + "'");
  return v;
}

template <>
Extended parse_scalar<Extended>(std::string_view text) {
  try {
    return Extended(std::string(text));
  } catch (const std::exception&) {
    throw DomainError("not a number: '" + std::string(text) + "'");
  }
}

}  // namespace mwlab
