#include "cpn/time.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cpn {

SimTime SimTime::from_seconds(double seconds) {
  if (std::isinf(seconds) && seconds > 0) return infinite();
  if (!std::isfinite(seconds)) throw std::invalid_argument("SimTime: non-finite seconds");
  return from_ns(std::llround(seconds * 1e9));
}

double SimTime::seconds() const {
  if (is_infinite()) return std::numeric_limits<double>::infinity();
  return static_cast<double>(ns_) / 1e9;
}

SimTime SimTime::operator+(SimTime rhs) const {
  if (is_infinite() || rhs.is_infinite()) return infinite();
  std::int64_t out = 0;
  if (__builtin_add_overflow(ns_, rhs.ns_, &out)) return infinite();
  return from_ns(out);
}

SimTime SimTime::operator-(SimTime rhs) const {
  if (is_infinite()) return infinite();
  return from_ns(ns_ - rhs.ns_);
}

std::string format_seconds(SimTime t) {
  if (t.is_infinite()) return "inf";
  const std::int64_t ns = t.ns();
  const bool neg = ns < 0;
  const std::uint64_t mag = neg ? static_cast<std::uint64_t>(-(ns + 1)) + 1 : static_cast<std::uint64_t>(ns);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%llu.%09llu", neg ? "-" : "",
                static_cast<unsigned long long>(mag / 1000000000ULL),
                static_cast<unsigned long long>(mag % 1000000000ULL));
  return buf;
}

std::string format_seconds(double seconds) {
  if (std::isnan(seconds)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", seconds);
  return buf;
}

}  // namespace cpn
